use std::fs;
use std::path::Path;

use crate::corpus::parse_jsonl_unlabeled_str;
use crate::error::{Error, Result};
use crate::eval::checkpoint::Checkpoint;
use crate::eval::train::predict_triggers;

/// Appends `"pred_triggers":[[index,type],...]` to every non-blank input
/// line, leaving the original text of each line untouched.
pub fn annotate_jsonl(checkpoint: &Checkpoint, input: &str) -> Result<String> {
    let examples = parse_jsonl_unlabeled_str(input)?;
    let predicted = predict_triggers(&checkpoint.model, &checkpoint.vocabs, &examples)?;
    let lines = input.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut out = String::with_capacity(input.len() + 32 * examples.len());
    for ((i, line), triggers) in lines.zip(&predicted) {
        let body = line.trim_end();
        let Some(stem) = body.strip_suffix('}') else {
            return Err(Error::Corpus { line: i + 1, msg: "line is not a JSON object".into() });
        };
        out.push_str(stem);
        out.push_str(",\"pred_triggers\":");
        out.push_str(&serde_json::to_string(triggers)?);
        out.push_str("}\n");
    }
    Ok(out)
}

/// Returns the number of annotated sentences.
pub fn predict_file(
    checkpoint: &Checkpoint,
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
) -> Result<usize> {
    let (input, output) = (input.as_ref(), output.as_ref());
    let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let annotated = annotate_jsonl(checkpoint, &text)?;
    fs::write(output, &annotated).map_err(|e| Error::io(output, e))?;
    Ok(annotated.lines().count())
}
