use crate::corpus::{SentenceExample, Vocabs};
use crate::error::{Error, Result};

/// Sentences longer than this are truncated.
pub const DEFAULT_MAX_LEN: usize = 50;

/// Id-level view of a sentence, ready for the models.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSentence {
    pub words: Vec<usize>,
    pub pos: Vec<usize>,
    pub ner: Vec<usize>,
    pub positions: Vec<usize>,
    /// `(head, dependent, label id)`
    pub edges: Vec<(usize, usize, usize)>,
    /// Gold class per token; 0 is NONE.
    pub gold: Vec<usize>,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Maps strings to ids, dropping tokens past `max_len` together with every
/// edge or trigger that touches them.
pub fn encode_sentence(
    example: &SentenceExample,
    vocabs: &Vocabs,
    max_len: usize,
) -> Result<EncodedSentence> {
    if max_len == 0 {
        return Err(Error::Config("max_len must be at least 1".into()));
    }
    let n = example.len().min(max_len);
    let words = example.tokens[..n].iter().map(|t| vocabs.word.id(t)).collect();
    let pos = example.pos[..n].iter().map(|t| vocabs.pos.id(t)).collect();
    let ner = example.ner[..n].iter().map(|t| vocabs.ner.id(t)).collect();
    let mut edges = Vec::with_capacity(example.edges.len());
    for e in &example.edges {
        if e.head >= n || e.dependent >= n {
            continue;
        }
        let label =
            vocabs.deplabel.get(&e.label).ok_or_else(|| Error::UnknownLabel(e.label.clone()))?;
        edges.push((e.head, e.dependent, label));
    }
    let mut gold = vec![0; n];
    for t in &example.triggers {
        if t.index < n {
            gold[t.index] = vocabs.event.id(&t.event_type);
        }
    }
    Ok(EncodedSentence { words, pos, ner, positions: (0..n).collect(), edges, gold })
}
