use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed dependency edge: `head` governs `dependent`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize, String)", into = "(usize, usize, String)")]
pub struct Edge {
    pub head: usize,
    pub dependent: usize,
    pub label: String,
}

impl Edge {
    pub fn new(head: usize, dependent: usize, label: impl Into<String>) -> Self {
        Edge { head, dependent, label: label.into() }
    }
}

impl From<(usize, usize, String)> for Edge {
    fn from((head, dependent, label): (usize, usize, String)) -> Self {
        Edge { head, dependent, label }
    }
}

impl From<Edge> for (usize, usize, String) {
    fn from(e: Edge) -> Self {
        (e.head, e.dependent, e.label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, String)", into = "(usize, String)")]
pub struct Trigger {
    pub index: usize,
    pub event_type: String,
}

impl Trigger {
    pub fn new(index: usize, event_type: impl Into<String>) -> Self {
        Trigger { index, event_type: event_type.into() }
    }
}

impl From<(usize, String)> for Trigger {
    fn from((index, event_type): (usize, String)) -> Self {
        Trigger { index, event_type }
    }
}

impl From<Trigger> for (usize, String) {
    fn from(t: Trigger) -> Self {
        (t.index, t.event_type)
    }
}

/// One annotated sentence; every index is 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceExample {
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    pub ner: Vec<String>,
    pub edges: Vec<Edge>,
    pub triggers: Vec<Trigger>,
}

#[derive(Deserialize)]
struct RawExample {
    tokens: Vec<String>,
    pos: Vec<String>,
    ner: Vec<String>,
    edges: Vec<Edge>,
    triggers: Option<Vec<Trigger>>,
}

impl SentenceExample {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks the structural invariants, reporting the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.tokens.len();
        if n == 0 {
            return Err("sentence has no tokens".into());
        }
        if self.pos.len() != n || self.ner.len() != n {
            return Err(format!(
                "length mismatch: {} tokens, {} pos tags, {} ner tags",
                n,
                self.pos.len(),
                self.ner.len()
            ));
        }
        for e in &self.edges {
            if e.head >= n || e.dependent >= n {
                return Err(format!(
                    "edge [{}, {}, {:?}] index out of range for {} tokens",
                    e.head, e.dependent, e.label, n
                ));
            }
            if e.head == e.dependent {
                return Err(format!("self-loop edge on token {}", e.head));
            }
        }
        let mut seen = vec![false; n];
        for t in &self.triggers {
            if t.index >= n {
                return Err(format!("trigger index {} out of range for {} tokens", t.index, n));
            }
            if std::mem::replace(&mut seen[t.index], true) {
                return Err(format!("more than one trigger on token {}", t.index));
            }
        }
        Ok(())
    }
}

fn parse_lines(text: &str, require_triggers: bool) -> Result<Vec<SentenceExample>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawExample = serde_json::from_str(line)
            .map_err(|e| Error::Corpus { line: line_no, msg: e.to_string() })?;
        let triggers = match raw.triggers {
            Some(t) => t,
            None if require_triggers => {
                return Err(Error::Corpus { line: line_no, msg: "missing field `triggers`".into() })
            }
            None => Vec::new(),
        };
        let ex = SentenceExample {
            tokens: raw.tokens,
            pos: raw.pos,
            ner: raw.ner,
            edges: raw.edges,
            triggers,
        };
        ex.validate().map_err(|msg| Error::Corpus { line: line_no, msg })?;
        out.push(ex);
    }
    Ok(out)
}

/// Parses JSON Lines text; blank lines are skipped.
pub fn parse_jsonl_str(text: &str) -> Result<Vec<SentenceExample>> {
    parse_lines(text, true)
}

pub fn parse_jsonl(path: impl AsRef<Path>) -> Result<Vec<SentenceExample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lines(&text, true)
}

/// As [`parse_jsonl_str`], but the `triggers` key may be absent.
pub fn parse_jsonl_unlabeled_str(text: &str) -> Result<Vec<SentenceExample>> {
    parse_lines(text, false)
}

/// As [`parse_jsonl`], but the `triggers` key may be absent.
pub fn parse_jsonl_unlabeled(path: impl AsRef<Path>) -> Result<Vec<SentenceExample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lines(&text, false)
}

pub fn write_jsonl(path: impl AsRef<Path>, examples: &[SentenceExample]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for ex in examples {
        serde_json::to_writer(&mut buf, ex)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}
