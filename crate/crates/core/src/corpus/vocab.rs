use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::SentenceExample;
use crate::error::{Error, Result};

/// Reserved entry 0 of the word, POS and NER vocabularies.
pub const UNK: &str = "<unk>";
/// Reserved entry 0 of the event-type vocabulary.
pub const NONE_EVENT: &str = "NONE";

/// Bidirectional string/id table.
///
/// A vocabulary either reserves id 0 for unknown strings or has no
/// reservation at all, in which case lookups of unregistered strings fail.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    reserved: bool,
    itos: Vec<String>,
    stoi: HashMap<String, usize>,
}

#[derive(Clone, Serialize, Deserialize)]
struct VocabRepr {
    reserved: bool,
    entries: Vec<String>,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        let stoi = r.entries.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Vocab { reserved: r.reserved, itos: r.entries, stoi }
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr { reserved: v.reserved, entries: v.itos }
    }
}

impl Vocab {
    /// Vocabulary whose id 0 is `reserved` and absorbs unknown strings.
    pub fn with_reserved(reserved: &str) -> Self {
        let mut v = Vocab { reserved: true, itos: Vec::new(), stoi: HashMap::new() };
        v.itos.push(reserved.to_string());
        v.stoi.insert(reserved.to_string(), 0);
        v
    }

    /// Vocabulary without an unknown entry.
    pub fn plain() -> Self {
        Vocab { reserved: false, itos: Vec::new(), stoi: HashMap::new() }
    }

    pub fn insert(&mut self, s: &str) -> usize {
        if let Some(&id) = self.stoi.get(s) {
            return id;
        }
        let id = self.itos.len();
        self.itos.push(s.to_string());
        self.stoi.insert(s.to_string(), id);
        id
    }

    pub fn get(&self, s: &str) -> Option<usize> {
        self.stoi.get(s).copied()
    }

    /// Id of `s`, or 0 when unregistered.
    pub fn id(&self, s: &str) -> usize {
        self.get(s).unwrap_or(0)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.itos.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.itos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.itos.is_empty()
    }

    pub fn has_reserved(&self) -> bool {
        self.reserved
    }

    pub fn entries(&self) -> &[String] {
        &self.itos
    }

    /// SHA-256 over the ordered entries, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update([u8::from(self.reserved)]);
        for s in &self.itos {
            h.update((s.len() as u64).to_le_bytes());
            h.update(s.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabs {
    pub word: Vocab,
    pub pos: Vocab,
    pub ner: Vocab,
    pub deplabel: Vocab,
    pub event: Vocab,
}

impl Vocabs {
    /// Number of edge types.
    pub fn num_labels(&self) -> usize {
        self.deplabel.len()
    }

    /// Number of output classes including NONE.
    pub fn num_classes(&self) -> usize {
        self.event.len()
    }

    pub fn hashes(&self) -> std::collections::BTreeMap<String, String> {
        [
            ("word", &self.word),
            ("pos", &self.pos),
            ("ner", &self.ner),
            ("deplabel", &self.deplabel),
            ("event", &self.event),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.hash()))
        .collect()
    }
}

/// Builds all vocabularies from training examples in first-occurrence order.
/// `min_count` applies to words; rarer words fall back to UNK.
pub fn build_vocabs(examples: &[SentenceExample], min_count: usize) -> Result<Vocabs> {
    if examples.is_empty() {
        return Err(Error::Config("cannot build vocabularies from an empty training set".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for ex in examples {
        for t in &ex.tokens {
            let c = counts.entry(t).or_insert(0);
            if *c == 0 {
                order.push(t);
            }
            *c += 1;
        }
    }
    let mut word = Vocab::with_reserved(UNK);
    for t in order {
        if counts[t] >= min_count {
            word.insert(t);
        }
    }
    let mut pos = Vocab::with_reserved(UNK);
    let mut ner = Vocab::with_reserved(UNK);
    let mut deplabel = Vocab::plain();
    let mut event = Vocab::with_reserved(NONE_EVENT);
    for ex in examples {
        ex.pos.iter().for_each(|p| {
            pos.insert(p);
        });
        ex.ner.iter().for_each(|p| {
            ner.insert(p);
        });
        ex.edges.iter().for_each(|e| {
            deplabel.insert(&e.label);
        });
        ex.triggers.iter().for_each(|t| {
            event.insert(&t.event_type);
        });
    }
    Ok(Vocabs { word, pos, ner, deplabel, event })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Edge, Trigger};

    fn ex(tokens: &[&str], edges: &[(usize, usize, &str)]) -> SentenceExample {
        let n = tokens.len();
        SentenceExample {
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            pos: vec!["X".into(); n],
            ner: vec!["O".into(); n],
            edges: edges.iter().map(|&(h, d, l)| Edge::new(h, d, l)).collect(),
            triggers: vec![],
        }
    }

    #[test]
    fn labels_are_deduplicated() {
        let a = ex(&["a", "b", "c"], &[(1, 0, "nsubj"), (1, 2, "obj")]);
        let b = ex(&["d", "e"], &[(1, 0, "nsubj")]);
        let v = build_vocabs(&[a, b], 1).unwrap();
        assert_eq!(v.deplabel.len(), 2);
        assert!(!v.deplabel.has_reserved());
        assert_eq!(v.deplabel.get("obj"), Some(1));
        assert_eq!(v.deplabel.get("amod"), None);
    }

    #[test]
    fn min_count_maps_rare_words_to_unk() {
        let a = ex(&["a", "a", "b", "a"], &[]);
        let v = build_vocabs(&[a], 2).unwrap();
        assert_eq!(v.word.id("b"), 0);
        assert_eq!(v.word.id("a"), 1);
        assert_eq!(v.word.token(0), Some(UNK));
    }

    #[test]
    fn event_vocab_reserves_none() {
        let mut a = ex(&["x", "y"], &[]);
        a.triggers = vec![Trigger::new(1, "Attack")];
        let v = build_vocabs(&[a], 1).unwrap();
        assert_eq!(v.event.token(0), Some(NONE_EVENT));
        assert_eq!(v.event.id("Attack"), 1);
        assert_eq!(v.num_classes(), 2);
    }

    #[test]
    fn empty_training_set_rejected() {
        assert!(build_vocabs(&[], 1).is_err());
    }

    #[test]
    fn hash_changes_with_entries_and_survives_serde() {
        let mut v = Vocab::with_reserved(UNK);
        v.insert("a");
        let h = v.hash();
        let back: Vocab = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.hash(), h);
        v.insert("b");
        assert_ne!(v.hash(), h);
    }

    #[test]
    fn id_token_round_trip() {
        let mut v = Vocab::with_reserved(UNK);
        for s in ["p", "q", "r"] {
            v.insert(s);
        }
        for id in 0..v.len() {
            assert_eq!(v.id(v.token(id).unwrap()), id);
        }
    }
}
