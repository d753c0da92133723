//! Seeded template grammar producing sentences where, for a controlled
//! fraction of the data, the trigger's event type can only be read off a
//! dependency label.
//!
//! A corpus split is built from `n` generation units. A unit is either an
//! ambiguous pair (two sentences with identical tokens, tags and unlabeled
//! edges whose only difference is the label of the edge between the trigger
//! verb and its first argument) or a single filler sentence. Exactly
//! `round(ambiguity * n)` units are pairs. Fillers use unambiguous trigger
//! verbs, or no trigger at all.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_jsonl, Edge, SentenceExample, Trigger};
use crate::error::{Error, Result};

pub const DEP_LABELS: [&str; 8] =
    ["nsubj", "obj", "obl", "det", "amod", "case", "advmod", "compound"];

pub const EVENT_TYPES: [&str; 5] = ["Attack", "EndPosition", "Transport", "Die", "Meet"];

const DETS: [&str; 3] = ["the", "a", "this"];
const ADJS: [&str; 6] = ["local", "armed", "former", "young", "angry", "senior"];
const PERSONS: [&str; 12] = [
    "police", "soldiers", "officer", "troops", "manager", "guards", "workers", "rebels",
    "minister", "crew", "reporters", "staff",
];
const ORGS: [&str; 6] = ["company", "army", "union", "ministry", "council", "bank"];
const PLACES: [&str; 6] = ["Baghdad", "Paris", "Cairo", "Boston", "Kabul", "Lima"];
const ADVS: [&str; 4] = ["yesterday", "today", "again", "quickly"];
const PREPS: [&str; 3] = ["in", "near", "from"];

/// `(verb, label_a, type_a, label_b, type_b)`
const AMBIGUOUS_VERBS: [(&str, &str, &str, &str, &str); 6] = [
    ("fired", "nsubj", "Attack", "obj", "EndPosition"),
    ("struck", "nsubj", "Attack", "obj", "Die"),
    ("left", "nsubj", "Transport", "obj", "EndPosition"),
    ("hit", "nsubj", "Attack", "obl", "Die"),
    ("joined", "nsubj", "Meet", "obj", "Transport"),
    ("dropped", "obl", "Transport", "obj", "EndPosition"),
];

const TRIGGER_VERBS: [(&str, &str); 10] = [
    ("attacked", "Attack"),
    ("bombed", "Attack"),
    ("resigned", "EndPosition"),
    ("retired", "EndPosition"),
    ("traveled", "Transport"),
    ("arrived", "Transport"),
    ("died", "Die"),
    ("perished", "Die"),
    ("met", "Meet"),
    ("visited", "Meet"),
];

const PLAIN_VERBS: [&str; 6] = ["said", "praised", "watched", "discussed", "expected", "reported"];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    /// Fraction of generation units that are ambiguous pairs.
    pub ambiguity: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig { n_train: 2000, n_dev: 200, n_test: 200, ambiguity: 0.5, seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSplit {
    pub examples: Vec<SentenceExample>,
    /// Indices of the two members of every ambiguous pair.
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub train: SyntheticSplit,
    pub dev: SyntheticSplit,
    pub test: SyntheticSplit,
}

impl SyntheticCorpus {
    /// Writes `train.jsonl`, `dev.jsonl` and `test.jsonl` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(dir.join("train.jsonl"), &self.train.examples)?;
        write_jsonl(dir.join("dev.jsonl"), &self.dev.examples)?;
        write_jsonl(dir.join("test.jsonl"), &self.test.examples)
    }
}

#[derive(Default)]
struct Builder {
    tokens: Vec<String>,
    pos: Vec<String>,
    ner: Vec<String>,
    edges: Vec<Edge>,
    triggers: Vec<Trigger>,
}

impl Builder {
    fn push(&mut self, word: &str, pos: &str, ner: &str) -> usize {
        self.tokens.push(word.into());
        self.pos.push(pos.into());
        self.ner.push(ner.into());
        self.tokens.len() - 1
    }

    fn edge(&mut self, head: usize, dep: usize, label: &str) {
        self.edges.push(Edge::new(head, dep, label));
    }

    fn finish(self) -> SentenceExample {
        SentenceExample {
            tokens: self.tokens,
            pos: self.pos,
            ner: self.ner,
            edges: self.edges,
            triggers: self.triggers,
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("non-empty lexicon")
}

fn head_noun(rng: &mut ChaCha8Rng) -> (&'static str, &'static str) {
    if rng.gen_bool(0.7) {
        (pick(rng, &PERSONS), "PER")
    } else {
        (pick(rng, &ORGS), "ORG")
    }
}

/// Emits `[det] [adj] [compound] noun` and returns the noun's index.
fn noun_phrase(rng: &mut ChaCha8Rng, b: &mut Builder) -> usize {
    let det = rng.gen_bool(0.6).then(|| pick(rng, &DETS));
    let adj = rng.gen_bool(0.3).then(|| pick(rng, &ADJS));
    let compound = rng.gen_bool(0.15).then(|| head_noun(rng));
    let (noun, ner) = head_noun(rng);
    let mut deps = Vec::new();
    if let Some(d) = det {
        deps.push((b.push(d, "DET", "O"), "det"));
    }
    if let Some(a) = adj {
        deps.push((b.push(a, "ADJ", "O"), "amod"));
    }
    if let Some((c, cner)) = compound {
        deps.push((b.push(c, "NOUN", cner), "compound"));
    }
    let head = b.push(noun, "NOUN", ner);
    for (d, label) in deps {
        b.edge(head, d, label);
    }
    head
}

/// Optional prepositional phrase and adverb hanging off `verb`.
fn verb_modifiers(rng: &mut ChaCha8Rng, b: &mut Builder, verb: usize) {
    if rng.gen_bool(0.4) {
        let prep = b.push(pick(rng, &PREPS), "ADP", "O");
        let place = b.push(pick(rng, &PLACES), "PROPN", "LOC");
        b.edge(verb, place, "obl");
        b.edge(place, prep, "case");
    }
    if rng.gen_bool(0.3) {
        let adv = b.push(pick(rng, &ADVS), "ADV", "O");
        b.edge(verb, adv, "advmod");
    }
}

fn filler(rng: &mut ChaCha8Rng) -> SentenceExample {
    let mut b = Builder::default();
    let subj = noun_phrase(rng, &mut b);
    let trigger = rng.gen_bool(0.7).then(|| *TRIGGER_VERBS.choose(rng).expect("non-empty"));
    let word = trigger.map_or_else(|| pick(rng, &PLAIN_VERBS), |(w, _)| w);
    let verb = b.push(word, "VERB", "O");
    b.edge(verb, subj, "nsubj");
    if let Some((_, ty)) = trigger {
        b.triggers.push(Trigger::new(verb, ty));
    }
    if rng.gen_bool(0.5) {
        let obj = noun_phrase(rng, &mut b);
        b.edge(verb, obj, "obj");
    }
    verb_modifiers(rng, &mut b, verb);
    b.finish()
}

fn ambiguous_pair(rng: &mut ChaCha8Rng) -> (SentenceExample, SentenceExample) {
    let (word, label_a, type_a, label_b, type_b) =
        *AMBIGUOUS_VERBS.choose(rng).expect("non-empty");
    let mut b = Builder::default();
    let arg = noun_phrase(rng, &mut b);
    let verb = b.push(word, "VERB", "O");
    let key_edge = b.edges.len();
    b.edge(verb, arg, label_a);
    b.triggers.push(Trigger::new(verb, type_a));
    verb_modifiers(rng, &mut b, verb);
    // Ambiguous verbs always get an adjunct, so the key argument never is
    // the verb's only dependent.
    if b.edges.len() == key_edge + 1 {
        let adv = b.push(pick(rng, &ADVS), "ADV", "O");
        b.edge(verb, adv, "advmod");
    }
    let first = b.finish();
    let mut second = first.clone();
    second.edges[key_edge].label = label_b.to_string();
    second.triggers[0].event_type = type_b.to_string();
    (first, second)
}

fn split(rng: &mut ChaCha8Rng, units: usize, ambiguity: f64) -> SyntheticSplit {
    let n_pairs = ((ambiguity * units as f64).round() as usize).min(units);
    let mut kinds: Vec<bool> = (0..units).map(|i| i < n_pairs).collect();
    kinds.shuffle(rng);
    let mut examples = Vec::with_capacity(units + n_pairs);
    let mut pairs = Vec::with_capacity(n_pairs);
    for is_pair in kinds {
        if is_pair {
            let (a, b) = ambiguous_pair(rng);
            pairs.push((examples.len(), examples.len() + 1));
            examples.push(a);
            examples.push(b);
        } else {
            examples.push(filler(rng));
        }
    }
    SyntheticSplit { examples, pairs }
}

/// Generates the three splits from one seeded stream.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticCorpus> {
    if config.n_train == 0 || config.n_dev == 0 || config.n_test == 0 {
        return Err(Error::Config("every split needs at least one unit".into()));
    }
    if !(0.0..=1.0).contains(&config.ambiguity) {
        return Err(Error::Config(format!("ambiguity {} outside [0, 1]", config.ambiguity)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let train = split(&mut rng, config.n_train, config.ambiguity);
    let dev = split(&mut rng, config.n_dev, config.ambiguity);
    let test = split(&mut rng, config.n_test, config.ambiguity);
    Ok(SyntheticCorpus { train, dev, test })
}

/// True when `a` and `b` agree on everything a label-blind model can see but
/// differ in the label of exactly one edge and in at least one event type.
pub fn is_ambiguous_pair(a: &SentenceExample, b: &SentenceExample) -> bool {
    if a.tokens != b.tokens || a.pos != b.pos || a.ner != b.ner || a.edges.len() != b.edges.len() {
        return false;
    }
    let unlabeled = |x: &SentenceExample| {
        let mut v: Vec<(usize, usize)> = x.edges.iter().map(|e| (e.head, e.dependent)).collect();
        v.sort_unstable();
        v
    };
    if unlabeled(a) != unlabeled(b) {
        return false;
    }
    fn label_of(x: &SentenceExample, h: usize, d: usize) -> Vec<&str> {
        let mut ls: Vec<&str> = x
            .edges
            .iter()
            .filter(|e| e.head == h && e.dependent == d)
            .map(|e| e.label.as_str())
            .collect();
        ls.sort_unstable();
        ls
    }
    let differing = a
        .edges
        .iter()
        .filter(|e| label_of(a, e.head, e.dependent) != label_of(b, e.head, e.dependent))
        .count();
    let mut ta: Vec<(usize, &str)> =
        a.triggers.iter().map(|t| (t.index, t.event_type.as_str())).collect();
    let mut tb: Vec<(usize, &str)> =
        b.triggers.iter().map(|t| (t.index, t.event_type.as_str())).collect();
    ta.sort_unstable();
    tb.sort_unstable();
    let same_positions = ta.iter().map(|t| t.0).eq(tb.iter().map(|t| t.0));
    differing == 1 && same_positions && ta != tb
}

/// Recovers ambiguous pairs from a flat example list (pairs are adjacent).
pub fn find_ambiguous_pairs(examples: &[SentenceExample]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < examples.len() {
        if is_ambiguous_pair(&examples[i], &examples[i + 1]) {
            out.push((i, i + 1));
            i += 2;
        } else {
            i += 1;
        }
    }
    out
}
