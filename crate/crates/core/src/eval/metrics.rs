use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(token index, event type)` pairs for one sentence.
pub type TriggerSet = Vec<(usize, String)>;

/// Counts and scores for one event type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub event_type: String,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Micro-averaged trigger classification scores with a per-type table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassReport>,
}

/// Precision, recall and F1 from counts.
///
/// An empty prediction set has precision 1 only when there is nothing to
/// find, and symmetrically for recall, so an empty/empty comparison scores
/// 1 across the board.
pub fn precision_recall_f1(tp: usize, predicted: usize, gold: usize) -> (f64, f64, f64) {
    let precision = match (predicted, gold) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        (p, _) => tp as f64 / p as f64,
    };
    let recall = match (gold, predicted) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        (g, _) => tp as f64 / g as f64,
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

impl EvalReport {
    /// Scores predictions sentence by sentence. A prediction is correct only
    /// when the same token carries the same type in the gold set.
    pub fn from_triggers(gold: &[TriggerSet], predicted: &[TriggerSet]) -> Result<Self> {
        if gold.len() != predicted.len() {
            return Err(Error::Config(format!(
                "{} gold sentences but {} predicted",
                gold.len(),
                predicted.len()
            )));
        }
        #[derive(Default)]
        struct Counts {
            tp: usize,
            pred: usize,
            gold: usize,
        }
        let mut by_type: BTreeMap<&str, Counts> = BTreeMap::new();
        for (g, p) in gold.iter().zip(predicted) {
            let gset: BTreeSet<(usize, &str)> = g.iter().map(|(i, t)| (*i, t.as_str())).collect();
            let pset: BTreeSet<(usize, &str)> = p.iter().map(|(i, t)| (*i, t.as_str())).collect();
            for (_, t) in &gset {
                by_type.entry(t).or_default().gold += 1;
            }
            for item @ (_, t) in &pset {
                let c = by_type.entry(t).or_default();
                c.pred += 1;
                if gset.contains(item) {
                    c.tp += 1;
                }
            }
        }
        let per_class: Vec<ClassReport> = by_type
            .into_iter()
            .map(|(t, c)| {
                let (precision, recall, f1) = precision_recall_f1(c.tp, c.pred, c.gold);
                ClassReport {
                    event_type: t.to_string(),
                    true_positives: c.tp,
                    predicted: c.pred,
                    gold: c.gold,
                    precision,
                    recall,
                    f1,
                }
            })
            .collect();
        let tp = per_class.iter().map(|c| c.true_positives).sum();
        let pred = per_class.iter().map(|c| c.predicted).sum();
        let g = per_class.iter().map(|c| c.gold).sum();
        let (precision, recall, f1) = precision_recall_f1(tp, pred, g);
        Ok(EvalReport {
            true_positives: tp,
            predicted: pred,
            gold: g,
            precision,
            recall,
            f1,
            per_class,
        })
    }

    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let width = self.per_class.iter().map(|c| c.event_type.len()).max().unwrap_or(0).max(5);
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>7}  {:>7}  {:>7}",
            "type", "tp", "pred", "gold", "P", "R", "F1"
        );
        let mut line = |name: &str, tp: usize, pred: usize, gold: usize, p: f64, r: f64, f: f64| {
            let _ = writeln!(
                out,
                "{name:<width$}  {tp:>6}  {pred:>6}  {gold:>6}  {:>7.2}  {:>7.2}  {:>7.2}",
                100.0 * p,
                100.0 * r,
                100.0 * f
            );
        };
        for c in &self.per_class {
            line(&c.event_type, c.true_positives, c.predicted, c.gold, c.precision, c.recall, c.f1);
        }
        line(
            "micro",
            self.true_positives,
            self.predicted,
            self.gold,
            self.precision,
            self.recall,
            self.f1,
        );
        out
    }
}
