//! Span-level precision, recall and F1.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::data::EventSpan;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    /// `(precision, recall, f1)`. Empty predictions and empty gold score 1;
    /// otherwise a zero denominator scores 0.
    pub fn prf(&self) -> (f64, f64, f64) {
        let pred = self.tp + self.fp;
        let gold = self.tp + self.fn_;
        if pred == 0 && gold == 0 {
            return (1.0, 1.0, 1.0);
        }
        let p = if pred == 0 { 0.0 } else { self.tp as f64 / pred as f64 };
        let r = if gold == 0 { 0.0 } else { self.tp as f64 / gold as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f)
    }
}

/// Matches as a multiset: each gold span absorbs at most one prediction.
pub fn match_spans(pred: &[(usize, usize)], gold: &[(usize, usize)]) -> Counts {
    let mut left: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for g in gold {
        *left.entry(*g).or_default() += 1;
    }
    let mut tp = 0;
    for p in pred {
        if let Some(n) = left.get_mut(p) {
            if *n > 0 {
                *n -= 1;
                tp += 1;
            }
        }
    }
    Counts {
        tp,
        fp: pred.len() - tp,
        fn_: gold.len() - tp,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeScore {
    pub event_type: String,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_type: Vec<TypeScore>,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub repeat: usize,
    pub seed: u64,
}

/// One serialized row per type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "type")]
    pub event_type: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub repeat: usize,
    pub seed: u64,
}

impl EvalReport {
    pub fn from_counts(counts: &BTreeMap<String, Counts>, repeat: usize, seed: u64) -> Self {
        let mut total = Counts::default();
        let per_type: Vec<TypeScore> = counts
            .iter()
            .map(|(t, c)| {
                total.add(*c);
                let (precision, recall, f1) = c.prf();
                TypeScore {
                    event_type: t.clone(),
                    counts: *c,
                    precision,
                    recall,
                    f1,
                }
            })
            .collect();
        let (micro_precision, micro_recall, micro_f1) = total.prf();
        let macro_f1 = if per_type.is_empty() {
            micro_f1
        } else {
            per_type.iter().map(|s| s.f1).sum::<f64>() / per_type.len() as f64
        };
        EvalReport {
            per_type,
            micro_precision,
            micro_recall,
            micro_f1,
            macro_f1,
            repeat,
            seed,
        }
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        self.per_type
            .iter()
            .map(|s| ReportRow {
                event_type: s.event_type.clone(),
                precision: s.precision,
                recall: s.recall,
                f1: s.f1,
                micro_f1: self.micro_f1,
                macro_f1: self.macro_f1,
                repeat: self.repeat,
                seed: self.seed,
            })
            .collect()
    }
}

/// Typed spans per sentence id.
pub type SpanSets = BTreeMap<String, Vec<EventSpan>>;

/// Scores predictions against gold over every type present in either, plus `extra_types`.
pub fn span_f1_with_types(pred: &SpanSets, gold: &SpanSets, extra_types: &[String], repeat: usize, seed: u64) -> EvalReport {
    let mut types: BTreeSet<String> = extra_types.iter().cloned().collect();
    types.extend(pred.values().chain(gold.values()).flatten().map(|s| s.event_type.clone()));
    let ids: BTreeSet<&String> = pred.keys().chain(gold.keys()).collect();
    let mut counts: BTreeMap<String, Counts> = types.iter().map(|t| (t.clone(), Counts::default())).collect();
    let empty = Vec::new();
    for id in ids {
        let p = pred.get(id).unwrap_or(&empty);
        let g = gold.get(id).unwrap_or(&empty);
        for t in &types {
            let of = |v: &[EventSpan]| -> Vec<(usize, usize)> {
                v.iter().filter(|s| &s.event_type == t).map(|s| (s.start, s.end)).collect()
            };
            counts.get_mut(t).unwrap().add(match_spans(&of(p), &of(g)));
        }
    }
    EvalReport::from_counts(&counts, repeat, seed)
}

pub fn span_f1(pred: &SpanSets, gold: &SpanSets) -> EvalReport {
    span_f1_with_types(pred, gold, &[], 0, 0)
}
