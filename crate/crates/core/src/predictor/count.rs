//! Add-k smoothed adjacent-bigram filler model for a single mask slot.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CandidateSource;
use crate::error::{Error, Result};
use crate::intervention::{CandidateTrigger, MaskedContext};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountPredictor {
    pub k: f64,
    /// Token → occurrences; its keys are the candidate vocabulary.
    pub unigram: BTreeMap<String, u64>,
    /// prev → token → count of the bigram `(prev, token)`.
    pub left: BTreeMap<String, BTreeMap<String, u64>>,
    /// next → token → count of the bigram `(token, next)`.
    pub right: BTreeMap<String, BTreeMap<String, u64>>,
}

/// Accumulates unigram and adjacent-bigram counts, with `<s>` and `</s>` at the edges.
pub fn fit_counts<S: AsRef<str>>(corpus: &[Vec<S>], k: f64) -> Result<CountPredictor> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidConfig(format!("smoothing constant k must be > 0, got {k}")));
    }
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let mut m = CountPredictor {
        k,
        unigram: BTreeMap::new(),
        left: BTreeMap::new(),
        right: BTreeMap::new(),
    };
    for sent in corpus {
        let toks: Vec<&str> = sent.iter().map(AsRef::as_ref).collect();
        for (i, &t) in toks.iter().enumerate() {
            *m.unigram.entry(t.to_string()).or_default() += 1;
            let prev = if i == 0 { BOS } else { toks[i - 1] };
            let next = toks.get(i + 1).copied().unwrap_or(EOS);
            *m.left.entry(prev.to_string()).or_default().entry(t.to_string()).or_default() += 1;
            *m.right.entry(next.to_string()).or_default().entry(t.to_string()).or_default() += 1;
        }
    }
    Ok(m)
}

impl CountPredictor {
    pub fn left_count(&self, prev: &str, token: &str) -> u64 {
        self.left.get(prev).and_then(|m| m.get(token)).copied().unwrap_or(0)
    }

    pub fn right_count(&self, token: &str, next: &str) -> u64 {
        self.right.get(next).and_then(|m| m.get(token)).copied().unwrap_or(0)
    }

    /// `ln(countL(prev, v) + k) + ln(countR(v, next) + k)`
    pub fn logit(&self, prev: &str, token: &str, next: &str) -> f64 {
        (self.left_count(prev, token) as f64 + self.k).ln() + (self.right_count(token, next) as f64 + self.k).ln()
    }

    pub fn vocab_len(&self) -> usize {
        self.unigram.len()
    }

    fn neighbours(masked: &MaskedContext) -> (&str, &str) {
        (masked.prev().unwrap_or(BOS), masked.next().unwrap_or(EOS))
    }

    /// Top `top_n` fillers by logit, ties broken lexicographically, original excluded.
    ///
    /// Only tokens seen next to the mask's neighbours are scored explicitly;
    /// every other token sits at the floor `2·ln k` and is taken in
    /// lexicographic order.
    pub fn predict(&self, masked: &MaskedContext, top_n: usize) -> Vec<CandidateTrigger> {
        if top_n == 0 {
            return Vec::new();
        }
        let (prev, next) = Self::neighbours(masked);
        let excluded = |t: &str| masked.original_trigger.len() == 1 && masked.original_trigger[0] == t;
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for m in [self.left.get(prev), self.right.get(next)].into_iter().flatten() {
            seen.extend(m.keys().map(String::as_str).filter(|t| self.unigram.contains_key(*t)));
        }
        let mut scored: Vec<(f64, &str)> = seen
            .iter()
            .filter(|t| !excluded(t))
            .map(|t| (self.logit(prev, t, next), *t))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        scored.truncate(top_n);
        if scored.len() < top_n {
            let floor = 2.0 * self.k.ln();
            let fill = self
                .unigram
                .keys()
                .map(String::as_str)
                .filter(|t| !seen.contains(t) && !excluded(t))
                .take(top_n - scored.len())
                .map(|t| (floor, t))
                .collect::<Vec<_>>();
            scored.extend(fill);
        }
        scored
            .into_iter()
            .map(|(l, t)| CandidateTrigger::predicted(t, l))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: CountPredictor = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        if !(m.k > 0.0) {
            return Err(Error::InvalidConfig("smoothing constant k must be > 0".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl CandidateSource for CountPredictor {
    fn candidates(&self, masked: &MaskedContext, top_n: usize) -> Result<Vec<CandidateTrigger>> {
        Ok(self.predict(masked, top_n))
    }
}
