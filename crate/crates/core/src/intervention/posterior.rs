use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTrigger {
    pub surface: Vec<String>,
    pub logit: f64,
    pub is_original: bool,
}

impl CandidateTrigger {
    pub fn original(surface: Vec<String>) -> Self {
        CandidateTrigger {
            surface,
            logit: 0.0,
            is_original: true,
        }
    }

    pub fn predicted(token: impl Into<String>, logit: f64) -> Self {
        CandidateTrigger {
            surface: vec![token.into()],
            logit,
            is_original: false,
        }
    }
}

/// Distribution over candidate triggers for one masked context, or for a
/// pooled support set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerPosterior {
    pub candidates: Vec<CandidateTrigger>,
    pub weights: Vec<f64>,
    pub lambda: f64,
}

impl TriggerPosterior {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `(surface, weight)` pairs with positive weight.
    pub fn support(&self) -> impl Iterator<Item = (&[String], f64)> {
        self.candidates
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(c, w)| (c.surface.as_slice(), *w))
    }
}

pub fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidConfig(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    Ok(())
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

fn check_predicted(predicted: &[CandidateTrigger], originals: &HashSet<&[String]>) -> Result<()> {
    let mut seen: HashSet<&[String]> = HashSet::new();
    for c in predicted {
        if c.is_original {
            return Err(Error::InvalidPosterior("predicted candidate flagged as original".into()));
        }
        if c.surface.len() != 1 {
            return Err(Error::InvalidPosterior(format!(
                "predicted candidate `{}` is not a single token",
                c.surface.join(" ")
            )));
        }
        if !c.logit.is_finite() {
            return Err(Error::InvalidPosterior(format!("non-finite logit for `{}`", c.surface[0])));
        }
        if originals.contains(c.surface.as_slice()) || !seen.insert(&c.surface) {
            return Err(Error::InvalidPosterior(format!("duplicate surface `{}`", c.surface[0])));
        }
    }
    Ok(())
}

/// `λ` on the original, `(1−λ)·softmax(logits)` on the predicted candidates.
/// With no predicted candidates the posterior is a point mass on the original.
pub fn trigger_posterior(
    original: &CandidateTrigger,
    predicted: &[CandidateTrigger],
    lambda: f64,
) -> Result<TriggerPosterior> {
    check_lambda(lambda)?;
    if !original.is_original || original.surface.is_empty() {
        return Err(Error::InvalidPosterior("original candidate must be flagged and non-empty".into()));
    }
    let originals: HashSet<&[String]> = [original.surface.as_slice()].into_iter().collect();
    check_predicted(predicted, &originals)?;
    let mut candidates = vec![original.clone()];
    let mut weights = vec![if predicted.is_empty() { 1.0 } else { lambda }];
    if !predicted.is_empty() {
        let logits: Vec<f64> = predicted.iter().map(|c| c.logit).collect();
        for (c, p) in predicted.iter().zip(softmax(&logits)) {
            candidates.push(c.clone());
            weights.push((1.0 - lambda) * p);
        }
    }
    Ok(TriggerPosterior {
        candidates,
        weights,
        lambda,
    })
}

/// Shared posterior over the union of a support set's candidates.
///
/// Original surfaces share `λ` in proportion to how many contexts carry them.
/// Predicted surfaces take the mean of their logits over the contexts that
/// predicted them and share `1−λ` by softmax; a predicted surface equal to any
/// original is dropped.
pub fn pooled_posterior(
    originals: &[Vec<String>],
    predicted: &[Vec<CandidateTrigger>],
    lambda: f64,
) -> Result<TriggerPosterior> {
    check_lambda(lambda)?;
    if originals.is_empty() || originals.len() != predicted.len() {
        return Err(Error::CountMismatch(format!(
            "{} originals for {} candidate lists",
            originals.len(),
            predicted.len()
        )));
    }
    let mut orig_count: Vec<(Vec<String>, usize)> = Vec::new();
    for o in originals {
        if o.is_empty() {
            return Err(Error::InvalidPosterior("empty original trigger".into()));
        }
        match orig_count.iter_mut().find(|(s, _)| s == o) {
            Some((_, n)) => *n += 1,
            None => orig_count.push((o.clone(), 1)),
        }
    }
    let orig_set: HashSet<&[String]> = originals.iter().map(Vec::as_slice).collect();
    let mut pooled: BTreeMap<&[String], (f64, usize, usize)> = BTreeMap::new();
    let mut order = 0usize;
    for list in predicted {
        check_predicted(list, &HashSet::new())?;
        for c in list {
            if orig_set.contains(c.surface.as_slice()) {
                continue;
            }
            let e = pooled.entry(c.surface.as_slice()).or_insert((0.0, 0, order));
            if e.1 == 0 {
                order += 1;
            }
            e.0 += c.logit;
            e.1 += 1;
        }
    }
    let mut union: Vec<(&[String], f64, usize)> = pooled.into_iter().map(|(s, (sum, n, o))| (s, sum / n as f64, o)).collect();
    union.sort_by_key(|u| u.2);

    let k = originals.len() as f64;
    let orig_mass = if union.is_empty() { 1.0 } else { lambda };
    let mut candidates = Vec::new();
    let mut weights = Vec::new();
    for (s, n) in orig_count {
        candidates.push(CandidateTrigger::original(s));
        weights.push(orig_mass * n as f64 / k);
    }
    let logits: Vec<f64> = union.iter().map(|u| u.1).collect();
    for ((s, l, _), p) in union.iter().zip(softmax(&logits)) {
        candidates.push(CandidateTrigger {
            surface: s.to_vec(),
            logit: *l,
            is_original: false,
        });
        weights.push((1.0 - lambda) * p);
    }
    Ok(TriggerPosterior {
        candidates,
        weights,
        lambda,
    })
}
