//! Brute-force interventional loss `−Σ_q f(Σ_t Σ_s φ(s,q)·P(s|𝒞,t)·P(t|e))`.

use serde::{Deserialize, Serialize};

use super::expand::WeightedInstance;
use crate::error::{Error, Result};
use crate::fewshot::encoder::encode;
use crate::fewshot::params::ModelParams;
use crate::fewshot::similarity::{similarity, SimilarityKind};

pub const ENUMERATION_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Link {
    Identity,
    Square,
}

impl Link {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Link::Identity => x,
            Link::Square => x * x,
        }
    }
}

/// `φ(s,q)`: Euclidean distance for the prototypical head, the relation score otherwise.
pub fn phi(kind: SimilarityKind, params: &ModelParams, r: &[f64], q: &[f64]) -> Result<f64> {
    match kind {
        SimilarityKind::PrototypicalNegSqEuclid => {
            if r.len() != q.len() {
                return Err(Error::DimensionMismatch("φ inputs differ in width".into()));
            }
            Ok(r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        }
        SimilarityKind::RelationFFN => similarity(kind, params, r, q),
    }
}

/// The reference loss over precomputed trigger representations with weights.
pub fn reference_loss_from_reps(
    kind: SimilarityKind,
    params: &ModelParams,
    weighted_reps: &[(Vec<f64>, f64)],
    query_reps: &[Vec<f64>],
    link: Link,
) -> Result<f64> {
    if weighted_reps.len() > ENUMERATION_LIMIT {
        return Err(Error::EnumerationBound(weighted_reps.len(), ENUMERATION_LIMIT));
    }
    let mut total = 0.0;
    for q in query_reps {
        let mut inner = 0.0;
        for (r, w) in weighted_reps {
            inner += w * phi(kind, params, r, q)?;
        }
        total -= link.apply(inner);
    }
    Ok(total)
}

/// Mean representation over `tokens[span]`.
fn span_mean(reps: &[Vec<f64>], span: (usize, usize)) -> Vec<f64> {
    let n = (span.1 - span.0) as f64;
    let mut out = vec![0.0; reps[0].len()];
    for r in &reps[span.0..span.1] {
        for (o, x) in out.iter_mut().zip(r) {
            *o += x;
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Reference loss over every token of every query, with `R_trigger(s)` the
/// mean representation of the substituted trigger span.
pub fn reference_interventional_loss(
    kind: SimilarityKind,
    params: &ModelParams,
    weighted: &[WeightedInstance],
    queries: &[Vec<String>],
    link: Link,
) -> Result<f64> {
    if weighted.len() > ENUMERATION_LIMIT {
        return Err(Error::EnumerationBound(weighted.len(), ENUMERATION_LIMIT));
    }
    let weighted_reps: Vec<(Vec<f64>, f64)> = weighted
        .iter()
        .map(|w| (span_mean(&encode(params, &w.tokens), w.trigger), w.weight))
        .collect();
    let query_reps: Vec<Vec<f64>> = queries.iter().flat_map(|q| encode(params, q)).collect();
    reference_loss_from_reps(kind, params, &weighted_reps, &query_reps, link)
}
