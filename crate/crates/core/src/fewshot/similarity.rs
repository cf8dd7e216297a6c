//! Prototypes, similarity heads and the two-class token classifier.

use serde::{Deserialize, Serialize};

use super::params::{ModelParams, ParamTensors};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SimilarityKind {
    /// `−‖p − q‖²`
    PrototypicalNegSqEuclid,
    /// `F(p ⊕ q ⊕ |p − q|)` with a two-layer ReLU network `F`.
    RelationFFN,
}

/// Class prototypes: `p0` for the negative class, `p1` for the concerned event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
}

impl Prototype {
    pub fn class(&self, k: usize) -> &[f64] {
        if k == 0 {
            &self.p0
        } else {
            &self.p1
        }
    }
}

/// Per-token prototype coefficients for a weighted set of labeled sentences.
///
/// Each token of class `k` in sentence `s` gets `w_s / Σ_s' w_s' n_k(s')`, so
/// the prototype is the pooled mean when all weights are equal.
pub(crate) fn class_coefficients(groups: &[(&[u8], f64)]) -> Result<[Vec<Vec<f64>>; 2]> {
    let mut norm = [0.0f64; 2];
    for (labels, w) in groups {
        for &l in *labels {
            norm[(l != 0) as usize] += w;
        }
    }
    for (k, z) in norm.iter().enumerate() {
        if *z <= 0.0 {
            return Err(Error::DegenerateSupport(format!("no support tokens labeled {k}")));
        }
    }
    let mut out: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
    for (labels, w) in groups {
        for (k, coeffs) in out.iter_mut().enumerate() {
            coeffs.push(
                labels
                    .iter()
                    .map(|&l| if (l != 0) as usize == k { w / norm[k] } else { 0.0 })
                    .collect(),
            );
        }
    }
    Ok(out)
}

/// Prototypes from sentences carrying instance weights.
pub fn weighted_prototypes(groups: &[(&[Vec<f64>], &[u8], f64)]) -> Result<Prototype> {
    let dim = groups
        .iter()
        .flat_map(|(reps, _, _)| reps.iter())
        .map(Vec::len)
        .next()
        .ok_or_else(|| Error::DegenerateSupport("empty support".into()))?;
    for (reps, labels, _) in groups {
        if reps.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} representations for {} labels",
                reps.len(),
                labels.len()
            )));
        }
        if reps.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("representations differ in width".into()));
        }
    }
    let label_groups: Vec<(&[u8], f64)> = groups.iter().map(|(_, l, w)| (*l, *w)).collect();
    let coeffs = class_coefficients(&label_groups)?;
    let mut protos = [vec![0.0; dim], vec![0.0; dim]];
    for (k, proto) in protos.iter_mut().enumerate() {
        for ((reps, _, _), cs) in groups.iter().zip(&coeffs[k]) {
            for (r, &c) in reps.iter().zip(cs) {
                if c != 0.0 {
                    for (p, x) in proto.iter_mut().zip(r) {
                        *p += c * x;
                    }
                }
            }
        }
    }
    let [p0, p1] = protos;
    Ok(Prototype { p0, p1 })
}

/// Class means over the support set: `p_i` is the mean of all token
/// representations labeled `i`.
pub fn prototypes(reps: &[Vec<Vec<f64>>], labels: &[Vec<u8>]) -> Result<Prototype> {
    if reps.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sentences of representations, {} of labels",
            reps.len(),
            labels.len()
        )));
    }
    let w = 1.0 / reps.len().max(1) as f64;
    let groups: Vec<(&[Vec<f64>], &[u8], f64)> = reps
        .iter()
        .zip(labels)
        .map(|(r, l)| (r.as_slice(), l.as_slice(), w))
        .collect();
    weighted_prototypes(&groups)
}

/// Intermediate values of the relation head, kept for backprop.
pub(crate) struct RelationCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
}

fn relation_forward(params: &ModelParams, p: &[f64], q: &[f64]) -> (f64, RelationCache) {
    let t = &params.tensors;
    let mut input = Vec::with_capacity(3 * p.len());
    input.extend_from_slice(p);
    input.extend_from_slice(q);
    input.extend(p.iter().zip(q).map(|(a, b)| (a - b).abs()));
    let mut pre = t.rel_b1.data.clone();
    t.rel_w1.accumulate_vec_mat(&input, &mut pre);
    let hidden: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
    let mut out = t.rel_b2.data[0];
    for (h, w) in hidden.iter().zip(&t.rel_w2.data) {
        out += h * w;
    }
    (out, RelationCache { input, pre, hidden })
}

fn check_dims(params: &ModelParams, p: &[f64], q: &[f64]) -> Result<()> {
    let d = params.dims.d_rep;
    if p.len() != d || q.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "similarity inputs of width {} and {}, expected {d}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// Similarity between a prototype and a query representation; larger is closer.
pub fn similarity(kind: SimilarityKind, params: &ModelParams, p: &[f64], q: &[f64]) -> Result<f64> {
    check_dims(params, p, q)?;
    Ok(similarity_unchecked(kind, params, p, q))
}

pub(crate) fn similarity_unchecked(kind: SimilarityKind, params: &ModelParams, p: &[f64], q: &[f64]) -> f64 {
    match kind {
        SimilarityKind::PrototypicalNegSqEuclid => -p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
        SimilarityKind::RelationFFN => relation_forward(params, p, q).0,
    }
}

/// Backprop of `d_score` through the similarity: accumulates head gradients
/// into `grads` and adds the input gradients to `dp` and `dq`.
pub(crate) fn similarity_backward(
    kind: SimilarityKind,
    params: &ModelParams,
    p: &[f64],
    q: &[f64],
    d_score: f64,
    grads: &mut ParamTensors,
    dp: &mut [f64],
    dq: &mut [f64],
) {
    match kind {
        SimilarityKind::PrototypicalNegSqEuclid => {
            for i in 0..p.len() {
                let g = -2.0 * (p[i] - q[i]) * d_score;
                dp[i] += g;
                dq[i] -= g;
            }
        }
        SimilarityKind::RelationFFN => {
            let (_, cache) = relation_forward(params, p, q);
            let t = &params.tensors;
            grads.rel_b2.data[0] += d_score;
            for (g, h) in grads.rel_w2.data.iter_mut().zip(&cache.hidden) {
                *g += h * d_score;
            }
            let d_pre: Vec<f64> = t
                .rel_w2
                .data
                .iter()
                .zip(&cache.pre)
                .map(|(w, a)| if *a > 0.0 { w * d_score } else { 0.0 })
                .collect();
            for (g, d) in grads.rel_b1.data.iter_mut().zip(&d_pre) {
                *g += d;
            }
            grads.rel_w1.add_outer(&cache.input, &d_pre);
            let d_in = t.rel_w1.mat_vec(&d_pre);
            let n = p.len();
            for i in 0..n {
                let diff = p[i] - q[i];
                let sign = if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                let d_abs = d_in[2 * n + i] * sign;
                dp[i] += d_in[i] + d_abs;
                dq[i] += d_in[n + i] - d_abs;
            }
        }
    }
}

/// Softmax over the two class scores.
pub fn classify_token(s0: f64, s1: f64) -> [f64; 2] {
    let m = s0.max(s1);
    let e0 = (s0 - m).exp();
    let e1 = (s1 - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

/// `log softmax` of the two scores.
pub(crate) fn log_probs(s0: f64, s1: f64) -> [f64; 2] {
    let m = s0.max(s1);
    let lse = m + ((s0 - m).exp() + (s1 - m).exp()).ln();
    [s0 - lse, s1 - lse]
}

/// Class 1 wins ties.
pub fn predict_label(s0: f64, s1: f64) -> u8 {
    (classify_token(s0, s1)[1] >= 0.5) as u8
}
