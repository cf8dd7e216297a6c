//! Episode forward pass, cross-entropy loss, reverse-mode gradients and tagging.

use serde::{Deserialize, Serialize};

use super::encoder::{backward_window, encode_window, window_ids, window_ids_with_center};
use super::params::{ModelParams, ParamTensors};
use super::similarity::{
    class_coefficients, log_probs, predict_label, similarity_backward, similarity_unchecked, Prototype, SimilarityKind,
};
use crate::error::{Error, Result};

/// Tokens with optional binary labels (1 = trigger of the concerned event).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub labels: Option<Vec<u8>>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>, labels: Option<Vec<u8>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != tokens.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} tokens",
                    l.len(),
                    tokens.len()
                )));
            }
            if l.iter().any(|&x| x > 1) {
                return Err(Error::DimensionMismatch("labels must be 0 or 1".into()));
            }
        }
        Ok(TokenSequence { tokens, labels })
    }

    pub fn unlabeled(tokens: Vec<String>) -> Self {
        TokenSequence { tokens, labels: None }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// A support sentence in id space with its share of the prototype mass.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSentence {
    pub ids: Vec<usize>,
    pub labels: Vec<u8>,
    pub weight: f64,
}

/// Per-position mixture of centre tokens: `(token id, weight)`.
pub type PositionMix = Vec<(usize, f64)>;

/// A query sentence in id space. With `mixing`, the representation at each
/// position is the weighted mean over the listed centre substitutions.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedQuery {
    pub ids: Vec<usize>,
    pub labels: Vec<u8>,
    pub mixing: Option<Vec<PositionMix>>,
}

impl PreparedQuery {
    pub fn plain(ids: Vec<usize>, labels: Vec<u8>) -> Self {
        PreparedQuery { ids, labels, mixing: None }
    }

    fn check(&self) -> Result<()> {
        if self.labels.len() != self.ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "query has {} labels for {} tokens",
                self.labels.len(),
                self.ids.len()
            )));
        }
        if let Some(m) = &self.mixing {
            if m.len() != self.ids.len() {
                return Err(Error::DimensionMismatch(format!(
                    "query mixing covers {} of {} positions",
                    m.len(),
                    self.ids.len()
                )));
            }
            if m.iter().any(|mix| mix.is_empty()) {
                return Err(Error::DimensionMismatch("empty query mixture".into()));
            }
        }
        Ok(())
    }
}

/// Support and queries ready for the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedEpisode {
    pub support: Vec<WeightedSentence>,
    pub queries: Vec<PreparedQuery>,
}

/// Window ids feeding every term of a query position.
fn position_windows(ids: &[usize], j: usize, window: usize, mix: Option<&PositionMix>) -> Vec<(Vec<usize>, f64)> {
    match mix {
        None => vec![(window_ids(ids, j, window), 1.0)],
        Some(m) => m
            .iter()
            .map(|&(c, w)| (window_ids_with_center(ids, j, window, c), w))
            .collect(),
    }
}

fn mix_hidden(terms: &[(Vec<usize>, f64, Vec<f64>)]) -> Vec<f64> {
    if let [(_, w, h)] = terms {
        if *w == 1.0 {
            return h.clone();
        }
    }
    let mut rep = vec![0.0; terms[0].2.len()];
    for (_, w, h) in terms {
        for (r, x) in rep.iter_mut().zip(h) {
            *r += w * x;
        }
    }
    rep
}

/// Representation at one query position, optionally mixed over centre substitutions.
pub fn position_rep(params: &ModelParams, ids: &[usize], j: usize, mix: Option<&PositionMix>) -> Vec<f64> {
    let terms: Vec<(Vec<usize>, f64, Vec<f64>)> = position_windows(ids, j, params.dims.window, mix)
        .into_iter()
        .map(|(win, w)| {
            let h = encode_window(params, &win);
            (win, w, h)
        })
        .collect();
    mix_hidden(&terms)
}

/// Representations of every position of a query.
pub fn query_reps(params: &ModelParams, query: &PreparedQuery) -> Vec<Vec<f64>> {
    (0..query.ids.len())
        .map(|j| position_rep(params, &query.ids, j, query.mixing.as_ref().map(|m| &m[j])))
        .collect()
}

/// Prototypes of a weighted support set. Each class token contributes
/// `w_s / Σ w n_k`, so equal weights give the plain class means.
pub fn support_prototype(params: &ModelParams, support: &[WeightedSentence]) -> Result<Prototype> {
    let reps: Vec<Vec<Vec<f64>>> = support
        .iter()
        .map(|s| super::encoder::encode_ids(params, &s.ids))
        .collect();
    let groups: Vec<(&[Vec<f64>], &[u8], f64)> = support
        .iter()
        .zip(&reps)
        .map(|(s, r)| (r.as_slice(), s.labels.as_slice(), s.weight))
        .collect();
    super::similarity::weighted_prototypes(&groups)
}

/// Mean cross-entropy over all query tokens given fixed prototypes and query representations.
pub fn episode_loss(
    kind: SimilarityKind,
    params: &ModelParams,
    proto: &Prototype,
    reps: &[Vec<Vec<f64>>],
    labels: &[Vec<u8>],
) -> Result<f64> {
    if reps.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} queries with {} label lists",
            reps.len(),
            labels.len()
        )));
    }
    let d = params.dims.d_rep;
    if proto.p0.len() != d || proto.p1.len() != d {
        return Err(Error::DimensionMismatch("prototype width differs from d_rep".into()));
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for (qr, ql) in reps.iter().zip(labels) {
        if qr.len() != ql.len() {
            return Err(Error::DimensionMismatch("query representations and labels differ in length".into()));
        }
        for (q, &y) in qr.iter().zip(ql) {
            if q.len() != d {
                return Err(Error::DimensionMismatch("query representation width differs from d_rep".into()));
            }
            let s0 = similarity_unchecked(kind, params, &proto.p0, q);
            let s1 = similarity_unchecked(kind, params, &proto.p1, q);
            total -= log_probs(s0, s1)[y as usize];
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::DimensionMismatch("episode has no query tokens".into()));
    }
    let loss = total / n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok(loss)
}

/// Binary tags for one query given prototypes and its representations.
pub fn predict_tags(kind: SimilarityKind, params: &ModelParams, proto: &Prototype, reps: &[Vec<f64>]) -> Vec<u8> {
    reps.iter()
        .map(|q| {
            predict_label(
                similarity_unchecked(kind, params, &proto.p0, q),
                similarity_unchecked(kind, params, &proto.p1, q),
            )
        })
        .collect()
}

struct QueryTape {
    /// Per position: the windows mixed into its representation.
    terms: Vec<Vec<(Vec<usize>, f64, Vec<f64>)>>,
    reps: Vec<Vec<f64>>,
}

struct Tape {
    support_windows: Vec<Vec<Vec<usize>>>,
    support_hidden: Vec<Vec<Vec<f64>>>,
    coeffs: [Vec<Vec<f64>>; 2],
    proto: Prototype,
    queries: Vec<QueryTape>,
}

impl PreparedEpisode {
    fn forward(&self, params: &ModelParams) -> Result<Tape> {
        if self.support.is_empty() {
            return Err(Error::DegenerateSupport("empty support".into()));
        }
        for s in &self.support {
            if s.labels.len() != s.ids.len() {
                return Err(Error::DimensionMismatch(format!(
                    "support sentence has {} labels for {} tokens",
                    s.labels.len(),
                    s.ids.len()
                )));
            }
        }
        for q in &self.queries {
            q.check()?;
        }
        let w = params.dims.window;
        let support_windows: Vec<Vec<Vec<usize>>> = self
            .support
            .iter()
            .map(|s| (0..s.ids.len()).map(|j| window_ids(&s.ids, j, w)).collect())
            .collect();
        let support_hidden: Vec<Vec<Vec<f64>>> = support_windows
            .iter()
            .map(|ws| ws.iter().map(|win| encode_window(params, win)).collect())
            .collect();
        let label_groups: Vec<(&[u8], f64)> = self.support.iter().map(|s| (s.labels.as_slice(), s.weight)).collect();
        let coeffs = class_coefficients(&label_groups)?;
        let d = params.dims.d_rep;
        let mut protos = [vec![0.0; d], vec![0.0; d]];
        for (k, proto) in protos.iter_mut().enumerate() {
            for (hs, cs) in support_hidden.iter().zip(&coeffs[k]) {
                for (h, &c) in hs.iter().zip(cs) {
                    if c != 0.0 {
                        for (p, x) in proto.iter_mut().zip(h) {
                            *p += c * x;
                        }
                    }
                }
            }
        }
        let [p0, p1] = protos;
        let queries = self
            .queries
            .iter()
            .map(|q| {
                let terms: Vec<Vec<(Vec<usize>, f64, Vec<f64>)>> = (0..q.ids.len())
                    .map(|j| {
                        position_windows(&q.ids, j, w, q.mixing.as_ref().map(|m| &m[j]))
                            .into_iter()
                            .map(|(win, wt)| {
                                let h = encode_window(params, &win);
                                (win, wt, h)
                            })
                            .collect()
                    })
                    .collect();
                let reps = terms.iter().map(|t| mix_hidden(t)).collect();
                QueryTape { terms, reps }
            })
            .collect();
        Ok(Tape {
            support_windows,
            support_hidden,
            coeffs,
            proto: Prototype { p0, p1 },
            queries,
        })
    }

    /// Prototypes of the (possibly weighted) support set.
    pub fn prototype(&self, params: &ModelParams) -> Result<Prototype> {
        support_prototype(params, &self.support)
    }

    pub fn loss(&self, kind: SimilarityKind, params: &ModelParams) -> Result<f64> {
        let tape = self.forward(params)?;
        let reps: Vec<Vec<Vec<f64>>> = tape.queries.into_iter().map(|q| q.reps).collect();
        let labels: Vec<Vec<u8>> = self.queries.iter().map(|q| q.labels.clone()).collect();
        episode_loss(kind, params, &tape.proto, &reps, &labels)
    }

    /// Loss and exact gradients with respect to every parameter tensor.
    pub fn loss_and_gradients(&self, kind: SimilarityKind, params: &ModelParams) -> Result<(f64, ParamTensors)> {
        let tape = self.forward(params)?;
        let n_tokens: usize = self.queries.iter().map(|q| q.ids.len()).sum();
        if n_tokens == 0 {
            return Err(Error::DimensionMismatch("episode has no query tokens".into()));
        }
        let scale = 1.0 / n_tokens as f64;
        let d = params.dims.d_rep;
        let mut grads = params.tensors.zeros_like();
        let mut dp = [vec![0.0; d], vec![0.0; d]];
        let mut total = 0.0;
        for (q, qt) in self.queries.iter().zip(&tape.queries) {
            for (j, rep) in qt.reps.iter().enumerate() {
                let y = q.labels[j] as usize;
                let s0 = similarity_unchecked(kind, params, &tape.proto.p0, rep);
                let s1 = similarity_unchecked(kind, params, &tape.proto.p1, rep);
                let lp = log_probs(s0, s1);
                total -= lp[y];
                let mut dq = vec![0.0; d];
                for k in 0..2 {
                    let d_score = (lp[k].exp() - (k == y) as u8 as f64) * scale;
                    let p = tape.proto.class(k);
                    similarity_backward(kind, params, p, rep, d_score, &mut grads, &mut dp[k], &mut dq);
                }
                for (win, wt, h) in &qt.terms[j] {
                    let dh: Vec<f64> = dq.iter().map(|g| g * wt).collect();
                    backward_window(params, win, h, &dh, &mut grads);
                }
            }
        }
        for (s, (wins, hs)) in tape.support_windows.iter().zip(&tape.support_hidden).enumerate() {
            for (j, (win, h)) in wins.iter().zip(hs).enumerate() {
                let c0 = tape.coeffs[0][s][j];
                let c1 = tape.coeffs[1][s][j];
                if c0 == 0.0 && c1 == 0.0 {
                    continue;
                }
                let dh: Vec<f64> = dp[0].iter().zip(&dp[1]).map(|(a, b)| c0 * a + c1 * b).collect();
                backward_window(params, win, h, &dh, &mut grads);
            }
        }
        let loss = total / n_tokens as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        if let Some(name) = grads.first_non_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        Ok((loss, grads))
    }

    /// Predicted tags for every query.
    pub fn predict(&self, kind: SimilarityKind, params: &ModelParams) -> Result<Vec<Vec<u8>>> {
        let proto = self.prototype(params)?;
        Ok(self
            .queries
            .iter()
            .map(|q| predict_tags(kind, params, &proto, &query_reps(params, q)))
            .collect())
    }
}
