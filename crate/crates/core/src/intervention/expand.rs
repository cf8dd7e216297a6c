use serde::{Deserialize, Serialize};

use super::mask::MaskedContext;
use super::posterior::{check_lambda, TriggerPosterior};
use crate::error::{Error, Result};
use crate::fewshot::model::{support_prototype, WeightedSentence};
use crate::fewshot::params::ModelParams;
use crate::fewshot::similarity::Prototype;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    None,
    Support,
    Query,
    Both,
}

impl Side {
    pub fn support(self) -> bool {
        matches!(self, Side::Support | Side::Both)
    }

    pub fn query(self) -> bool {
        matches!(self, Side::Query | Side::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateMode {
    PerInstance,
    PooledUnion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterventionConfig {
    pub lambda: f64,
    pub top_n: usize,
    pub side: Side,
    pub candidate_mode: CandidateMode,
}

impl Default for InterventionConfig {
    fn default() -> Self {
        InterventionConfig {
            lambda: 0.5,
            top_n: 10,
            side: Side::Support,
            candidate_mode: CandidateMode::PerInstance,
        }
    }
}

impl InterventionConfig {
    pub fn none() -> Self {
        InterventionConfig {
            side: Side::None,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)
    }
}

/// A context with one candidate substituted at the mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedInstance {
    pub tokens: Vec<String>,
    pub trigger: (usize, usize),
    pub weight: f64,
}

impl WeightedInstance {
    pub fn labels(&self) -> Vec<u8> {
        (0..self.tokens.len())
            .map(|i| (i >= self.trigger.0 && i < self.trigger.1) as u8)
            .collect()
    }
}

/// Substituted sentences weighted by `P(s|𝒞,t)·P(t|e)`.
///
/// PerInstance pairs context `k` with its own posterior; PooledUnion pairs
/// every context with every candidate of the single pooled posterior.
/// Zero-weight candidates are skipped.
pub fn expand_instances(
    contexts: &[MaskedContext],
    posteriors: &[TriggerPosterior],
    mode: CandidateMode,
) -> Result<Vec<WeightedInstance>> {
    if contexts.is_empty() {
        return Err(Error::CountMismatch("no contexts to expand".into()));
    }
    let expected = match mode {
        CandidateMode::PerInstance => contexts.len(),
        CandidateMode::PooledUnion => 1,
    };
    if posteriors.len() != expected {
        return Err(Error::CountMismatch(format!(
            "{} posteriors for {} contexts in {mode:?} mode",
            posteriors.len(),
            contexts.len()
        )));
    }
    let k = contexts.len() as f64;
    let mut out = Vec::new();
    for (i, ctx) in contexts.iter().enumerate() {
        let post = match mode {
            CandidateMode::PerInstance => &posteriors[i],
            CandidateMode::PooledUnion => &posteriors[0],
        };
        for (surface, w) in post.support() {
            let (tokens, trigger) = ctx.substitute(surface);
            out.push(WeightedInstance {
                tokens,
                trigger,
                weight: w / k,
            });
        }
    }
    Ok(out)
}

pub(crate) fn check_weight_sum(total: f64, tol: f64) -> Result<()> {
    if (total - 1.0).abs() > tol {
        return Err(Error::WeightSum(total));
    }
    Ok(())
}

/// Prototypes over weighted substituted sentences.
pub fn adjusted_prototypes(params: &ModelParams, weighted: &[WeightedInstance]) -> Result<Prototype> {
    check_weight_sum(weighted.iter().map(|w| w.weight).sum(), 1e-9)?;
    let support = weighted
        .iter()
        .map(|w| {
            if w.trigger.1 - w.trigger.0 >= w.tokens.len() {
                return Err(Error::DegenerateSupport(format!(
                    "substituted sentence `{}` has no non-trigger token",
                    w.tokens.join(" ")
                )));
            }
            Ok(WeightedSentence {
                ids: params.vocab.ids(&w.tokens),
                labels: w.labels(),
                weight: w.weight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    support_prototype(params, &support)
}
