//! Turning a support set and queries into an encoder-ready episode.

use super::expand::{expand_instances, CandidateMode, InterventionConfig};
use super::mask::mask_trigger;
use super::posterior::{pooled_posterior, trigger_posterior, CandidateTrigger};
use super::query::query_mixing;
use crate::episodes::data::EventInstance;
use crate::error::{Error, Result};
use crate::fewshot::model::{PreparedEpisode, PreparedQuery, WeightedSentence};
use crate::fewshot::params::{ModelParams, ParamTensors};
use crate::fewshot::similarity::SimilarityKind;
use crate::fewshot::vocab::Vocab;
use crate::predictor::CandidateSource;

fn predicted_for(
    source: &dyn CandidateSource,
    ctx: &super::mask::MaskedContext,
    top_n: usize,
) -> Result<Vec<CandidateTrigger>> {
    if top_n == 0 {
        Ok(Vec::new())
    } else {
        source.candidates(ctx, top_n)
    }
}

/// Support sentences with prototype weights.
///
/// Without support-side intervention each instance weighs `1/K`. With it,
/// each instance holding exactly one trigger of `event_type` is expanded over
/// its candidate posterior at `(1/K)·P(t|e)`; other instances stay as they
/// are at `1/K`.
pub fn prepare_support(
    vocab: &Vocab,
    event_type: &str,
    support: &[EventInstance],
    source: &dyn CandidateSource,
    config: &InterventionConfig,
) -> Result<Vec<WeightedSentence>> {
    config.validate()?;
    if support.is_empty() {
        return Err(Error::DegenerateSupport("empty support".into()));
    }
    let k = support.len() as f64;
    let fixed = |inst: &EventInstance| WeightedSentence {
        ids: vocab.ids(&inst.tokens),
        labels: inst.labels_for(event_type),
        weight: 1.0 / k,
    };
    if !config.side.support() {
        return Ok(support.iter().map(fixed).collect());
    }
    let contexts: Vec<Option<super::mask::MaskedContext>> =
        support.iter().map(|i| mask_trigger(i, event_type).ok()).collect();
    let posteriors = match config.candidate_mode {
        CandidateMode::PerInstance => contexts
            .iter()
            .map(|c| match c {
                Some(c) => {
                    let predicted = predicted_for(source, c, config.top_n)?;
                    let original = CandidateTrigger::original(c.original_trigger.clone());
                    trigger_posterior(&original, &predicted, config.lambda).map(Some)
                }
                None => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?,
        CandidateMode::PooledUnion => {
            let live: Vec<&super::mask::MaskedContext> = contexts.iter().flatten().collect();
            if live.is_empty() {
                vec![None; contexts.len()]
            } else {
                let originals: Vec<Vec<String>> = live.iter().map(|c| c.original_trigger.clone()).collect();
                let predicted = live
                    .iter()
                    .map(|c| predicted_for(source, c, config.top_n))
                    .collect::<Result<Vec<_>>>()?;
                let pooled = pooled_posterior(&originals, &predicted, config.lambda)?;
                contexts.iter().map(|c| c.as_ref().map(|_| pooled.clone())).collect()
            }
        }
    };
    let mut out = Vec::new();
    for ((inst, ctx), post) in support.iter().zip(&contexts).zip(posteriors) {
        match (ctx, post) {
            (Some(ctx), Some(post)) => {
                let expanded = expand_instances(std::slice::from_ref(ctx), &[post], CandidateMode::PerInstance)?;
                out.extend(expanded.into_iter().map(|w| WeightedSentence {
                    ids: vocab.ids(&w.tokens),
                    labels: w.labels(),
                    weight: w.weight / k,
                }));
            }
            _ => out.push(fixed(inst)),
        }
    }
    Ok(out)
}

/// A query in id space, mixed over candidate substitutions when the
/// intervention covers the query side.
pub fn prepare_query(
    vocab: &Vocab,
    event_type: &str,
    query: &EventInstance,
    source: &dyn CandidateSource,
    config: &InterventionConfig,
) -> Result<PreparedQuery> {
    let mixing = if config.side.query() {
        Some(query_mixing(vocab, &query.id, &query.tokens, source, config)?)
    } else {
        None
    };
    Ok(PreparedQuery {
        ids: vocab.ids(&query.tokens),
        labels: query.labels_for(event_type),
        mixing,
    })
}

pub fn prepare_episode(
    vocab: &Vocab,
    event_type: &str,
    support: &[EventInstance],
    queries: &[EventInstance],
    source: &dyn CandidateSource,
    config: &InterventionConfig,
) -> Result<PreparedEpisode> {
    let support = prepare_support(vocab, event_type, support, source, config)?;
    let queries = queries
        .iter()
        .map(|q| prepare_query(vocab, event_type, q, source, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedEpisode { support, queries })
}

/// Cross-entropy over similarities to adjusted prototypes and/or adjusted query representations.
pub fn surrogate_episode_loss(
    kind: SimilarityKind,
    params: &ModelParams,
    event_type: &str,
    support: &[EventInstance],
    queries: &[EventInstance],
    source: &dyn CandidateSource,
    config: &InterventionConfig,
) -> Result<f64> {
    prepare_episode(&params.vocab, event_type, support, queries, source, config)?.loss(kind, params)
}

/// Loss and gradients of [`surrogate_episode_loss`].
pub fn surrogate_gradients(
    kind: SimilarityKind,
    params: &ModelParams,
    event_type: &str,
    support: &[EventInstance],
    queries: &[EventInstance],
    source: &dyn CandidateSource,
    config: &InterventionConfig,
) -> Result<(f64, ParamTensors)> {
    prepare_episode(&params.vocab, event_type, support, queries, source, config)?.loss_and_gradients(kind, params)
}
