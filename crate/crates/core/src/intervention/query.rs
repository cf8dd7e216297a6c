use super::expand::InterventionConfig;
use super::mask::mask_position;
use super::posterior::{trigger_posterior, CandidateTrigger};
use crate::error::{Error, Result};
use crate::fewshot::model::{position_rep, PositionMix, TokenSequence};
use crate::fewshot::params::ModelParams;
use crate::fewshot::vocab::Vocab;
use crate::predictor::CandidateSource;

/// Centre-token mixture for one query position: the original token keeps
/// `λ`, predicted fillers share the rest.
pub fn position_mix(
    vocab: &Vocab,
    source_id: &str,
    tokens: &[String],
    position: usize,
    source: &dyn CandidateSource,
    config: &InterventionConfig,
) -> Result<PositionMix> {
    let ctx = mask_position(source_id, tokens, position)?;
    let predicted = if config.top_n == 0 {
        Vec::new()
    } else {
        source.candidates(&ctx, config.top_n)?
    };
    let original = CandidateTrigger::original(ctx.original_trigger.clone());
    let post = trigger_posterior(&original, &predicted, config.lambda)?;
    Ok(post.support().map(|(s, w)| (vocab.id(&s[0]), w)).collect())
}

/// Mixtures for every position of a query sentence.
pub fn query_mixing(
    vocab: &Vocab,
    source_id: &str,
    tokens: &[String],
    source: &dyn CandidateSource,
    config: &InterventionConfig,
) -> Result<Vec<PositionMix>> {
    (0..tokens.len())
        .map(|j| position_mix(vocab, source_id, tokens, j, source, config))
        .collect()
}

/// Posterior-weighted mean of the representation at `position` over
/// substitutions of the token there.
pub fn query_side_adjust(
    params: &ModelParams,
    query: &TokenSequence,
    position: usize,
    source: &dyn CandidateSource,
    config: &InterventionConfig,
) -> Result<Vec<f64>> {
    if !config.side.query() {
        return Err(Error::InvalidConfig(format!(
            "query-side adjustment requested with side {:?}",
            config.side
        )));
    }
    if position >= query.len() {
        return Err(Error::PositionOutOfRange(position, query.len()));
    }
    let mix = position_mix(&params.vocab, "query", &query.tokens, position, source, config)?;
    let ids = params.vocab.ids(&query.tokens);
    Ok(position_rep(params, &ids, position, Some(&mix)))
}
