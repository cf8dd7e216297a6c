//! One-way K-shot episodes and the ambiguity augmentation.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::EventInstance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub event_type: String,
    pub support: Vec<EventInstance>,
    pub queries: Vec<EventInstance>,
}

impl Episode {
    pub fn query_labels(&self) -> Vec<Vec<u8>> {
        self.queries.iter().map(|q| q.labels_for(&self.event_type)).collect()
    }

    /// Every distinct trigger surface of the concerned type in the support set.
    pub fn support_triggers(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = Vec::new();
        for s in &self.support {
            for t in s.trigger_surfaces(&self.event_type) {
                if !out.contains(&t) {
                    out.push(t);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeShape {
    pub k: usize,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl EpisodeShape {
    pub const TRAIN: EpisodeShape = EpisodeShape { k: 5, n_pos: 2, n_neg: 10 };
    pub const VALID: EpisodeShape = EpisodeShape { k: 5, n_pos: 10, n_neg: 100 };

    pub fn with_k(self, k: usize) -> Self {
        EpisodeShape { k, ..self }
    }
}

fn pick<'a, R: Rng + ?Sized>(rng: &mut R, from: &[&'a EventInstance], n: usize) -> Vec<&'a EventInstance> {
    sample(rng, from.len(), n).into_iter().map(|i| from[i]).collect()
}

/// K support instances, `n_pos` positive and `n_neg` negative queries.
pub fn sample_train_episode<R: Rng + ?Sized>(
    pool: &[EventInstance],
    event_type: &str,
    shape: EpisodeShape,
    rng: &mut R,
) -> Result<Episode> {
    let pos: Vec<&EventInstance> = pool.iter().filter(|i| i.has_type(event_type)).collect();
    let neg: Vec<&EventInstance> = pool.iter().filter(|i| !i.has_type(event_type)).collect();
    if pos.len() < shape.k + shape.n_pos {
        return Err(Error::Insufficient(format!(
            "`{event_type}` has {} instances, need {}",
            pos.len(),
            shape.k + shape.n_pos
        )));
    }
    if neg.len() < shape.n_neg {
        return Err(Error::Insufficient(format!(
            "{} negatives for `{event_type}`, need {}",
            neg.len(),
            shape.n_neg
        )));
    }
    let chosen = pick(rng, &pos, shape.k + shape.n_pos);
    let support: Vec<EventInstance> = chosen[..shape.k].iter().map(|i| (*i).clone()).collect();
    let mut queries: Vec<EventInstance> = chosen[shape.k..].iter().map(|i| (*i).clone()).collect();
    queries.extend(pick(rng, &neg, shape.n_neg).into_iter().cloned());
    Ok(Episode {
        event_type: event_type.to_string(),
        support,
        queries,
    })
}

fn contains_surface(tokens: &[String], surface: &[String]) -> bool {
    !surface.is_empty() && tokens.windows(surface.len()).any(|w| w == surface)
}

/// Pool instances that contain a support trigger surface, carry no trigger of
/// the episode's type and are not already in the episode.
pub fn ambiguous_candidates<'a>(pool: &'a [EventInstance], episode: &Episode) -> Vec<&'a EventInstance> {
    let surfaces = episode.support_triggers();
    let taken: HashSet<&str> = episode
        .support
        .iter()
        .chain(&episode.queries)
        .map(|i| i.id.as_str())
        .collect();
    pool.iter()
        .filter(|i| !taken.contains(i.id.as_str()))
        .filter(|i| !i.has_type(&episode.event_type))
        .filter(|i| surfaces.iter().any(|s| contains_surface(&i.tokens, s)))
        .collect()
}

/// Appends `n` ambiguous negatives drawn without replacement.
pub fn sample_ambiguous_negatives<R: Rng + ?Sized>(
    pool: &[EventInstance],
    episode: &Episode,
    n: usize,
    rng: &mut R,
) -> Result<Episode> {
    let mut out = episode.clone();
    if n == 0 {
        return Ok(out);
    }
    let eligible = ambiguous_candidates(pool, episode);
    if eligible.len() < n {
        return Err(Error::Insufficient(format!(
            "found {} ambiguous instances for `{}`, need {n}",
            eligible.len(),
            episode.event_type
        )));
    }
    out.queries.extend(pick(rng, &eligible, n).into_iter().cloned());
    Ok(out)
}
