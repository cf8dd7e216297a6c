//! Span prediction with a trained model and the full-test-set protocol.

use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{event_types, EventInstance};
use super::metrics::{match_spans, Counts, EvalReport};
use super::sampling::{ambiguous_candidates, Episode};
use crate::error::{Error, Result};
use crate::fewshot::decode::decode_spans;
use crate::fewshot::model::{predict_tags, query_reps, support_prototype};
use crate::fewshot::params::ModelParams;
use crate::fewshot::similarity::{Prototype, SimilarityKind};
use crate::intervention::{prepare_query, prepare_support, InterventionConfig};
use crate::predictor::CandidateSource;

/// A trained model together with how it is intervened on at inference.
#[derive(Clone, Copy)]
pub struct Detector<'a> {
    pub params: &'a ModelParams,
    pub kind: SimilarityKind,
    pub intervention: InterventionConfig,
    pub source: &'a dyn CandidateSource,
}

impl<'a> Detector<'a> {
    pub fn prototype(&self, event_type: &str, support: &[EventInstance]) -> Result<Prototype> {
        let s = prepare_support(&self.params.vocab, event_type, support, self.source, &self.intervention)?;
        support_prototype(self.params, &s)
    }

    /// Representations of a query; they do not depend on the event type.
    pub fn reps(&self, query: &EventInstance) -> Result<Vec<Vec<f64>>> {
        let q = prepare_query(&self.params.vocab, "", query, self.source, &self.intervention)?;
        Ok(query_reps(self.params, &q))
    }

    pub fn spans(&self, proto: &Prototype, reps: &[Vec<f64>]) -> Vec<(usize, usize)> {
        decode_spans(&predict_tags(self.kind, self.params, proto, reps))
    }

    /// Predicted spans for every query of an episode.
    pub fn predict_episode(&self, episode: &Episode) -> Result<Vec<Vec<(usize, usize)>>> {
        let proto = self.prototype(&episode.event_type, &episode.support)?;
        episode
            .queries
            .iter()
            .map(|q| Ok(self.spans(&proto, &self.reps(q)?)))
            .collect()
    }

    /// Span counts of an episode against its one-way gold.
    pub fn score_episode(&self, episode: &Episode) -> Result<Counts> {
        let preds = self.predict_episode(episode)?;
        let mut c = Counts::default();
        for (q, p) in episode.queries.iter().zip(&preds) {
            c.add(match_spans(p, &q.spans_of(&episode.event_type)));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub workers: usize,
    /// Ambiguous negatives per episode; `None` takes as many as there are
    /// ordinary negatives, capped by how many are eligible.
    pub ambiguous_count: Option<usize>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            k: 5,
            repeats: 4,
            seed: 0,
            workers: 1,
            ambiguous_count: None,
        }
    }
}

/// Generator for one parallel task, derived from the seed and task index.
pub fn task_rng(seed: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task + 1);
    rng
}

struct TaskResult {
    repeat: usize,
    event_type: String,
    counts: Counts,
    n_ambiguous: usize,
}

/// Per-episode bookkeeping of a protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub reports: Vec<EvalReport>,
    /// `(repeat, type, ambiguous negatives added)`.
    pub ambiguous_added: Vec<(usize, String, usize)>,
}

/// For each repeat and test type: K random supports, every other test
/// instance as a query, optionally ambiguous negatives from `ambiguity_pool`.
pub fn test_protocol(
    detector: &Detector,
    test: &[EventInstance],
    ambiguity_pool: Option<&[EventInstance]>,
    config: &ProtocolConfig,
) -> Result<ProtocolRun> {
    if test.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let types = event_types(test);
    for t in &types {
        let n = test.iter().filter(|i| i.has_type(t)).count();
        if n <= config.k {
            return Err(Error::Insufficient(format!(
                "test type `{t}` has {n} instances, need more than {}",
                config.k
            )));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    pool.install(|| {
        let cache: HashMap<&str, Vec<Vec<f64>>> = test
            .par_iter()
            .map(|q| detector.reps(q).map(|r| (q.id.as_str(), r)))
            .collect::<Result<_>>()?;
        let tasks: Vec<(usize, usize)> = (0..config.repeats)
            .flat_map(|r| (0..types.len()).map(move |t| (r, t)))
            .collect();
        let results = tasks
            .par_iter()
            .map(|&(repeat, ti)| {
                let event_type = &types[ti];
                let mut rng = task_rng(config.seed, (repeat * types.len() + ti) as u64);
                let positives: Vec<&EventInstance> = test.iter().filter(|i| i.has_type(event_type)).collect();
                let chosen: Vec<usize> = sample(&mut rng, positives.len(), config.k).into_vec();
                let support: Vec<EventInstance> = chosen.iter().map(|&i| positives[i].clone()).collect();
                let support_ids: Vec<&str> = support.iter().map(|s| s.id.as_str()).collect();
                let queries: Vec<&EventInstance> = test.iter().filter(|q| !support_ids.contains(&q.id.as_str())).collect();
                let proto = detector.prototype(event_type, &support)?;
                let mut counts = Counts::default();
                for q in &queries {
                    let pred = detector.spans(&proto, &cache[q.id.as_str()]);
                    counts.add(match_spans(&pred, &q.spans_of(event_type)));
                }
                let mut n_ambiguous = 0;
                if let Some(amb_pool) = ambiguity_pool {
                    let episode = Episode {
                        event_type: event_type.clone(),
                        support: support.clone(),
                        queries: Vec::new(),
                    };
                    let eligible = ambiguous_candidates(amb_pool, &episode);
                    let ordinary = queries.iter().filter(|q| !q.has_type(event_type)).count();
                    let n = match config.ambiguous_count {
                        Some(n) if n > eligible.len() => {
                            return Err(Error::Insufficient(format!(
                                "found {} ambiguous instances for `{event_type}`, need {n}",
                                eligible.len()
                            )))
                        }
                        Some(n) => n,
                        None => ordinary.min(eligible.len()),
                    };
                    let picked = sample(&mut rng, eligible.len(), n).into_vec();
                    for i in picked {
                        let q = eligible[i];
                        let pred = detector.spans(&proto, &detector.reps(q)?);
                        counts.add(match_spans(&pred, &q.spans_of(event_type)));
                    }
                    n_ambiguous = n;
                }
                Ok(TaskResult {
                    repeat,
                    event_type: event_type.clone(),
                    counts,
                    n_ambiguous,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut by_repeat: Vec<BTreeMap<String, Counts>> = vec![BTreeMap::new(); config.repeats];
        let mut ambiguous_added = Vec::new();
        for r in results {
            ambiguous_added.push((r.repeat, r.event_type.clone(), r.n_ambiguous));
            by_repeat[r.repeat].insert(r.event_type, r.counts);
        }
        let reports = by_repeat
            .iter()
            .enumerate()
            .map(|(i, c)| EvalReport::from_counts(c, i, config.seed))
            .collect();
        Ok(ProtocolRun {
            reports,
            ambiguous_added,
        })
    })
}

/// Mean micro-F1 over reports.
pub fn mean_micro_f1(reports: &[EvalReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().map(|r| r.micro_f1).sum::<f64>() / reports.len() as f64
}

/// Mean macro-F1 over reports.
pub fn mean_macro_f1(reports: &[EvalReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().map(|r| r.macro_f1).sum::<f64>() / reports.len() as f64
}
