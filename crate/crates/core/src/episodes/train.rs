//! Episodic training with early stopping on dev micro-F1.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{event_types, EventInstance};
use super::metrics::Counts;
use super::protocol::{task_rng, Detector};
use super::sampling::{sample_train_episode, Episode, EpisodeShape};
use crate::error::{Error, Result};
use crate::fewshot::optim::{update_step, AdamState};
use crate::fewshot::params::{ModelDims, ModelParams};
use crate::fewshot::similarity::SimilarityKind;
use crate::fewshot::vocab::Vocab;
use crate::intervention::{prepare_episode, InterventionConfig};
use crate::predictor::CandidateSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dims: ModelDims,
    pub kind: SimilarityKind,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batches_per_epoch: usize,
    pub k_shot: usize,
    pub train_shape: EpisodeShape,
    pub valid_shape: EpisodeShape,
    pub dev_episodes_per_type: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dims: ModelDims::default(),
            kind: SimilarityKind::PrototypicalNegSqEuclid,
            lr: 1e-2,
            weight_decay: 0.0,
            max_epochs: 80,
            patience: 15,
            batches_per_epoch: 40,
            k_shot: 5,
            train_shape: EpisodeShape::TRAIN,
            valid_shape: EpisodeShape::VALID,
            dev_episodes_per_type: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_micro_f1: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_micro_f1: f64,
    pub stopped_early: bool,
}

/// Vocabulary over every token of the given splits, in first-seen order.
pub fn corpus_vocab(splits: &[&[EventInstance]]) -> Vocab {
    Vocab::from_tokens(splits.iter().flat_map(|s| s.iter()).flat_map(|i| i.tokens.iter()))
}

/// Token lists of every instance in the given splits.
pub fn corpus_text(splits: &[&[EventInstance]]) -> Vec<Vec<String>> {
    splits.iter().flat_map(|s| s.iter()).map(|i| i.tokens.clone()).collect()
}

fn eligible_types(pool: &[EventInstance], need: usize) -> Vec<String> {
    event_types(pool)
        .into_iter()
        .filter(|t| pool.iter().filter(|i| i.has_type(t)).count() >= need)
        .collect()
}

/// Fixed validation episodes, drawn once from the seed.
pub fn dev_episodes(dev: &[EventInstance], config: &TrainConfig) -> Result<Vec<Episode>> {
    let shape = config.valid_shape.with_k(config.k_shot);
    let types = eligible_types(dev, shape.k + shape.n_pos);
    if types.is_empty() {
        return Err(Error::Insufficient("no dev type has enough instances for a validation episode".into()));
    }
    let mut rng = task_rng(config.seed, u64::MAX - 1);
    let mut out = Vec::new();
    for t in &types {
        for _ in 0..config.dev_episodes_per_type {
            let mut s = shape;
            s.n_neg = s.n_neg.min(dev.iter().filter(|i| !i.has_type(t)).count());
            out.push(sample_train_episode(dev, t, s, &mut rng)?);
        }
    }
    Ok(out)
}

/// Pooled micro-F1 of a detector over episodes.
pub fn episodes_micro_f1(detector: &Detector, episodes: &[Episode]) -> Result<f64> {
    let mut c = Counts::default();
    for e in episodes {
        c.add(detector.score_episode(e)?);
    }
    Ok(c.prf().2)
}

/// Trains from a fresh initialization and returns the best dev snapshot.
pub fn train_loop(
    train: &[EventInstance],
    dev: &[EventInstance],
    vocab: &Vocab,
    source: &dyn CandidateSource,
    config: &TrainConfig,
    intervention: &InterventionConfig,
) -> Result<(ModelParams, History)> {
    if train.is_empty() || dev.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    intervention.validate()?;
    let shape = config.train_shape.with_k(config.k_shot);
    let types = eligible_types(train, shape.k + shape.n_pos);
    if types.is_empty() {
        return Err(Error::Insufficient("no train type has enough instances for an episode".into()));
    }
    let dev_eps = dev_episodes(dev, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(vocab.clone(), config.dims, &mut rng);
    let mut adam = AdamState::new(&params);
    let mut best = params.clone();
    let mut history = History {
        seed: config.seed,
        epochs: Vec::new(),
        best_epoch: 0,
        best_dev_micro_f1: f64::NEG_INFINITY,
        stopped_early: false,
    };
    for epoch in 1..=config.max_epochs {
        let mut loss_sum = 0.0;
        for _ in 0..config.batches_per_epoch {
            let t = &types[rng.gen_range(0..types.len())];
            let ep = sample_train_episode(train, t, shape, &mut rng)?;
            let prepared = prepare_episode(&params.vocab, t, &ep.support, &ep.queries, source, intervention)?;
            let (loss, grads) = prepared.loss_and_gradients(config.kind, &params)?;
            update_step(&mut params, &grads, &mut adam, config.lr, config.weight_decay)?;
            loss_sum += loss;
        }
        let detector = Detector {
            params: &params,
            kind: config.kind,
            intervention: *intervention,
            source,
        };
        let f1 = episodes_micro_f1(&detector, &dev_eps)?;
        let improved = f1 > history.best_dev_micro_f1;
        if improved {
            history.best_dev_micro_f1 = f1;
            history.best_epoch = epoch;
            best = params.clone();
        }
        log::info!("epoch {epoch}: loss {:.4}, dev micro-F1 {f1:.4}", loss_sum / config.batches_per_epoch as f64);
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / config.batches_per_epoch.max(1) as f64,
            dev_micro_f1: f1,
            improved,
        });
        if epoch - history.best_epoch >= config.patience {
            history.stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    Ok((best, history))
}
