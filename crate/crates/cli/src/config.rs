use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use fsed_core::episodes::{SynthConfig, TrainConfig};
use fsed_core::fewshot::{ModelDims, SimilarityKind};
use fsed_core::intervention::{self, InterventionConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    None,
    Support,
    Query,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Similarity {
    Proto,
    Relation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateMode {
    PerInstance,
    Pooled,
}

/// Effective settings of a run. Keys mirror the flag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub k_shot: usize,
    pub lambda: f64,
    pub top_n: usize,
    pub side: Side,
    pub similarity: Similarity,
    pub candidate_mode: CandidateMode,
    pub dims: ModelDims,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batches_per_epoch: usize,
    pub dev_episodes_per_type: usize,
    pub repeats: usize,
    pub workers: usize,
    pub smoothing: f64,
    pub ambiguous: bool,
    pub ambiguous_count: Option<usize>,
    pub synth: SynthConfig,
    pub train_fraction: f64,
    pub dev_fraction: f64,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub logits: Option<PathBuf>,
    pub predictor: Option<PathBuf>,
    pub params: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        RunConfig {
            seed: 0,
            k_shot: 5,
            lambda: 0.5,
            top_n: 10,
            side: Side::Support,
            similarity: Similarity::Proto,
            candidate_mode: CandidateMode::PerInstance,
            dims: t.dims,
            lr: t.lr,
            weight_decay: t.weight_decay,
            max_epochs: t.max_epochs,
            patience: t.patience,
            batches_per_epoch: t.batches_per_epoch,
            dev_episodes_per_type: t.dev_episodes_per_type,
            repeats: 4,
            workers: 1,
            smoothing: 1.0,
            ambiguous: false,
            ambiguous_count: None,
            synth: SynthConfig::default(),
            train_fraction: 0.6,
            dev_fraction: 0.2,
            train: None,
            dev: None,
            test: None,
            logits: None,
            predictor: None,
            params: None,
            out: PathBuf::from("run"),
        }
    }
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON config file; flags given on the command line win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub k_shot: Option<usize>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub top_n: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub side: Option<Side>,
    #[arg(long, global = true, value_enum)]
    pub similarity: Option<Similarity>,
    #[arg(long, global = true, value_enum)]
    pub candidate_mode: Option<CandidateMode>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub weight_decay: Option<f64>,
    #[arg(long, global = true)]
    pub max_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub patience: Option<usize>,
    #[arg(long, global = true)]
    pub batches_per_epoch: Option<usize>,
    #[arg(long, global = true)]
    pub repeats: Option<usize>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Add-k constant of the count predictor
    #[arg(long, global = true)]
    pub smoothing: Option<f64>,
    /// Also score with ambiguous negatives drawn from train and dev
    #[arg(long, global = true)]
    pub ambiguous: bool,
    #[arg(long, global = true)]
    pub ambiguous_count: Option<usize>,
    #[arg(long, global = true)]
    pub train: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dev: Option<PathBuf>,
    #[arg(long, global = true)]
    pub test: Option<PathBuf>,
    /// Candidate logits file; replaces the count predictor
    #[arg(long, global = true)]
    pub logits: Option<PathBuf>,
    /// Saved count predictor
    #[arg(long, global = true)]
    pub predictor: Option<PathBuf>,
    /// Trained parameters for eval
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

macro_rules! apply {
    ($cfg:ident, $o:ident, $($f:ident),*) => {
        $(if let Some(v) = $o.$f.clone() { $cfg.$f = v; })*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut c = match &o.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        apply!(c, o, seed, k_shot, lambda, top_n, side, similarity, candidate_mode, lr, weight_decay);
        apply!(c, o, max_epochs, patience, batches_per_epoch, repeats, workers, smoothing, out);
        if o.ambiguous {
            c.ambiguous = true;
        }
        if o.ambiguous_count.is_some() {
            c.ambiguous_count = o.ambiguous_count;
        }
        for (slot, v) in [
            (&mut c.train, &o.train),
            (&mut c.dev, &o.dev),
            (&mut c.test, &o.test),
            (&mut c.logits, &o.logits),
            (&mut c.predictor, &o.predictor),
            (&mut c.params, &o.params),
        ] {
            if v.is_some() {
                *slot = v.clone();
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: &str| -> Result<()> { bail!("config field `{name}`: {msg}") };
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            field("lambda", &format!("must lie in (0, 1], got {}", self.lambda))?;
        }
        if self.k_shot == 0 {
            field("k-shot", "must be at least 1")?;
        }
        if self.repeats == 0 {
            field("repeats", "must be at least 1")?;
        }
        if self.workers == 0 {
            field("workers", "must be at least 1")?;
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            field("lr", "must be finite and non-negative")?;
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            field("weight-decay", "must be finite and non-negative")?;
        }
        if self.max_epochs == 0 || self.patience == 0 || self.batches_per_epoch == 0 {
            field("max-epochs/patience/batches-per-epoch", "must be positive")?;
        }
        if self.dev_episodes_per_type == 0 {
            field("dev-episodes-per-type", "must be positive")?;
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            field("smoothing", "must be positive")?;
        }
        let d = &self.dims;
        if d.d_emb == 0 || d.d_rep == 0 || d.d_hid == 0 {
            field("dims", "widths must be positive")?;
        }
        if !(self.train_fraction > 0.0 && self.dev_fraction > 0.0 && self.train_fraction + self.dev_fraction < 1.0) {
            field("train-fraction/dev-fraction", "must be positive and sum below 1")?;
        }
        self.synth.validate().map_err(|e| anyhow::anyhow!("config field `synth`: {e}"))?;
        Ok(())
    }

    pub fn kind(&self) -> SimilarityKind {
        match self.similarity {
            Similarity::Proto => SimilarityKind::PrototypicalNegSqEuclid,
            Similarity::Relation => SimilarityKind::RelationFFN,
        }
    }

    pub fn intervention(&self) -> InterventionConfig {
        InterventionConfig {
            lambda: self.lambda,
            top_n: self.top_n,
            side: match self.side {
                Side::None => intervention::Side::None,
                Side::Support => intervention::Side::Support,
                Side::Query => intervention::Side::Query,
                Side::Both => intervention::Side::Both,
            },
            candidate_mode: match self.candidate_mode {
                CandidateMode::PerInstance => intervention::CandidateMode::PerInstance,
                CandidateMode::Pooled => intervention::CandidateMode::PooledUnion,
            },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dims: self.dims,
            kind: self.kind(),
            lr: self.lr,
            weight_decay: self.weight_decay,
            max_epochs: self.max_epochs,
            patience: self.patience,
            batches_per_epoch: self.batches_per_epoch,
            k_shot: self.k_shot,
            dev_episodes_per_type: self.dev_episodes_per_type,
            seed: self.seed,
            ..Default::default()
        }
    }
}
