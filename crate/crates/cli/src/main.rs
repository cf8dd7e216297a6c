mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fsed_core::episodes::{
    corpus_text, corpus_vocab, event_types, generate_synthetic, load_dataset, mean_macro_f1, mean_micro_f1,
    save_dataset, split_by_type, test_protocol, train_loop, Detector, EvalReport, EventInstance, ProtocolConfig,
};
use fsed_core::fewshot::ModelParams;
use fsed_core::intervention::{mask_position, mask_trigger, MaskedContext};
use fsed_core::predictor::{fit_counts, load_external_logits, write_masked_instances, CandidateSource, CountPredictor};
use fsed_core::scm::{assignment, backdoor_estimate, fsed_graph, interventional_distribution, random_fsed_scm, verify_backdoor_proof};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "fsed", version, about = "Few-shot event detection with backdoor-adjusted prototypes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Check the backdoor derivation on the built-in graph and against brute force
    VerifyScm {
        /// Random discrete models in the oracle batch
        #[arg(long, default_value_t = 100)]
        models: usize,
    },
    /// Write a synthetic corpus split by event type into train/dev/test
    GenData,
    /// Fit the count predictor on the text of the given splits
    FitPredictor,
    /// Train a model and keep the best dev snapshot
    Train,
    /// Score a trained model on the test split
    Eval,
    /// Write masked contexts for an external candidate exporter
    ExportMasks {
        /// Mask every token position as well as the triggers
        #[arg(long)]
        positions: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = RunConfig::resolve(&cli.overrides)?;
    fs::create_dir_all(&config.out).with_context(|| format!("creating {}", config.out.display()))?;
    write_json(&config.out.join("config.json"), &config)?;
    match cli.command {
        Command::VerifyScm { models } => verify_scm(&config, models),
        Command::GenData => gen_data(&config),
        Command::FitPredictor => fit_predictor(&config),
        Command::Train => train(&config),
        Command::Eval => eval(&config),
        Command::ExportMasks { positions } => export_masks(&config, positions),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load(path: &Path) -> Result<Vec<EventInstance>> {
    load_dataset(path).with_context(|| format!("loading {}", path.display()))
}

/// Train, dev and test splits, whichever were given.
fn splits(config: &RunConfig) -> Result<[Option<Vec<EventInstance>>; 3]> {
    let get = |p: &Option<PathBuf>| p.as_deref().map(load).transpose();
    Ok([get(&config.train)?, get(&config.dev)?, get(&config.test)?])
}

fn text_of(splits: &[Option<Vec<EventInstance>>; 3]) -> Vec<&[EventInstance]> {
    splits.iter().flatten().map(Vec::as_slice).collect()
}

fn candidate_source(config: &RunConfig, splits: &[Option<Vec<EventInstance>>; 3]) -> Result<Box<dyn CandidateSource>> {
    if let Some(p) = &config.logits {
        return Ok(Box::new(load_external_logits(p).with_context(|| format!("loading {}", p.display()))?));
    }
    if let Some(p) = &config.predictor {
        return Ok(Box::new(CountPredictor::load(p).with_context(|| format!("loading {}", p.display()))?));
    }
    let text = text_of(splits);
    if text.is_empty() {
        bail!("no split given to fit the count predictor on");
    }
    Ok(Box::new(fit_counts(&corpus_text(&text), config.smoothing)?))
}

fn verify_scm(config: &RunConfig, models: usize) -> Result<()> {
    let report = verify_backdoor_proof(&fsed_graph())?;
    print!("{report}");
    println!("{}/{} steps verified", report.verified_count(), report.steps.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..models {
        let scm = random_fsed_scm(&mut rng, 3)?;
        for c in 0..scm.cardinality("C")? {
            for e in 0..scm.cardinality("E")? {
                for q in 0..scm.cardinality("Q")? {
                    let est = backdoor_estimate(&scm, c, e, q)?;
                    let truth = interventional_distribution(
                        &scm,
                        &assignment(&[("C", c)]),
                        &assignment(&[("E", e), ("Q", q)]),
                        "Y",
                    )?;
                    worst = est.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
                }
            }
        }
    }
    println!("oracle batch: {models} models, max |backdoor - brute force| = {worst:.3e}");
    write_json(
        &config.out.join("verify.json"),
        &json!({ "seed": config.seed, "steps": report.steps, "models": models, "max_abs_diff": worst }),
    )?;
    if !report.all_hold() || worst >= 1e-9 {
        bail!("verification failed");
    }
    Ok(())
}

fn gen_data(config: &RunConfig) -> Result<()> {
    let (world, corpus) = generate_synthetic(&config.synth, config.seed)?;
    let (train, dev, test) = split_by_type(&corpus, (config.train_fraction, config.dev_fraction), config.seed);
    for (name, split) in [("train", &train), ("dev", &dev), ("test", &test)] {
        save_dataset(config.out.join(format!("{name}.jsonl")), split)?;
        println!("{name}: {} instances, {} types", split.len(), event_types(split).len());
    }
    write_json(&config.out.join("world.json"), &world)
}

fn fit_predictor(config: &RunConfig) -> Result<()> {
    let data = splits(config)?;
    let text = text_of(&data);
    if text.is_empty() {
        bail!("give at least one of --train, --dev, --test");
    }
    let model = fit_counts(&corpus_text(&text), config.smoothing)?;
    model.save(config.out.join("predictor.json"))?;
    println!("{} candidate words", model.vocab_len());
    Ok(())
}

fn train(config: &RunConfig) -> Result<()> {
    let data = splits(config)?;
    let train = data[0].as_deref().context("--train is required")?;
    let dev = data[1].as_deref().context("--dev is required")?;
    let vocab = corpus_vocab(&text_of(&data));
    let source = candidate_source(config, &data)?;
    let (params, history) = train_loop(train, dev, &vocab, source.as_ref(), &config.train_config(), &config.intervention())?;
    fs::write(config.out.join("params.txt"), params.to_text())?;
    write_json(&config.out.join("history.json"), &history)?;
    println!(
        "best epoch {} of {}, dev micro-F1 {:.4}",
        history.best_epoch,
        history.epochs.len(),
        history.best_dev_micro_f1
    );
    Ok(())
}

fn summary(reports: &[EvalReport]) -> serde_json::Value {
    json!({
        "micro_f1": mean_micro_f1(reports),
        "macro_f1": mean_macro_f1(reports),
        "rows": reports.iter().flat_map(EvalReport::rows).collect::<Vec<_>>(),
    })
}

fn eval(config: &RunConfig) -> Result<()> {
    let params_path = match &config.params {
        Some(p) => p.clone(),
        None => config.out.join("params.txt"),
    };
    let text = fs::read_to_string(&params_path).with_context(|| format!("reading {}", params_path.display()))?;
    let params = ModelParams::from_text(&text)?;
    let data = splits(config)?;
    let test = data[2].as_deref().context("--test is required")?;
    let source = candidate_source(config, &data)?;
    let detector = Detector {
        params: &params,
        kind: config.kind(),
        intervention: config.intervention(),
        source: source.as_ref(),
    };
    let protocol = ProtocolConfig {
        k: config.k_shot,
        repeats: config.repeats,
        seed: config.seed,
        workers: config.workers,
        ambiguous_count: config.ambiguous_count,
    };
    let clean = test_protocol(&detector, test, None, &protocol)?;
    let mut out = json!({ "seed": config.seed, "clean": summary(&clean.reports) });
    println!("clean micro-F1 {:.4} macro-F1 {:.4}", mean_micro_f1(&clean.reports), mean_macro_f1(&clean.reports));
    if config.ambiguous {
        let pool: Vec<EventInstance> = data[..2].iter().flatten().flatten().cloned().collect();
        if pool.is_empty() {
            bail!("--ambiguous needs --train or --dev as the ambiguity pool");
        }
        let amb = test_protocol(&detector, test, Some(&pool), &protocol)?;
        println!("ambiguous micro-F1 {:.4} macro-F1 {:.4}", mean_micro_f1(&amb.reports), mean_macro_f1(&amb.reports));
        out["ambiguous"] = summary(&amb.reports);
        out["ambiguous_added"] = json!(amb.ambiguous_added);
    }
    write_json(&config.out.join("reports.json"), &out)
}

fn export_masks(config: &RunConfig, positions: bool) -> Result<()> {
    let data = splits(config)?;
    let mut contexts: Vec<MaskedContext> = Vec::new();
    for inst in data.iter().flatten().flatten() {
        for t in inst.events.iter().map(|e| &e.event_type).collect::<std::collections::BTreeSet<_>>() {
            if let Ok(c) = mask_trigger(inst, t) {
                contexts.push(c);
            }
        }
        if positions {
            for j in 0..inst.tokens.len() {
                contexts.push(mask_position(&inst.id, &inst.tokens, j)?);
            }
        }
    }
    if contexts.is_empty() {
        bail!("nothing to mask; give at least one of --train, --dev, --test");
    }
    let mut seen = std::collections::HashSet::new();
    contexts.retain(|c| seen.insert(c.id.clone()));
    let path = config.out.join("masked.jsonl");
    write_masked_instances(&path, &contexts)?;
    println!("{} masked contexts -> {}", contexts.len(), path.display());
    Ok(())
}
