//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use fsed_core::episodes::*;
use fsed_core::fewshot::{similarity, ModelDims, ModelParams, SimilarityKind};
use fsed_core::intervention::*;
use fsed_core::predictor::{fit_counts, CountPredictor};
use fsed_core::scm::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KINDS: [SimilarityKind; 2] = [SimilarityKind::PrototypicalNegSqEuclid, SimilarityKind::RelationFFN];
const SIDES: [Side; 4] = [Side::None, Side::Support, Side::Query, Side::Both];

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("scm oracle equivalence", scm_oracle_equivalence),
        ("d-separation soundness", dsep_soundness),
        ("proof checker", proof_checker),
        ("degeneracy", degeneracy),
        ("normalization", normalization),
        ("reference identities", identities),
        ("gradient checks", gradient_checks),
        ("evaluation fixtures", evaluation_fixtures),
        ("synthetic coverage", synthetic_coverage),
        ("trend reproduction", trend_reproduction),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = check();
        println!(
            "{} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        failed += !ok as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn scm_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for _ in 0..100 {
        let scm = random_fsed_scm(&mut rng, 3).unwrap();
        let card = |v: &str| scm.cardinality(v).unwrap();
        for c in 0..card("C") {
            for e in 0..card("E") {
                for q in 0..card("Q") {
                    let est = backdoor_estimate(&scm, c, e, q).unwrap();
                    let truth = interventional_distribution(
                        &scm,
                        &assignment(&[("C", c)]),
                        &assignment(&[("E", e), ("Q", q)]),
                        "Y",
                    )
                    .unwrap();
                    for (a, b) in est.iter().zip(&truth) {
                        worst = worst.max((a - b).abs());
                    }
                    n += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst < 1e-9 && secs < 60.0,
        format!("100 models, {n} queries, max |diff| {worst:.1e} (< 1e-9), {secs:.1}s (< 60s)"),
    )
}

fn dsep_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let (mut checked, mut violations) = (0, 0);
    for _ in 0..50 {
        let n = rng.gen_range(3..=7);
        let dag = random_dag(&mut rng, n, 0.35);
        let cards: BTreeMap<String, usize> = dag.nodes().map(|v| (v.to_string(), rng.gen_range(2..=3))).collect();
        let scm = random_scm(&mut rng, &dag, &cards).unwrap();
        let nodes: Vec<String> = dag.nodes().map(String::from).collect();
        for (i, x) in nodes.iter().enumerate() {
            for y in &nodes[i + 1..] {
                let rest: Vec<&String> = nodes.iter().filter(|v| *v != x && *v != y).collect();
                for mask in 0..1usize << rest.len() {
                    let z: Vec<&String> = rest.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, v)| *v).collect();
                    let (xs, ys, zs) = (node_set(&[x]), node_set(&[y]), node_set(&z));
                    if d_separated(&dag, &xs, &ys, &zs).unwrap() {
                        checked += 1;
                        violations += !ci_brute_force(&scm, &xs, &ys, &zs, 1e-9).unwrap() as usize;
                    }
                }
            }
        }
    }
    (
        violations == 0 && checked > 0,
        format!("50 DAGs, {checked} separated triples, {violations} violations"),
    )
}

fn proof_checker() -> Outcome {
    let base = verify_backdoor_proof(&fsed_graph()).unwrap().verified_count();
    let ty = verify_backdoor_proof(&fsed_graph().with_edge("T", "Y").unwrap()).unwrap().verified_count();
    let ey = verify_backdoor_proof(&fsed_graph().with_edge("E", "Y").unwrap()).unwrap().verified_count();
    (
        base == 5 && ty < 5 && ey < 5,
        format!("graph {base}/5, with T->Y {ty}/5, with E->Y {ey}/5"),
    )
}

fn small_corpus(n_types: usize, per_type: usize, seed: u64) -> Vec<EventInstance> {
    let config = SynthConfig {
        n_types,
        instances_per_type: per_type,
        ..Default::default()
    };
    generate_synthetic(&config, seed).unwrap().1
}

fn small_model(data: &[EventInstance], dims: ModelDims, seed: u64) -> (ModelParams, CountPredictor) {
    let mut params = ModelParams::init(corpus_vocab(&[data]), dims, &mut ChaCha8Rng::seed_from_u64(seed));
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    for v in params.tensors.iter_mut().flat_map(|(_, t)| t.data.iter_mut()) {
        *v += rng.gen_range(-0.3..0.3);
    }
    (params, fit_counts(&corpus_text(&[data]), 1.0).unwrap())
}

fn degeneracy() -> Outcome {
    let data = small_corpus(3, 12, 7);
    let (params, predictor) = small_model(&data, ModelDims::default(), 3);
    let t = data[0].events[0].event_type.clone();
    let support: Vec<EventInstance> = data.iter().filter(|i| i.has_type(&t)).take(5).cloned().collect();
    let queries: Vec<EventInstance> = data.iter().skip(12).step_by(2).take(8).cloned().collect();
    let protocol = ProtocolConfig {
        repeats: 2,
        ..Default::default()
    };
    let (mut d_loss, mut d_grad, mut report_mismatch, mut cases): (f64, f64, usize, usize) = (0.0, 0.0, 0, 0);
    for kind in KINDS {
        let none = InterventionConfig::none();
        let (l0, g0) = surrogate_gradients(kind, &params, &t, &support, &queries, &predictor, &none).unwrap();
        let detector = |intervention| Detector {
            params: &params,
            kind,
            intervention,
            source: &predictor,
        };
        let r0 = test_protocol(&detector(none), &data, Some(&data), &protocol).unwrap();
        for side in SIDES {
            for (lambda, top_n) in [(1.0, 10), (0.5, 0)] {
                let config = InterventionConfig {
                    lambda,
                    top_n,
                    side,
                    candidate_mode: CandidateMode::PerInstance,
                };
                let (l, g) = surrogate_gradients(kind, &params, &t, &support, &queries, &predictor, &config).unwrap();
                d_loss = d_loss.max((l - l0).abs());
                d_grad = d_grad.max(g.max_abs_diff(&g0));
                report_mismatch += (test_protocol(&detector(config), &data, Some(&data), &protocol).unwrap() != r0) as usize;
                cases += 1;
            }
        }
    }
    (
        d_loss <= 1e-12 && d_grad <= 1e-12 && report_mismatch == 0,
        format!("{cases} cases, max loss diff {d_loss:.1e}, max grad diff {d_grad:.1e} (<= 1e-12), {report_mismatch} report mismatches"),
    )
}

fn normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let k = rng.gen_range(1..=6);
        let lambda = if rng.gen_bool(0.1) { 1.0 } else { rng.gen_range(1e-6..1.0) };
        let contexts: Vec<MaskedContext> = (0..k)
            .map(|j| {
                let len = rng.gen_range(2..10);
                let toks: Vec<String> = (0..len).map(|p| format!("w{}", rng.gen_range(0..4) + p)).collect();
                let pos = rng.gen_range(0..len);
                MaskedContext::from_span(&format!("s{j}"), &toks, pos, pos + 1).unwrap()
            })
            .collect();
        let predicted: Vec<Vec<CandidateTrigger>> = contexts
            .iter()
            .map(|c| {
                let n = rng.gen_range(0..12);
                (0..n)
                    .map(|m| format!("c{}", m + rng.gen_range(0..3) * 20))
                    .collect::<std::collections::BTreeSet<_>>()
                    .into_iter()
                    .filter(|s| c.original_trigger != vec![s.clone()])
                    .map(|s| CandidateTrigger::predicted(s, rng.gen_range(-20.0..20.0)))
                    .collect()
            })
            .collect();
        let pooled = i % 2 == 1;
        let (mode, posteriors) = if pooled {
            let originals: Vec<Vec<String>> = contexts.iter().map(|c| c.original_trigger.clone()).collect();
            (CandidateMode::PooledUnion, vec![pooled_posterior(&originals, &predicted, lambda).unwrap()])
        } else {
            let posts = contexts
                .iter()
                .zip(&predicted)
                .map(|(c, p)| trigger_posterior(&CandidateTrigger::original(c.original_trigger.clone()), p, lambda).unwrap())
                .collect();
            (CandidateMode::PerInstance, posts)
        };
        let total: f64 = expand_instances(&contexts, &posteriors, mode).unwrap().iter().map(|w| w.weight).sum();
        worst = worst.max((total - 1.0).abs());
    }
    (worst <= 1e-12, format!("1000 configurations, both modes, max |sum - 1| {worst:.1e} (<= 1e-12)"))
}

fn identities() -> Outcome {
    let data = small_corpus(2, 6, 1);
    let (params, _) = small_model(&data, ModelDims::default(), 0);
    let d = params.dims.d_rep;
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let weights = |rng: &mut ChaCha8Rng, n: usize| {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / z).collect::<Vec<f64>>()
    };
    let (mut vec_err, mut side_err, mut rel_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..1000 {
        let n = rng.gen_range(1..8);
        let w = weights(&mut rng, n);
        let reps: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let q: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mean: Vec<f64> = (0..d).map(|k| w.iter().zip(&reps).map(|(a, r)| a * r[k]).sum()).collect();
        let lhs = -similarity(SimilarityKind::PrototypicalNegSqEuclid, &params, &mean, &q).unwrap();
        let rhs: f64 = (0..d)
            .map(|k| w.iter().zip(&reps).map(|(a, r)| a * (r[k] - q[k])).sum::<f64>().powi(2))
            .sum();
        vec_err = vec_err.max((lhs - rhs).abs());

        let q1 = q[0];
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let scalar: Vec<(Vec<f64>, f64)> = w.iter().map(|a| (vec![q1 + sign * rng.gen_range(0.0..3.0)], *a)).collect();
        let reference =
            reference_loss_from_reps(SimilarityKind::PrototypicalNegSqEuclid, &params, &scalar, &[vec![q1]], Link::Square)
                .unwrap();
        let surrogate = (scalar.iter().map(|(r, a)| a * r[0]).sum::<f64>() - q1).powi(2);
        side_err = side_err.max((-reference - surrogate).abs());

        let signs: Vec<f64> = (0..d).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let close: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|k| q[k] + signs[k] * rng.gen_range(0.0..2.0)).collect())
            .collect();
        for k in 0..d {
            let a = (w.iter().zip(&close).map(|(ws, r)| ws * r[k]).sum::<f64>() - q[k]).abs();
            let b: f64 = w.iter().zip(&close).map(|(ws, r)| ws * (r[k] - q[k]).abs()).sum();
            rel_err = rel_err.max((a - b).abs());
        }
    }
    (
        vec_err <= 1e-12 && side_err <= 1e-12 && rel_err <= 1e-12,
        format!("1000 draws each: vector {vec_err:.1e}, 1-D same-side {side_err:.1e}, relation same-side {rel_err:.1e} (<= 1e-12)"),
    )
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let config = SynthConfig {
        n_types: 2,
        instances_per_type: 8,
        context_vocab: 6,
        function_words: 4,
        marker_words: 2,
        lexicon_size: 6,
        min_len: 5,
        max_len: 6,
        ..Default::default()
    };
    let data = generate_synthetic(&config, 3).unwrap().1;
    let dims = ModelDims {
        d_emb: 3,
        d_rep: 4,
        d_hid: 5,
        window: 2,
    };
    let (params, predictor) = small_model(&data, dims, 9);
    let t = data[0].events[0].event_type.clone();
    let support: Vec<EventInstance> = data.iter().filter(|i| i.has_type(&t)).take(3).cloned().collect();
    let queries: Vec<EventInstance> = vec![data[5].clone(), data[12].clone()];
    let mut worst = (0.0, String::new());
    for kind in KINDS {
        for side in SIDES {
            let ic = InterventionConfig {
                lambda: 0.5,
                top_n: 3,
                side,
                candidate_mode: CandidateMode::PerInstance,
            };
            let ep = prepare_episode(&params.vocab, &t, &support, &queries, &predictor, &ic).unwrap();
            let (_, analytic) = ep.loss_and_gradients(kind, &params).unwrap();
            let numeric = common::numeric_gradients(&params, |p| ep.loss(kind, p).unwrap());
            let (name, err) = common::worst_tensor_error(&analytic, &numeric);
            if err >= worst.0 {
                worst = (err, format!("{kind:?}/{side:?}/{name}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst.0 < 1e-4 && secs < 120.0,
        format!("2 heads x 4 sides, worst relative error {:.1e} at {} (< 1e-4), {secs:.1}s (< 120s)", worst.0, worst.1),
    )
}

fn evaluation_fixtures() -> Outcome {
    let sp = |t: &str, s, e| EventSpan {
        event_type: t.into(),
        start: s,
        end: e,
    };
    let set = |rows: Vec<(&str, Vec<EventSpan>)>| -> SpanSets { rows.into_iter().map(|(k, v)| (k.to_string(), v)).collect() };
    let half = span_f1(
        &set(vec![("a", vec![sp("A", 1, 2), sp("A", 3, 4)])]),
        &set(vec![("a", vec![sp("A", 1, 2), sp("A", 5, 6)])]),
    );
    let gold = set(vec![("a", vec![sp("A", 1, 2), sp("B", 3, 5)]), ("b", vec![sp("B", 0, 1)])]);
    let all = span_f1(&gold, &gold);
    let mixed = span_f1(
        &set(vec![("a", vec![sp("A", 1, 2), sp("B", 3, 4)])]),
        &set(vec![("a", vec![sp("A", 1, 2), sp("B", 3, 4)]), ("b", vec![sp("B", 0, 1), sp("B", 5, 6)])]),
    );
    let ok = (half.micro_precision, half.micro_recall, half.micro_f1) == (0.5, 0.5, 0.5)
        && (all.micro_precision, all.micro_recall, all.micro_f1, all.macro_f1) == (1.0, 1.0, 1.0, 1.0)
        && (mixed.micro_f1 - 2.0 / 3.0).abs() < 1e-15
        && mixed.macro_f1 == 0.75;
    (
        ok,
        format!(
            "half P/R/F {}/{}/{}, all-correct F {}, micro {:.4} vs macro {:.4} (expect 0.6667 vs 0.75)",
            half.micro_precision, half.micro_recall, half.micro_f1, all.micro_f1, mixed.micro_f1, mixed.macro_f1
        ),
    )
}

fn synthetic_coverage() -> Outcome {
    let (_, data) = generate_synthetic(&SynthConfig::default(), 0).unwrap();
    let cov = top5_coverage(&data);
    let lo = cov.values().copied().fold(f64::INFINITY, f64::min);
    let hi = cov.values().copied().fold(f64::NEG_INFINITY, f64::max);
    (
        !cov.is_empty() && cov.values().all(|c| (c - 0.78).abs() <= 0.03),
        format!("{} instances, {} types, per-type coverage in [{lo:.3}, {hi:.3}] (target 0.78 +- 0.03)", data.len(), cov.len()),
    )
}

struct SeedResult {
    clean: f64,
    ambiguous: f64,
}

fn run_seed(
    seed: u64,
    side: Side,
    splits: (&[EventInstance], &[EventInstance], &[EventInstance]),
    pool: &[EventInstance],
    predictor: &CountPredictor,
) -> SeedResult {
    let (train, dev, test) = splits;
    let vocab = corpus_vocab(&[train, dev, test]);
    let intervention = InterventionConfig {
        side,
        ..Default::default()
    };
    let config = TrainConfig {
        seed,
        ..Default::default()
    };
    let (params, _) = train_loop(train, dev, &vocab, predictor, &config, &intervention).unwrap();
    let detector = Detector {
        params: &params,
        kind: config.kind,
        intervention,
        source: predictor,
    };
    let protocol = ProtocolConfig {
        seed,
        workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        ..Default::default()
    };
    SeedResult {
        clean: mean_micro_f1(&test_protocol(&detector, test, None, &protocol).unwrap().reports),
        ambiguous: mean_micro_f1(&test_protocol(&detector, test, Some(pool), &protocol).unwrap().reports),
    }
}

fn trend_reproduction() -> Outcome {
    let start = Instant::now();
    let (_, corpus) = generate_synthetic(&SynthConfig::default(), 0).unwrap();
    let (train, dev, test) = split_by_type(&corpus, (0.6, 0.2), 0);
    let predictor = fit_counts(&corpus_text(&[&train, &dev, &test]), 1.0).unwrap();
    let pool: Vec<EventInstance> = train.iter().chain(&dev).cloned().collect();
    let splits = (train.as_slice(), dev.as_slice(), test.as_slice());
    let seeds = 1..=5u64;
    let mut rows = Vec::new();
    for seed in seeds.clone() {
        let base = run_seed(seed, Side::None, splits, &pool, &predictor);
        let causal = run_seed(seed, Side::Support, splits, &pool, &predictor);
        rows.push((base, causal));
    }
    let n = rows.len() as f64;
    let mean_amb_base = rows.iter().map(|r| r.0.ambiguous).sum::<f64>() / n;
    let mean_amb_causal = rows.iter().map(|r| r.1.ambiguous).sum::<f64>() / n;
    let gain = mean_amb_causal - mean_amb_base;
    let smaller_drop = rows
        .iter()
        .filter(|(b, c)| c.clean - c.ambiguous < b.clean - b.ambiguous)
        .count();
    let secs = start.elapsed().as_secs_f64();
    let per_seed: Vec<String> = seeds
        .zip(&rows)
        .map(|(s, (b, c))| {
            format!(
                "s{s} base {:.3}->{:.3} causal {:.3}->{:.3}",
                b.clean, b.ambiguous, c.clean, c.ambiguous
            )
        })
        .collect();
    (
        gain >= 0.03 && smaller_drop >= 4 && secs < 600.0,
        format!(
            "(a) ambiguous micro-F1 causal {mean_amb_causal:.4} vs base {mean_amb_base:.4}, gain {:+.2} pts (>= 3); \
             (b) smaller drop in {smaller_drop}/5 seeds (>= 4); {secs:.0}s (< 600s); {}",
            gain * 100.0,
            per_seed.join("; ")
        ),
    )
}
