use std::collections::BTreeMap;

use fsed_core::episodes::*;
use fsed_core::fewshot::{ModelDims, ModelParams};
use fsed_core::intervention::InterventionConfig;
use fsed_core::predictor::fit_counts;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sp(t: &str, s: usize, e: usize) -> EventSpan {
    EventSpan {
        event_type: t.into(),
        start: s,
        end: e,
    }
}

fn sets(rows: &[(&str, Vec<EventSpan>)]) -> SpanSets {
    rows.iter().map(|(id, v)| (id.to_string(), v.clone())).collect()
}

#[test]
fn half_precision_half_recall_fixture() {
    let gold = sets(&[("s1", vec![sp("Attack", 2, 3)]), ("s2", vec![sp("Attack", 0, 1)])]);
    let pred = sets(&[("s1", vec![sp("Attack", 2, 3)]), ("s2", vec![sp("Attack", 4, 5)])]);
    let r = span_f1(&pred, &gold);
    assert_eq!((r.micro_precision, r.micro_recall, r.micro_f1), (0.5, 0.5, 0.5));
    assert_eq!(r.macro_f1, 0.5);
}

#[test]
fn all_correct_fixture() {
    let gold = sets(&[
        ("s1", vec![sp("Attack", 2, 3), sp("Die", 5, 7)]),
        ("s2", vec![sp("Die", 0, 1)]),
        ("s3", vec![]),
    ]);
    let r = span_f1(&gold, &gold);
    assert_eq!((r.micro_precision, r.micro_recall, r.micro_f1, r.macro_f1), (1.0, 1.0, 1.0, 1.0));
    assert!(r.per_type.iter().all(|t| t.f1 == 1.0));
}

#[test]
fn micro_pools_counts_while_macro_averages_types() {
    let gold = sets(&[("s1", vec![sp("A", 1, 2), sp("B", 3, 4)]), ("s2", vec![sp("B", 0, 1), sp("B", 5, 6)])]);
    let pred = sets(&[("s1", vec![sp("A", 1, 2), sp("B", 3, 4)])]);
    let r = span_f1(&pred, &gold);
    // A: P=1 R=1 F=1. B: P=1 R=1/3 F=1/2. Pooled: tp 2, fp 0, fn 2.
    assert_eq!(r.micro_precision, 1.0);
    assert_eq!(r.micro_recall, 0.5);
    assert!((r.micro_f1 - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(r.macro_f1, 0.75);
}

#[test]
fn multi_token_spans_need_exact_boundaries() {
    let gold = sets(&[("s", vec![sp("A", 1, 3)])]);
    let pred = sets(&[("s", vec![sp("A", 1, 2), sp("A", 2, 3)])]);
    let r = span_f1(&pred, &gold);
    assert_eq!((r.micro_precision, r.micro_recall, r.micro_f1), (0.0, 0.0, 0.0));
}

#[test]
fn scoring_is_invariant_to_span_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let gold = sets(&[("s", vec![sp("A", 0, 1), sp("A", 2, 3), sp("B", 4, 5), sp("A", 6, 8)])]);
    let pred_spans = vec![sp("A", 0, 1), sp("B", 2, 3), sp("A", 6, 8), sp("A", 6, 8), sp("B", 4, 5)];
    let base = span_f1(&sets(&[("s", pred_spans.clone())]), &gold);
    for _ in 0..20 {
        let mut p = pred_spans.clone();
        p.shuffle(&mut rng);
        let mut g = gold["s"].clone();
        g.shuffle(&mut rng);
        assert_eq!(span_f1(&sets(&[("s", p)]), &sets(&[("s", g)])), base);
    }
}

#[test]
fn report_rows_carry_the_wire_fields() {
    let gold = sets(&[("s", vec![sp("A", 0, 1)])]);
    let r = span_f1_with_types(&gold, &gold, &[], 2, 7);
    let v = serde_json::to_value(&r.rows()[0]).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["f1", "macro_f1", "micro_f1", "precision", "recall", "repeat", "seed", "type"]);
}

#[test]
fn default_corpus_hits_coverage_target() {
    let config = SynthConfig::default();
    assert_eq!(config.n_types * config.instances_per_type, 10_000);
    let (_, data) = generate_synthetic(&config, 0).unwrap();
    assert_eq!(data.len(), 10_000);
    let cov = top5_coverage(&data);
    assert_eq!(cov.len(), config.n_types);
    for (t, c) in cov {
        assert!((c - 0.78).abs() <= 0.03, "{t}: {c}");
    }
}

#[test]
fn generation_is_seeded() {
    let config = SynthConfig {
        n_types: 4,
        instances_per_type: 30,
        ..Default::default()
    };
    assert_eq!(generate_synthetic(&config, 3).unwrap(), generate_synthetic(&config, 3).unwrap());
    assert_ne!(generate_synthetic(&config, 3).unwrap().1, generate_synthetic(&config, 4).unwrap().1);
}

#[test]
fn homographs_are_triggers_of_two_types() {
    let (world, data) = generate_synthetic(&SynthConfig::default(), 1).unwrap();
    assert_eq!(world.homographs.len(), world.types.len());
    for (recv, donor, word) in &world.homographs {
        for t in [recv, donor] {
            let ty = &world.types[*t];
            assert!(data.iter().any(|i| i.has_type(ty) && i.trigger_surfaces(ty).contains(&vec![word.clone()])));
        }
    }
}

#[test]
fn ambiguous_negatives_share_a_surface_but_not_the_type() {
    let (_, data) = generate_synthetic(&SynthConfig::default(), 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in event_types(&data).iter().take(5) {
        let ep = sample_train_episode(&data, t, EpisodeShape::TRAIN, &mut rng).unwrap();
        let surfaces = ep.support_triggers();
        let eligible = ambiguous_candidates(&data, &ep);
        let expect = data
            .iter()
            .filter(|i| {
                !i.has_type(t)
                    && !ep.support.iter().chain(&ep.queries).any(|s| s.id == i.id)
                    && surfaces.iter().any(|s| i.tokens.windows(s.len()).any(|w| w == s.as_slice()))
            })
            .count();
        assert_eq!(eligible.len(), expect);
        let aug = sample_ambiguous_negatives(&data, &ep, eligible.len().min(4), &mut rng).unwrap();
        assert_eq!(aug.queries.len(), ep.queries.len() + eligible.len().min(4));
        for q in &aug.queries[ep.queries.len()..] {
            assert!(!q.has_type(t));
        }
        assert!(sample_ambiguous_negatives(&data, &ep, eligible.len() + 1, &mut rng).is_err());
    }
}

fn small_world(seed: u64) -> (Vec<EventInstance>, Vec<EventInstance>, Vec<EventInstance>) {
    let config = SynthConfig {
        n_types: 9,
        instances_per_type: 40,
        ..Default::default()
    };
    let (_, data) = generate_synthetic(&config, seed).unwrap();
    split_by_type(&data, (0.56, 0.22), seed)
}

#[test]
fn protocol_queries_every_non_support_test_instance() {
    let (train, dev, test) = small_world(1);
    let vocab = corpus_vocab(&[&train, &dev, &test]);
    let predictor = fit_counts(&corpus_text(&[&train, &dev, &test]), 1.0).unwrap();
    let params = ModelParams::init(vocab, ModelDims::default(), &mut ChaCha8Rng::seed_from_u64(0));
    let detector = Detector {
        params: &params,
        kind: fsed_core::fewshot::SimilarityKind::PrototypicalNegSqEuclid,
        intervention: InterventionConfig::none(),
        source: &predictor,
    };
    let config = ProtocolConfig {
        k: 5,
        repeats: 3,
        ..Default::default()
    };
    let run = test_protocol(&detector, &test, None, &config).unwrap();
    assert_eq!(run.reports.len(), 3);
    let per_type: BTreeMap<String, usize> = event_types(&test)
        .into_iter()
        .map(|t| {
            let n = test.iter().filter(|i| i.has_type(&t)).count();
            (t, n)
        })
        .collect();
    for r in &run.reports {
        for s in &r.per_type {
            assert_eq!(s.counts.tp + s.counts.fn_, per_type[&s.event_type] - config.k);
        }
    }
    let parallel = ProtocolConfig { workers: 4, ..config };
    assert_eq!(test_protocol(&detector, &test, None, &parallel).unwrap(), run);
}

#[test]
fn protocol_adds_ambiguous_negatives_from_the_pool() {
    let (train, dev, test) = small_world(2);
    let vocab = corpus_vocab(&[&train, &dev, &test]);
    let predictor = fit_counts(&corpus_text(&[&train, &dev, &test]), 1.0).unwrap();
    let params = ModelParams::init(vocab, ModelDims::default(), &mut ChaCha8Rng::seed_from_u64(0));
    let detector = Detector {
        params: &params,
        kind: fsed_core::fewshot::SimilarityKind::PrototypicalNegSqEuclid,
        intervention: InterventionConfig::none(),
        source: &predictor,
    };
    let pool: Vec<EventInstance> = train.iter().chain(&dev).cloned().collect();
    let run = test_protocol(&detector, &test, Some(&pool), &ProtocolConfig::default()).unwrap();
    assert!(run.ambiguous_added.iter().any(|(_, _, n)| *n > 0));
    let too_many = ProtocolConfig {
        ambiguous_count: Some(100_000),
        ..Default::default()
    };
    assert!(test_protocol(&detector, &test, Some(&pool), &too_many).is_err());
}

fn quick_train(seed: u64) -> TrainConfig {
    TrainConfig {
        dims: ModelDims {
            d_emb: 8,
            d_rep: 8,
            d_hid: 8,
            window: 2,
        },
        max_epochs: 12,
        patience: 3,
        batches_per_epoch: 6,
        dev_episodes_per_type: 1,
        seed,
        ..Default::default()
    }
}

#[test]
fn training_is_deterministic() {
    let (train, dev, test) = small_world(3);
    let vocab = corpus_vocab(&[&train, &dev, &test]);
    let predictor = fit_counts(&corpus_text(&[&train, &dev, &test]), 1.0).unwrap();
    let run = || train_loop(&train, &dev, &vocab, &predictor, &quick_train(7), &InterventionConfig::default()).unwrap();
    let (p1, h1) = run();
    let (p2, h2) = run();
    assert_eq!(h1, h2);
    assert_eq!(p1.to_text(), p2.to_text());
}

#[test]
fn early_stopping_keeps_the_best_snapshot() {
    let (train, dev, test) = small_world(4);
    let vocab = corpus_vocab(&[&train, &dev, &test]);
    let predictor = fit_counts(&corpus_text(&[&train, &dev, &test]), 1.0).unwrap();
    for seed in 0..3 {
        let config = quick_train(seed);
        let intervention = InterventionConfig::none();
        let (best, h) = train_loop(&train, &dev, &vocab, &predictor, &config, &intervention).unwrap();
        let max = h.epochs.iter().map(|e| e.dev_micro_f1).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(h.best_dev_micro_f1, max);
        assert_eq!(h.best_epoch, h.epochs.iter().find(|e| e.dev_micro_f1 == max).unwrap().epoch);
        let last = h.epochs.last().unwrap().epoch;
        if h.stopped_early {
            assert_eq!(last - h.best_epoch, config.patience);
        } else {
            assert_eq!(last, config.max_epochs);
        }
        let detector = Detector {
            params: &best,
            kind: config.kind,
            intervention,
            source: &predictor,
        };
        let f1 = episodes_micro_f1(&detector, &dev_episodes(&dev, &config).unwrap()).unwrap();
        assert_eq!(f1, h.best_dev_micro_f1);
    }
}

#[test]
fn frozen_model_stops_after_patience() {
    let (train, dev, test) = small_world(5);
    let vocab = corpus_vocab(&[&train, &dev, &test]);
    let predictor = fit_counts(&corpus_text(&[&train, &dev, &test]), 1.0).unwrap();
    let config = TrainConfig { lr: 0.0, ..quick_train(0) };
    let (best, h) = train_loop(&train, &dev, &vocab, &predictor, &config, &InterventionConfig::none()).unwrap();
    assert!(h.stopped_early);
    assert_eq!(h.best_epoch, 1);
    assert_eq!(h.epochs.len(), 1 + config.patience);
    let init = ModelParams::init(vocab, config.dims, &mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(best.to_text(), init.to_text());
}

#[test]
fn dataset_file_round_trip() {
    let (train, _, _) = small_world(6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.jsonl");
    save_dataset(&path, &train).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), train);
}
