//! Datasets, episodes, evaluation and training.

pub mod data;
pub mod metrics;
pub mod protocol;
pub mod sampling;
pub mod synth;
pub mod train;

pub use data::{event_types, load_dataset, parse_dataset, save_dataset, EventInstance, EventSpan};
pub use metrics::{match_spans, span_f1, span_f1_with_types, Counts, EvalReport, ReportRow, SpanSets, TypeScore};
pub use protocol::{mean_macro_f1, mean_micro_f1, task_rng, test_protocol, Detector, ProtocolConfig, ProtocolRun};
pub use sampling::{ambiguous_candidates, sample_ambiguous_negatives, sample_train_episode, Episode, EpisodeShape};
pub use synth::{generate_synthetic, split_by_type, top5_coverage, SynthConfig, SynthWorld};
pub use train::{corpus_text, corpus_vocab, dev_episodes, episodes_micro_f1, train_loop, EpochRecord, History, TrainConfig};
