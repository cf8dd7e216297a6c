//! Metric-based few-shot token classifier.

pub mod decode;
pub mod encoder;
pub mod model;
pub mod optim;
pub mod params;
pub mod similarity;
pub mod tensor;
pub mod vocab;

pub use decode::{decode_spans, spans_to_tags};
pub use encoder::{encode, encode_ids, encode_window, window_ids, window_ids_with_center};
pub use model::{
    episode_loss, position_rep, predict_tags, query_reps, support_prototype, PositionMix, PreparedEpisode,
    PreparedQuery, TokenSequence, WeightedSentence,
};
pub use optim::{update_step, AdamState};
pub use params::{ModelDims, ModelParams, ParamTensors, TENSOR_NAMES};
pub use similarity::{classify_token, predict_label, prototypes, similarity, weighted_prototypes, Prototype, SimilarityKind};
pub use tensor::Tensor;
pub use vocab::{normalize_token, tokenize, Vocab, MASK, MASK_ID, PAD, PAD_ID, UNK, UNK_ID};
