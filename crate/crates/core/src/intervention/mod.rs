//! Trigger masking, candidate posteriors and backdoor-adjusted episodes.

pub mod expand;
pub mod mask;
pub mod posterior;
pub mod prepare;
pub mod query;
pub mod reference;

pub use expand::{adjusted_prototypes, expand_instances, CandidateMode, InterventionConfig, Side, WeightedInstance};
pub use mask::{context_key, mask_position, mask_trigger, MaskedContext};
pub use posterior::{pooled_posterior, trigger_posterior, CandidateTrigger, TriggerPosterior};
pub use prepare::{prepare_episode, prepare_query, prepare_support, surrogate_episode_loss, surrogate_gradients};
pub use query::{position_mix, query_mixing, query_side_adjust};
pub use reference::{phi, reference_interventional_loss, reference_loss_from_reps, Link, ENUMERATION_LIMIT};
