//! Candidate triggers for a masked slot.

pub mod count;
pub mod external;

pub use count::{fit_counts, CountPredictor, BOS, EOS};
pub use external::{
    load_external_logits, parse_logits, read_masked_instances, write_logits, write_masked_instances, ExternalLogits,
    LogitEntry, LogitsRecord, MaskedInstanceRecord,
};

use crate::error::Result;
use crate::intervention::{CandidateTrigger, MaskedContext};

/// Anything that proposes fillers for a masked context, best first,
/// never including the context's original trigger.
pub trait CandidateSource: Sync {
    fn candidates(&self, masked: &MaskedContext, top_n: usize) -> Result<Vec<CandidateTrigger>>;
}
