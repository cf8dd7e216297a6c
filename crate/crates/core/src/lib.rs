//! Few-shot event detection with backdoor-adjusted prototypes.
//!
//! The crate has two halves. [`scm`] checks the causal argument on finite
//! structural causal models: d-separation, do-calculus side conditions and a
//! brute-force interventional oracle. The rest is the learning stack: a small
//! windowed encoder with prototypical and relation heads ([`fewshot`]), the
//! trigger-intervention machinery ([`intervention`]), candidate triggers from
//! a count model or an external logits file ([`predictor`]), and data,
//! episodes, metrics and training ([`episodes`]).

pub mod error;
pub mod episodes;
pub mod fewshot;
pub mod intervention;
pub mod predictor;
pub mod scm;

pub use error::{Error, Result};
