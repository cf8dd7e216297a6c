use serde::{Deserialize, Serialize};

use crate::episodes::data::EventInstance;
use crate::error::{Error, Result};
use crate::fewshot::vocab::MASK;

/// A sentence with one trigger slot replaced by the mask token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedContext {
    /// `"{source_id}@{start}:{end}"`
    pub id: String,
    pub source_id: String,
    pub tokens: Vec<String>,
    pub mask_index: usize,
    pub original_trigger: Vec<String>,
}

pub fn context_key(source_id: &str, start: usize, end: usize) -> String {
    format!("{source_id}@{start}:{end}")
}

impl MaskedContext {
    /// Masks `tokens[start..end]` with a single mask token.
    pub fn from_span(source_id: &str, tokens: &[String], start: usize, end: usize) -> Result<Self> {
        if start >= end || end > tokens.len() {
            return Err(Error::PositionOutOfRange(end, tokens.len()));
        }
        let mut masked = Vec::with_capacity(tokens.len() + 1 - (end - start));
        masked.extend_from_slice(&tokens[..start]);
        masked.push(MASK.to_string());
        masked.extend_from_slice(&tokens[end..]);
        Ok(MaskedContext {
            id: context_key(source_id, start, end),
            source_id: source_id.to_string(),
            tokens: masked,
            mask_index: start,
            original_trigger: tokens[start..end].to_vec(),
        })
    }

    /// Token left of the mask, if any.
    pub fn prev(&self) -> Option<&str> {
        self.mask_index.checked_sub(1).map(|i| self.tokens[i].as_str())
    }

    /// Token right of the mask, if any.
    pub fn next(&self) -> Option<&str> {
        self.tokens.get(self.mask_index + 1).map(String::as_str)
    }

    /// Sentence with `surface` at the mask, and the span it occupies.
    pub fn substitute(&self, surface: &[String]) -> (Vec<String>, (usize, usize)) {
        let mut out = Vec::with_capacity(self.tokens.len() + surface.len());
        out.extend_from_slice(&self.tokens[..self.mask_index]);
        out.extend_from_slice(surface);
        out.extend_from_slice(&self.tokens[self.mask_index + 1..]);
        (out, (self.mask_index, self.mask_index + surface.len()))
    }
}

/// Masks the single trigger of `event_type` in `instance`.
pub fn mask_trigger(instance: &EventInstance, event_type: &str) -> Result<MaskedContext> {
    let spans = instance.spans_of(event_type);
    if spans.len() != 1 {
        return Err(Error::InvalidTrigger(format!(
            "instance `{}` has {} `{event_type}` triggers, expected exactly one",
            instance.id,
            spans.len()
        )));
    }
    let (s, e) = spans[0];
    MaskedContext::from_span(&instance.id, &instance.tokens, s, e)
}

/// Masks a single query position.
pub fn mask_position(source_id: &str, tokens: &[String], position: usize) -> Result<MaskedContext> {
    if position >= tokens.len() {
        return Err(Error::PositionOutOfRange(position, tokens.len()));
    }
    MaskedContext::from_span(source_id, tokens, position, position + 1)
}
