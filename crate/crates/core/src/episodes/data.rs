//! Event instances and their JSONL wire format.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fewshot::vocab::normalize_token;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventSpan {
    #[serde(rename = "type")]
    pub event_type: String,
    pub start: usize,
    pub end: usize,
}

/// A tokenized sentence with typed trigger spans (end exclusive).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventInstance {
    pub id: String,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub events: Vec<EventSpan>,
}

impl EventInstance {
    /// Lowercases tokens and checks span invariants.
    pub fn new(id: impl Into<String>, tokens: Vec<String>, events: Vec<EventSpan>) -> Result<Self> {
        let inst = EventInstance {
            id: id.into(),
            tokens: tokens.iter().map(|t| normalize_token(t)).collect(),
            events,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Error::InvalidConfig(format!("instance `{}`: {m}", self.id));
        if self.id.is_empty() {
            return Err(Error::InvalidConfig("instance id is empty".into()));
        }
        for e in &self.events {
            if e.event_type.is_empty() {
                return Err(invalid("empty event type".into()));
            }
            if e.start >= e.end || e.end > self.tokens.len() {
                return Err(invalid(format!(
                    "span {}..{} out of range for {} tokens",
                    e.start,
                    e.end,
                    self.tokens.len()
                )));
            }
        }
        for (i, a) in self.events.iter().enumerate() {
            for b in &self.events[i + 1..] {
                if a.event_type == b.event_type && a.start < b.end && b.start < a.end {
                    return Err(invalid(format!(
                        "overlapping `{}` spans {}..{} and {}..{}",
                        a.event_type, a.start, a.end, b.start, b.end
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn has_type(&self, event_type: &str) -> bool {
        self.events.iter().any(|e| e.event_type == event_type)
    }

    /// Sorted spans of one type.
    pub fn spans_of(&self, event_type: &str) -> Vec<(usize, usize)> {
        let mut s: Vec<(usize, usize)> = self
            .events
            .iter()
            .filter(|e| e.event_type == event_type)
            .map(|e| (e.start, e.end))
            .collect();
        s.sort_unstable();
        s
    }

    /// One-way binary labels for `event_type`.
    pub fn labels_for(&self, event_type: &str) -> Vec<u8> {
        let mut l = vec![0u8; self.tokens.len()];
        for (s, e) in self.spans_of(event_type) {
            l[s..e].iter_mut().for_each(|x| *x = 1);
        }
        l
    }

    /// Surface strings of every trigger of `event_type`.
    pub fn trigger_surfaces(&self, event_type: &str) -> Vec<Vec<String>> {
        self.spans_of(event_type)
            .into_iter()
            .map(|(s, e)| self.tokens[s..e].to_vec())
            .collect()
    }
}

/// Distinct event types in sorted order.
pub fn event_types(instances: &[EventInstance]) -> Vec<String> {
    let set: BTreeSet<&str> = instances
        .iter()
        .flat_map(|i| i.events.iter().map(|e| e.event_type.as_str()))
        .collect();
    set.into_iter().map(String::from).collect()
}

pub fn parse_dataset(text: &str) -> Result<Vec<EventInstance>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| Error::Parse { line: i + 1, message };
        let raw: EventInstance = serde_json::from_str(line).map_err(|e| parse(e.to_string()))?;
        let inst = EventInstance::new(raw.id, raw.tokens, raw.events).map_err(|e| parse(e.to_string()))?;
        if !seen.insert(inst.id.clone()) {
            return Err(parse(format!("duplicate id `{}`", inst.id)));
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<EventInstance>> {
    let mut text = String::new();
    for line in BufReader::new(File::open(path)?).lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    parse_dataset(&text)
}

pub fn save_dataset(path: impl AsRef<Path>, instances: &[EventInstance]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for inst in instances {
        serde_json::to_writer(&mut w, inst).map_err(|e| Error::Io(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
