//! Wire formats shared with the masked-language-model exporter.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::CandidateSource;
use crate::error::{Error, Result};
use crate::fewshot::vocab::MASK;
use crate::intervention::{CandidateTrigger, MaskedContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitEntry {
    pub token: String,
    pub logit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitsRecord {
    pub id: String,
    pub candidates: Vec<LogitEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedInstanceRecord {
    pub id: String,
    pub tokens: Vec<String>,
    pub mask_index: usize,
}

impl From<&MaskedContext> for MaskedInstanceRecord {
    fn from(c: &MaskedContext) -> Self {
        MaskedInstanceRecord {
            id: c.id.clone(),
            tokens: c.tokens.clone(),
            mask_index: c.mask_index,
        }
    }
}

/// Candidates read from a logits file, keyed by masked-context id.
#[derive(Debug, Default)]
pub struct ExternalLogits {
    records: HashMap<String, Vec<LogitEntry>>,
    dropped: AtomicUsize,
}

impl ExternalLogits {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.contains_key(id)
    }

    /// Candidates dropped so far because they equal the original trigger.
    pub fn dropped_originals(&self) -> usize {
        self.dropped.load(Ordering::Relaxed)
    }

    pub fn from_records(records: Vec<LogitsRecord>) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, r) in records.into_iter().enumerate() {
            validate_record(&r).map_err(|message| Error::Parse { line: i + 1, message })?;
            if map.insert(r.id.clone(), r.candidates).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate id `{}`", r.id),
                });
            }
        }
        Ok(ExternalLogits {
            records: map,
            dropped: AtomicUsize::new(0),
        })
    }

    /// Candidates for `id` with the original surface removed, in file order.
    pub fn lookup(&self, masked: &MaskedContext, top_n: usize) -> Result<Vec<CandidateTrigger>> {
        let entries = self
            .records
            .get(&masked.id)
            .ok_or_else(|| Error::UnknownInstance(masked.id.clone()))?;
        let mut out = Vec::new();
        for e in entries {
            if masked.original_trigger.len() == 1 && masked.original_trigger[0] == e.token {
                self.dropped.fetch_add(1, Ordering::Relaxed);
                log::warn!("dropped original trigger `{}` from candidates of `{}`", e.token, masked.id);
                continue;
            }
            if out.len() == top_n {
                break;
            }
            out.push(CandidateTrigger::predicted(e.token.clone(), e.logit));
        }
        Ok(out)
    }
}

impl CandidateSource for ExternalLogits {
    fn candidates(&self, masked: &MaskedContext, top_n: usize) -> Result<Vec<CandidateTrigger>> {
        self.lookup(masked, top_n)
    }
}

fn validate_record(r: &LogitsRecord) -> std::result::Result<(), String> {
    let mut seen = HashSet::new();
    for (i, c) in r.candidates.iter().enumerate() {
        if !c.logit.is_finite() {
            return Err(format!("non-finite logit for `{}`", c.token));
        }
        if c.token.is_empty() || c.token.split_whitespace().count() != 1 {
            return Err(format!("candidate `{}` is not a single token", c.token));
        }
        if !seen.insert(c.token.as_str()) {
            return Err(format!("duplicate candidate `{}`", c.token));
        }
        if i > 0 && r.candidates[i - 1].logit < c.logit {
            return Err("candidates not sorted".into());
        }
    }
    Ok(())
}

pub fn parse_logits(text: &str) -> Result<ExternalLogits> {
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse { line: i + 1, message };
        let r: LogitsRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        validate_record(&r).map_err(bad)?;
        if map.insert(r.id.clone(), r.candidates).is_some() {
            return Err(bad(format!("duplicate id `{}`", r.id)));
        }
    }
    Ok(ExternalLogits {
        records: map,
        dropped: AtomicUsize::new(0),
    })
}

pub fn load_external_logits(path: impl AsRef<Path>) -> Result<ExternalLogits> {
    parse_logits(&std::fs::read_to_string(path)?)
}

fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Io(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_logits(path: impl AsRef<Path>, records: &[LogitsRecord]) -> Result<()> {
    write_jsonl(path, records)
}

pub fn write_masked_instances(path: impl AsRef<Path>, contexts: &[MaskedContext]) -> Result<()> {
    let rows: Vec<MaskedInstanceRecord> = contexts.iter().map(MaskedInstanceRecord::from).collect();
    write_jsonl(path, &rows)
}

pub fn read_masked_instances(path: impl AsRef<Path>) -> Result<Vec<MaskedInstanceRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse { line: i + 1, message };
        let r: MaskedInstanceRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if r.tokens.get(r.mask_index).map(String::as_str) != Some(MASK) {
            return Err(bad(format!("tokens[{}] is not `{MASK}`", r.mask_index)));
        }
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(orig: &str) -> MaskedContext {
        let toks: Vec<String> = ["hostile", orig, "in"].iter().map(|s| s.to_string()).collect();
        MaskedContext::from_span("s1", &toks, 1, 2).unwrap()
    }

    #[test]
    fn unsorted_candidates_rejected() {
        let text = r#"{"id":"s1@1:2","candidates":[{"token":"a","logit":1.0},{"token":"b","logit":2.0}]}"#;
        match parse_logits(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 1);
                assert_eq!(message, "candidates not sorted");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn original_dropped_at_lookup() {
        let text = r#"{"id":"s1@1:2","candidates":[{"token":"fire","logit":3.0},{"token":"forces","logit":2.0}],"extra":1}"#;
        let l = parse_logits(text).unwrap();
        let c = l.lookup(&ctx("fire"), 10).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].surface, vec!["forces"]);
        assert_eq!(l.dropped_originals(), 1);
    }

    #[test]
    fn unknown_id_is_an_error() {
        let l = parse_logits("").unwrap();
        assert!(matches!(l.lookup(&ctx("fire"), 3), Err(Error::UnknownInstance(_))));
    }
}
