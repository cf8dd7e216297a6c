//! Templated synthetic corpora with skewed trigger lexicons and homographs.
//!
//! A sentence is filler words around one trigger. The trigger is preceded by
//! a shared marker word; positions -2, +1 and +2 come from the type's own
//! context pools, which are drawn from a context vocabulary shared by all types.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{EventInstance, EventSpan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_types: usize,
    pub instances_per_type: usize,
    /// Trigger lexicon size per type.
    pub lexicon_size: usize,
    /// Words per context slot per type.
    pub context_size: usize,
    /// Context words shared by all types; each slot pool is drawn from it.
    pub context_vocab: usize,
    /// Shared filler words.
    pub function_words: usize,
    /// Shared words that always precede a trigger.
    pub marker_words: usize,
    /// Share of a type's trigger occurrences taken by its top five triggers.
    pub dominance: f64,
    /// Fraction of types whose dominant trigger is also a trigger of another type.
    pub ambiguity_rate: f64,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_types: 20,
            instances_per_type: 500,
            lexicon_size: 12,
            context_size: 2,
            context_vocab: 60,
            function_words: 40,
            marker_words: 4,
            dominance: 0.78,
            ambiguity_rate: 1.0,
            min_len: 6,
            max_len: 14,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_types < 2 {
            return bad("n_types must be at least 2");
        }
        if self.lexicon_size < 5 {
            return bad("lexicon_size must be at least 5");
        }
        if self.instances_per_type == 0 || self.context_size == 0 || self.function_words == 0 || self.marker_words == 0 {
            return bad("instances_per_type, context_size, function_words and marker_words must be positive");
        }
        if !(self.dominance > 0.0 && self.dominance <= 1.0) {
            return bad("dominance must lie in (0, 1]");
        }
        if self.context_vocab < self.context_size {
            return bad("context_vocab must be at least context_size");
        }
        if self.lexicon_size == 5 && self.dominance < 1.0 {
            return bad("a five-word lexicon forces dominance 1");
        }
        if !(0.0..=1.0).contains(&self.ambiguity_rate) {
            return bad("ambiguity_rate must lie in [0, 1]");
        }
        if self.min_len < 5 || self.min_len > self.max_len {
            return bad("need 5 <= min_len <= max_len");
        }
        Ok(())
    }
}

/// Per-type lexicons and context pools of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthWorld {
    pub types: Vec<String>,
    /// Triggers by rank, most frequent first.
    pub lexicons: Vec<Vec<String>>,
    /// Left-2, right-1, right-2 pools per type.
    pub contexts: Vec<[Vec<String>; 3]>,
    pub function_words: Vec<String>,
    pub markers: Vec<String>,
    /// `(type receiving, type donating, word)`.
    pub homographs: Vec<(usize, usize, String)>,
}

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr"];
const NUCLEI: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];

fn fresh_word<R: Rng>(rng: &mut R, used: &mut HashSet<String>) -> String {
    loop {
        let n = rng.gen_range(2..=3);
        let w: String = (0..n)
            .map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), NUCLEI.choose(rng).unwrap()))
            .collect();
        if used.insert(w.clone()) {
            return w;
        }
    }
}

/// Occurrence counts per lexicon rank: the top five take `round(dominance·n)`
/// in proportion 8:5:4:3:2, the tail shares the rest evenly.
pub fn rank_quotas(n: usize, lexicon_size: usize, dominance: f64) -> Vec<usize> {
    let head = (dominance * n as f64).round() as usize;
    let shape = [8.0, 5.0, 4.0, 3.0, 2.0];
    let total: f64 = shape.iter().sum();
    let mut q: Vec<usize> = shape.iter().map(|s| (s / total * head as f64).floor() as usize).collect();
    let mut rem = head - q.iter().sum::<usize>();
    for slot in q.iter_mut() {
        if rem == 0 {
            break;
        }
        *slot += 1;
        rem -= 1;
    }
    let tail_n = lexicon_size - 5;
    let tail = n - head;
    for i in 0..tail_n {
        q.push(tail / tail_n + (i < tail % tail_n) as usize);
    }
    q
}

pub fn build_world<R: Rng>(config: &SynthConfig, rng: &mut R) -> Result<SynthWorld> {
    config.validate()?;
    let mut used = HashSet::new();
    let types: Vec<String> = (0..config.n_types).map(|i| format!("Type{i:02}")).collect();
    let mut lexicons: Vec<Vec<String>> = (0..config.n_types)
        .map(|_| (0..config.lexicon_size).map(|_| fresh_word(rng, &mut used)).collect())
        .collect();
    let shared: Vec<String> = (0..config.context_vocab).map(|_| fresh_word(rng, &mut used)).collect();
    let contexts: Vec<[Vec<String>; 3]> = (0..config.n_types)
        .map(|_| std::array::from_fn(|_| shared.choose_multiple(rng, config.context_size).cloned().collect()))
        .collect();
    let function_words: Vec<String> = (0..config.function_words).map(|_| fresh_word(rng, &mut used)).collect();
    let markers: Vec<String> = (0..config.marker_words).map(|_| fresh_word(rng, &mut used)).collect();

    let n_shared = (config.ambiguity_rate * config.n_types as f64).round() as usize;
    let mut donors: Vec<usize> = (0..config.n_types).collect();
    donors.shuffle(rng);
    donors.truncate(n_shared);
    donors.sort_unstable();
    let mut homographs = Vec::new();
    for &donor in &donors {
        let mut receiver = rng.gen_range(0..config.n_types - 1);
        if receiver >= donor {
            receiver += 1;
        }
        let word = lexicons[donor][0].clone();
        let free: Vec<usize> = (1..5)
            .filter(|&k| !homographs.iter().any(|(r, _, w)| *r == receiver && lexicons[receiver][k] == *w))
            .collect();
        if free.is_empty() || lexicons[receiver].contains(&word) {
            continue;
        }
        let rank = *free.choose(rng).unwrap();
        lexicons[receiver][rank] = word.clone();
        homographs.push((receiver, donor, word));
    }
    Ok(SynthWorld {
        types,
        lexicons,
        contexts,
        function_words,
        markers,
        homographs,
    })
}

fn sentence<R: Rng>(world: &SynthWorld, t: usize, trigger: &str, config: &SynthConfig, rng: &mut R) -> (Vec<String>, usize) {
    let len = rng.gen_range(config.min_len..=config.max_len);
    let pos = rng.gen_range(0..len);
    let ctx = &world.contexts[t];
    let tokens = (0..len)
        .map(|i| {
            let off = i as isize - pos as isize;
            let pool = match off {
                0 => return trigger.to_string(),
                -2 => &ctx[0],
                -1 => &world.markers,
                1 => &ctx[1],
                2 => &ctx[2],
                _ => &world.function_words,
            };
            pool.choose(rng).unwrap().clone()
        })
        .collect();
    (tokens, pos)
}

/// Generates `instances_per_type` single-trigger sentences per type.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<(SynthWorld, Vec<EventInstance>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = build_world(config, &mut rng)?;
    let quotas = rank_quotas(config.instances_per_type, config.lexicon_size, config.dominance);
    let mut out = Vec::with_capacity(config.n_types * config.instances_per_type);
    for t in 0..config.n_types {
        let mut ranks: Vec<usize> = quotas.iter().enumerate().flat_map(|(r, &q)| std::iter::repeat_n(r, q)).collect();
        ranks.shuffle(&mut rng);
        for (i, r) in ranks.into_iter().enumerate() {
            let (tokens, pos) = sentence(&world, t, &world.lexicons[t][r], config, &mut rng);
            out.push(EventInstance {
                id: format!("{}-{i:04}", world.types[t].to_lowercase()),
                tokens,
                events: vec![EventSpan {
                    event_type: world.types[t].clone(),
                    start: pos,
                    end: pos + 1,
                }],
            });
        }
    }
    Ok((world, out))
}

/// Share of each type's trigger occurrences covered by its five most frequent surfaces.
pub fn top5_coverage(instances: &[EventInstance]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<&str, BTreeMap<String, usize>> = BTreeMap::new();
    for inst in instances {
        for e in &inst.events {
            let surface = inst.tokens[e.start..e.end].join(" ");
            *counts.entry(&e.event_type).or_default().entry(surface).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|(t, c)| {
            let total: usize = c.values().sum();
            let mut v: Vec<usize> = c.into_values().collect();
            v.sort_unstable_by(|a, b| b.cmp(a));
            (t.to_string(), v.iter().take(5).sum::<usize>() as f64 / total as f64)
        })
        .collect()
}

/// Splits by event type into train/dev/test with the given type fractions.
pub fn split_by_type(
    instances: &[EventInstance],
    fractions: (f64, f64),
    seed: u64,
) -> (Vec<EventInstance>, Vec<EventInstance>, Vec<EventInstance>) {
    let mut types = super::data::event_types(instances);
    types.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = types.len();
    let n_train = ((fractions.0 * n as f64).round() as usize).clamp(1, n.saturating_sub(2).max(1));
    let n_dev = ((fractions.1 * n as f64).round() as usize).clamp(1, (n - n_train).saturating_sub(1).max(1));
    let assign: BTreeMap<&str, usize> = types
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), if i < n_train { 0 } else if i < n_train + n_dev { 1 } else { 2 }))
        .collect();
    let mut splits = (Vec::new(), Vec::new(), Vec::new());
    for inst in instances {
        let slot = inst.events.first().map(|e| assign[e.event_type.as_str()]).unwrap_or(0);
        match slot {
            0 => splits.0.push(inst.clone()),
            1 => splits.1.push(inst.clone()),
            _ => splits.2.push(inst.clone()),
        }
    }
    splits
}
