//! Trainable weights and their textual snapshot format.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::vocab::Vocab;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_emb: usize,
    pub d_rep: usize,
    pub d_hid: usize,
    pub window: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            d_emb: 32,
            d_rep: 32,
            d_hid: 64,
            window: 2,
        }
    }
}

impl ModelDims {
    pub fn window_len(&self) -> usize {
        2 * self.window + 1
    }
}

/// Every trainable tensor. Also used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTensors {
    pub embedding: Tensor,
    pub enc_w: Tensor,
    pub enc_b: Tensor,
    pub rel_w1: Tensor,
    pub rel_b1: Tensor,
    pub rel_w2: Tensor,
    pub rel_b2: Tensor,
}

pub const TENSOR_NAMES: [&str; 7] = ["embedding", "enc_w", "enc_b", "rel_w1", "rel_b1", "rel_w2", "rel_b2"];

impl ParamTensors {
    pub fn zeros(vocab_size: usize, dims: &ModelDims) -> Self {
        ParamTensors {
            embedding: Tensor::zeros(vocab_size, dims.d_emb),
            enc_w: Tensor::zeros(dims.window_len() * dims.d_emb, dims.d_rep),
            enc_b: Tensor::zeros(1, dims.d_rep),
            rel_w1: Tensor::zeros(3 * dims.d_rep, dims.d_hid),
            rel_b1: Tensor::zeros(1, dims.d_hid),
            rel_w2: Tensor::zeros(dims.d_hid, 1),
            rel_b2: Tensor::zeros(1, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.iter_mut().for_each(|(_, t)| t.data.iter_mut().for_each(|v| *v = 0.0));
        z
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Tensor)> {
        TENSOR_NAMES.into_iter().zip([
            &self.embedding,
            &self.enc_w,
            &self.enc_b,
            &self.rel_w1,
            &self.rel_b1,
            &self.rel_w2,
            &self.rel_b2,
        ])
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&'static str, &mut Tensor)> {
        TENSOR_NAMES.into_iter().zip([
            &mut self.embedding,
            &mut self.enc_w,
            &mut self.enc_b,
            &mut self.rel_w1,
            &mut self.rel_b1,
            &mut self.rel_w2,
            &mut self.rel_b2,
        ])
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.iter().find(|(n, _)| *n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.iter_mut().find(|(n, _)| *n == name).map(|(_, t)| t)
    }

    pub fn same_shape(&self, other: &ParamTensors) -> bool {
        self.iter().zip(other.iter()).all(|((_, a), (_, b))| a.shape() == b.shape())
    }

    /// First tensor holding a non-finite entry.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.iter().find(|(_, t)| !t.is_finite()).map(|(n, _)| n)
    }

    pub fn max_abs_diff(&self, other: &ParamTensors) -> f64 {
        self.iter()
            .zip(other.iter())
            .flat_map(|((_, a), (_, b))| a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Encoder and similarity-head weights together with the vocabulary they index.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub vocab: Vocab,
    pub tensors: ParamTensors,
}

fn fill_uniform<R: Rng + ?Sized>(rng: &mut R, t: &mut Tensor, bound: f64) {
    for v in t.data.iter_mut() {
        *v = rng.gen_range(-bound..=bound);
    }
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl ModelParams {
    /// Glorot-uniform matrices, embeddings in ±0.1, zero biases.
    pub fn init<R: Rng + ?Sized>(vocab: Vocab, dims: ModelDims, rng: &mut R) -> Self {
        let mut t = ParamTensors::zeros(vocab.len(), &dims);
        fill_uniform(rng, &mut t.embedding, 0.1);
        let (r, c) = t.enc_w.shape();
        fill_uniform(rng, &mut t.enc_w, glorot(r, c));
        let (r, c) = t.rel_w1.shape();
        fill_uniform(rng, &mut t.rel_w1, glorot(r, c));
        let (r, c) = t.rel_w2.shape();
        fill_uniform(rng, &mut t.rel_w2, glorot(r, c));
        ModelParams { dims, vocab, tensors: t }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = ParamTensors::zeros(self.vocab.len(), &self.dims);
        for ((name, a), (_, b)) in self.tensors.iter().zip(expected.iter()) {
            if a.shape() != b.shape() {
                return Err(Error::DimensionMismatch(format!(
                    "`{name}` has shape {:?}, expected {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        if let Some(name) = self.tensors.first_non_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        Ok(())
    }

    /// Text snapshot: dims, vocabulary, then each tensor as
    /// `tensor <name> <rows> <cols>` followed by one line per row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let d = &self.dims;
        writeln!(out, "dims {} {} {} {}", d.d_emb, d.d_rep, d.d_hid, d.window).unwrap();
        writeln!(out, "vocab {}", self.vocab.len()).unwrap();
        for t in self.vocab.tokens() {
            writeln!(out, "{t}").unwrap();
        }
        for (name, t) in self.tensors.iter() {
            writeln!(out, "tensor {name} {} {}", t.rows, t.cols).unwrap();
            for r in 0..t.rows {
                let line: Vec<String> = t.row(r).iter().map(|v| format!("{v:?}")).collect();
                writeln!(out, "{}", line.join(" ")).unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("unexpected end of file, expected {what}"),
            })
        };
        let bad = |line: usize, message: String| Error::Parse { line: line + 1, message };
        let nums = |line: usize, s: &str| -> Result<Vec<usize>> {
            s.split_whitespace()
                .map(|x| x.parse::<usize>().map_err(|e| bad(line, e.to_string())))
                .collect()
        };

        let (i, l) = next("dims")?;
        let d = l
            .strip_prefix("dims ")
            .ok_or_else(|| bad(i, "expected `dims`".into()))?;
        let d = nums(i, d)?;
        if d.len() != 4 {
            return Err(bad(i, "dims needs 4 values".into()));
        }
        let dims = ModelDims {
            d_emb: d[0],
            d_rep: d[1],
            d_hid: d[2],
            window: d[3],
        };
        let (i, l) = next("vocab")?;
        let n: usize = l
            .strip_prefix("vocab ")
            .ok_or_else(|| bad(i, "expected `vocab`".into()))?
            .trim()
            .parse()
            .map_err(|e: std::num::ParseIntError| bad(i, e.to_string()))?;
        let mut tokens = Vec::with_capacity(n);
        for _ in 0..n {
            tokens.push(next("vocab token")?.1.to_string());
        }
        let vocab = Vocab::from_tokens(tokens.iter().skip(3));
        if vocab.tokens() != tokens.as_slice() {
            return Err(Error::Parse {
                line: 3,
                message: "vocabulary must start with the reserved tokens and hold no duplicates".into(),
            });
        }

        let mut tensors = ParamTensors::zeros(vocab.len(), &dims);
        for name in TENSOR_NAMES {
            let (i, l) = next("tensor header")?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "tensor" || parts[1] != name {
                return Err(bad(i, format!("expected header for `{name}`")));
            }
            let rows: usize = parts[2].parse().map_err(|e: std::num::ParseIntError| bad(i, e.to_string()))?;
            let cols: usize = parts[3].parse().map_err(|e: std::num::ParseIntError| bad(i, e.to_string()))?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (i, l) = next("tensor row")?;
                let row: Vec<f64> = l
                    .split_whitespace()
                    .map(|x| x.parse::<f64>().map_err(|e| bad(i, e.to_string())))
                    .collect::<Result<_>>()?;
                if row.len() != cols {
                    return Err(bad(i, format!("row has {} values, expected {cols}", row.len())));
                }
                data.extend(row);
            }
            *tensors.get_mut(name).expect("known name") = Tensor::from_vec(rows, cols, data);
        }
        let params = ModelParams { dims, vocab, tensors };
        params.validate()?;
        Ok(params)
    }
}
