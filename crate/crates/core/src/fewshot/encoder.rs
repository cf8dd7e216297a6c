//! Windowed token encoder: `r_j = tanh(W · [e_{j-w}; …; e_{j+w}] + b)`.
//! Positions outside the sentence read the PAD embedding.

use super::params::{ModelParams, ParamTensors};
use super::vocab::PAD_ID;

/// Token ids feeding position `j`, padded at the sentence edges.
pub fn window_ids(ids: &[usize], j: usize, window: usize) -> Vec<usize> {
    let j = j as isize;
    let w = window as isize;
    (j - w..=j + w)
        .map(|k| {
            if k < 0 || k as usize >= ids.len() {
                PAD_ID
            } else {
                ids[k as usize]
            }
        })
        .collect()
}

/// Same window with the centre token replaced.
pub fn window_ids_with_center(ids: &[usize], j: usize, window: usize, center: usize) -> Vec<usize> {
    let mut w = window_ids(ids, j, window);
    w[window] = center;
    w
}

/// Representation of one window.
pub fn encode_window(params: &ModelParams, window: &[usize]) -> Vec<f64> {
    let t = &params.tensors;
    let d_emb = params.dims.d_emb;
    let mut z = t.enc_b.data.clone();
    for (slot, &id) in window.iter().enumerate() {
        let e = t.embedding.row(id);
        for (k, &x) in e.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let w_row = t.enc_w.row(slot * d_emb + k);
            for (zc, w) in z.iter_mut().zip(w_row) {
                *zc += x * w;
            }
        }
    }
    z.iter_mut().for_each(|v| *v = v.tanh());
    z
}

/// One representation per token id.
pub fn encode_ids(params: &ModelParams, ids: &[usize]) -> Vec<Vec<f64>> {
    (0..ids.len())
        .map(|j| encode_window(params, &window_ids(ids, j, params.dims.window)))
        .collect()
}

/// One representation per token; unknown tokens map to the UNK embedding.
pub fn encode<S: AsRef<str>>(params: &ModelParams, tokens: &[S]) -> Vec<Vec<f64>> {
    encode_ids(params, &params.vocab.ids(tokens))
}

/// Backpropagates `d_hidden` (gradient w.r.t. the window's output) into `grads`.
pub(crate) fn backward_window(params: &ModelParams, window: &[usize], hidden: &[f64], d_hidden: &[f64], grads: &mut ParamTensors) {
    let d_emb = params.dims.d_emb;
    let dz: Vec<f64> = hidden.iter().zip(d_hidden).map(|(h, g)| g * (1.0 - h * h)).collect();
    if dz.iter().all(|v| *v == 0.0) {
        return;
    }
    for (b, g) in grads.enc_b.data.iter_mut().zip(&dz) {
        *b += g;
    }
    let t = &params.tensors;
    for (slot, &id) in window.iter().enumerate() {
        let e = t.embedding.row(id);
        let mut d_e = vec![0.0; d_emb];
        for k in 0..d_emb {
            let row_idx = slot * d_emb + k;
            let w_row = t.enc_w.row(row_idx);
            d_e[k] = w_row.iter().zip(&dz).map(|(w, g)| w * g).sum();
            let x = e[k];
            if x != 0.0 {
                for (gw, g) in grads.enc_w.row_mut(row_idx).iter_mut().zip(&dz) {
                    *gw += x * g;
                }
            }
        }
        for (ge, g) in grads.embedding.row_mut(id).iter_mut().zip(&d_e) {
            *ge += g;
        }
    }
}
