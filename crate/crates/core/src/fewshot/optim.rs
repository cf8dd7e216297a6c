//! Adam with decoupled weight decay.

use super::params::{ModelParams, ParamTensors};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: ParamTensors,
    pub v: ParamTensors,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState {
            step: 0,
            m: params.tensors.zeros_like(),
            v: params.tensors.zeros_like(),
        }
    }
}

/// One optimizer step in place: `θ ← θ·(1 − lr·wd) − lr·m̂/(√v̂ + ε)`.
pub fn update_step(
    params: &mut ModelParams,
    grads: &ParamTensors,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if !params.tensors.same_shape(grads) || !params.tensors.same_shape(&state.m) || !params.tensors.same_shape(&state.v)
    {
        return Err(Error::DimensionMismatch("gradient or optimizer state shape differs from parameters".into()));
    }
    state.step += 1;
    let bc1 = 1.0 - BETA1.powi(state.step as i32);
    let bc2 = 1.0 - BETA2.powi(state.step as i32);
    let decay = 1.0 - lr * weight_decay;
    let tensors = params
        .tensors
        .iter_mut()
        .zip(grads.iter())
        .zip(state.m.iter_mut().zip(state.v.iter_mut()));
    for (((_, p), (_, g)), ((_, m), (_, v))) in tensors {
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = BETA1 * m.data[i] + (1.0 - BETA1) * gi;
            v.data[i] = BETA2 * v.data[i] + (1.0 - BETA2) * gi * gi;
            let m_hat = m.data[i] / bc1;
            let v_hat = v.data[i] / bc2;
            let mut x = p.data[i];
            if weight_decay != 0.0 {
                x *= decay;
            }
            p.data[i] = x - lr * m_hat / (v_hat.sqrt() + EPS);
        }
    }
    Ok(())
}
