use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One Adam update of `params` in place. `t` is the 1-based step index.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    t: u64,
    hyper: &AdamConfig,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::shape(
            params.len(),
            format!("grads {} / moments {}, {}", grads.len(), state.m.len(), state.v.len()),
        ));
    }
    if t == 0 {
        return Err(Error::InvalidArgument("Adam step index starts at 1".into()));
    }
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = *hyper;
    let t = i32::try_from(t).unwrap_or(i32::MAX);
    let correction1 = 1.0 - beta1.powi(t);
    let correction2 = 1.0 - beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        let m = beta1 * state.m[i] + (1.0 - beta1) * g;
        let v = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        let m_hat = m / correction1;
        let v_hat = v / correction2;
        params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}
