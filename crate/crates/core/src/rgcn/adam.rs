use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// Moment estimates over the flattened parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams, hyper: AdamHyper) -> Self {
        let n = params.n_params();
        Self {
            hyper,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let g = grads.to_flat();
    let mut p = params.to_flat();
    if g.len() != p.len() || state.first_moment.len() != p.len() {
        return Err(Error::InternalConsistency(format!(
            "Adam shapes disagree: {} params, {} grads, {} moments",
            p.len(),
            g.len(),
            state.first_moment.len()
        )));
    }
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("gradient entry {i} is not finite")));
    }
    let AdamHyper { beta1, beta2, eps } = state.hyper;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for i in 0..p.len() {
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        *m = beta1 * *m + (1.0 - beta1) * g[i];
        *v = beta2 * *v + (1.0 - beta2) * g[i] * g[i];
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    params.copy_from_flat(&p)
}
