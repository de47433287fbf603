use serde::{Deserialize, Serialize};

use super::layers::Param;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(mut self, learning_rate: f64) -> Self {
        self.learning_rate = learning_rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !(self.learning_rate > 0.0) || !in_unit(self.beta1) || !in_unit(self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Parameter(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// Adam optimizer state: moment estimates for each parameter slice in the
/// order the slices are presented, plus the update counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.second
    }
}

/// One bias-corrected Adam update over every parameter slice.
///
/// Moment buffers are allocated on the first call and must keep the same
/// shapes afterwards. A non-finite gradient aborts before anything is mutated.
pub fn adam_step(params: &mut [Param<'_>], state: &mut AdamState) -> Result<()> {
    for p in params.iter() {
        if p.grad.len() != p.value.len() {
            return Err(Error::shape("adam_step", p.value.len(), p.grad.len()));
        }
        if let Some(bad) = p.grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite gradient in {} at index {bad} (step {})",
                p.name,
                state.step + 1
            )));
        }
    }
    if state.first.is_empty() {
        state.first = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        state.second = state.first.clone();
    } else if state.first.len() != params.len()
        || state.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.value.len())
    {
        return Err(Error::shape(
            "adam_step",
            "parameters shaped like the first update",
            "a different parameter layout",
        ));
    }

    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for ((p, m), v) in params.iter_mut().zip(&mut state.first).zip(&mut state.second) {
        for i in 0..p.value.len() {
            let g = p.grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p.value[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}
