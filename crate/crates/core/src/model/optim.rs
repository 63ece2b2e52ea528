//! AdaMax: Adam with an infinity-norm second-moment accumulator.
//!
//! ```text
//! t ← t + 1
//! m ← β₁·m + (1 − β₁)·g
//! u ← max(β₂·u, |g|)
//! θ ← θ − (lr / (1 − β₁ᵗ)) · m / (u + ε)
//! ```

use serde::{Deserialize, Serialize};

pub const DEFAULT_LEARNING_RATE: f64 = 0.002;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamaxConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for AdamaxConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
        }
    }
}

impl AdamaxConfig {
    /// Bias-corrected step size for update number `t` (1-based).
    pub fn step_size(&self, t: u64) -> f64 {
        self.learning_rate / (1.0 - self.beta1.powi(t.min(i32::MAX as u64) as i32))
    }
}

/// First-moment and infinity-norm accumulators for one tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Moments {
    pub m: Vec<f64>,
    pub u: Vec<f64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            u: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// Applies one AdaMax update to `params[range]` using the matching slice of `moments`.
pub fn adamax_update(
    config: &AdamaxConfig,
    step_size: f64,
    m: &mut [f64],
    u: &mut [f64],
    params: &mut [f64],
    grads: &[f64],
) {
    debug_assert!(m.len() == params.len() && u.len() == params.len() && grads.len() == params.len());
    for k in 0..params.len() {
        let g = grads[k];
        m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g;
        u[k] = (config.beta2 * u[k]).max(g.abs());
        params[k] -= step_size * m[k] / (u[k] + EPSILON);
    }
}

/// AdaMax state for a single flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamaxState {
    pub config: AdamaxConfig,
    pub t: u64,
    pub moments: Moments,
}

impl AdamaxState {
    pub fn new(config: AdamaxConfig, n: usize) -> Self {
        Self {
            config,
            t: 0,
            moments: Moments::zeros(n),
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.moments.len(), "parameter length");
        assert_eq!(grads.len(), self.moments.len(), "gradient length");
        self.t += 1;
        let step = self.config.step_size(self.t);
        let Moments { m, u } = &mut self.moments;
        adamax_update(&self.config, step, m, u, params, grads);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut st = AdamaxState::new(AdamaxConfig::default(), 3);
        let mut p = vec![1.0, -2.0, 0.5];
        st.step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamaxConfig::default();
        let mut st = AdamaxState::new(cfg, 4);
        let mut p = vec![0.0; 4];
        let g = [3.0, -0.01, 1e-3, -250.0];
        st.step(&mut p, &g);
        for (pk, gk) in p.iter().zip(g) {
            // Δθ = lr·g/(|g|+ε)
            assert!((pk.abs() - cfg.learning_rate).abs() < cfg.learning_rate * 1e-5);
            assert_eq!(pk.signum(), -gk.signum());
        }
    }

    #[test]
    fn accumulator_dominates_decayed_history_and_current_gradient() {
        let cfg = AdamaxConfig::default();
        let mut st = AdamaxState::new(cfg, 5);
        let mut p = vec![0.0; 5];
        let mut rng = Rng::new(3);
        for step in 0..200 {
            let prev = st.moments.u.clone();
            let g: Vec<f64> = (0..5)
                .map(|k| if (step + k) % 7 == 0 { 0.0 } else { rng.uniform(-2.0, 2.0) })
                .collect();
            st.step(&mut p, &g);
            for k in 0..5 {
                assert!(st.moments.u[k] >= 0.0);
                assert!(st.moments.u[k] >= cfg.beta2 * prev[k]);
                assert!(st.moments.u[k] >= g[k].abs());
            }
        }
        assert_eq!(st.t, 200);
    }

    #[test]
    fn constant_gradient_magnitude_keeps_accumulator_nondecreasing() {
        let mut st = AdamaxState::new(AdamaxConfig::default(), 2);
        let mut p = vec![0.0; 2];
        let mut last = vec![0.0; 2];
        for s in 0..50 {
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            st.step(&mut p, &[0.5 * sign, -1.5 * sign]);
            for k in 0..2 {
                assert!(st.moments.u[k] >= last[k]);
            }
            last = st.moments.u.clone();
        }
    }
}
