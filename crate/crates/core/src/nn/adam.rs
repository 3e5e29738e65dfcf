use serde::{Deserialize, Serialize};

use super::network::Network;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn new(lr: f64, beta1: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self::new(0.001, 0.9)
    }
}

/// Per-epoch learning-rate schedule applied on top of the base rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Multiply by `factor` every `every` epochs.
    Step { every: usize, factor: f64 },
}

impl LrSchedule {
    pub fn lr_at(&self, base: f64, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::Step { every, factor } if every > 0 => base * factor.powi((epoch / every) as i32),
            LrSchedule::Step { .. } => base,
        }
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        Self {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::SizeMismatch {
                left: params.len().max(grads.len()),
                right: self.m.len(),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(i));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }

    pub fn step_network(&mut self, net: &mut Network) -> Result<()> {
        let mut params = net.params_flat();
        let grads = net.grads_flat();
        self.step(&mut params, &grads)?;
        net.set_params_flat(&params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_schedule() {
        let s = LrSchedule::Step { every: 10, factor: 0.5 };
        assert_eq!(s.lr_at(1.0, 9), 1.0);
        assert_eq!(s.lr_at(1.0, 10), 0.5);
        assert_eq!(s.lr_at(1.0, 25), 0.25);
        assert_eq!(LrSchedule::Constant.lr_at(0.3, 1000), 0.3);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(AdamConfig::default(), 3);
        let mut p = vec![1.0, -2.0, 3.0];
        s.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_closed_form() {
        let mut s = AdamState::new(AdamConfig::new(0.001, 0.9), 1);
        let mut p = vec![0.0];
        s.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] - (-0.001 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn moments_follow_recurrence() {
        let cfg = AdamConfig::new(0.01, 0.5);
        let mut s = AdamState::new(cfg, 1);
        let mut p = vec![0.0];
        let grads = [1.0, -0.5, 2.0];
        let (mut m, mut v, mut expect) = (0.0f64, 0.0f64, 0.0f64);
        for (t, &g) in grads.iter().enumerate() {
            s.step(&mut p, &[g]).unwrap();
            m = 0.5 * m + 0.5 * g;
            v = 0.999 * v + 0.001 * g * g;
            let tt = (t + 1) as i32;
            expect -= 0.01 * (m / (1.0 - 0.5f64.powi(tt)))
                / ((v / (1.0 - 0.999f64.powi(tt))).sqrt() + 1e-8);
            assert_eq!(s.t, (t + 1) as u64);
            assert!((s.m[0] - m).abs() < 1e-15 && (s.v[0] - v).abs() < 1e-15);
            assert!((p[0] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite_and_mismatch() {
        let mut s = AdamState::new(AdamConfig::default(), 2);
        let mut p = vec![0.0; 2];
        assert!(matches!(
            s.step(&mut p, &[0.0, f64::NAN]),
            Err(Error::NonFiniteGradient(1))
        ));
        assert!(s.step(&mut p, &[0.0]).is_err());
    }
}
