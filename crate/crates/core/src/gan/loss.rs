//! Adversarial and reconstruction losses with their gradients.

use serde::{Deserialize, Serialize};

use crate::distance::{emd_with_grad, hausdorff_directed_grad, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::point::{Point, PointSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanLossKind {
    /// Squared-error targets 1 (real) and 0 (fake).
    LeastSquares,
    /// Cross-entropy on logits, with the non-saturating generator loss.
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconKind {
    /// Soft directed Hausdorff from the input to the completion.
    Hausdorff,
    Emd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub recon: ReconKind,
    pub tau: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64, recon: ReconKind) -> Result<Self> {
        let w = Self { alpha, beta, recon, tau: DEFAULT_TAU };
        w.validate()?;
        Ok(w)
    }

    /// alpha = 0.25, beta = 0.75 with the Hausdorff term.
    pub fn standard() -> Self {
        Self { alpha: 0.25, beta: 0.75, recon: ReconKind::Hausdorff, tau: DEFAULT_TAU }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha + self.beta > 0.0) {
            return Err(Error::invalid(format!(
                "loss weights need alpha, beta >= 0 and alpha + beta > 0 (got {}, {})",
                self.alpha, self.beta
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("temperature must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    /// alpha * adversarial + beta * reconstruction.
    pub fn combine(&self, adversarial: f64, reconstruction: f64) -> f64 {
        self.alpha * adversarial + self.beta * reconstruction
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Discriminator loss and its gradients with respect to the real and fake
/// outputs.
pub fn disc_loss_grad(kind: GanLossKind, real: &[f64], fake: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let (nr, nf) = (real.len() as f64, fake.len() as f64);
    match kind {
        GanLossKind::LeastSquares => {
            let loss = mean(&real.iter().map(|f| (f - 1.0).powi(2)).collect::<Vec<_>>())
                + mean(&fake.iter().map(|f| f * f).collect::<Vec<_>>());
            let dr = real.iter().map(|f| 2.0 * (f - 1.0) / nr).collect();
            let df = fake.iter().map(|f| 2.0 * f / nf).collect();
            (loss, dr, df)
        }
        GanLossKind::Log => {
            let loss = mean(&real.iter().map(|&f| softplus(-f)).collect::<Vec<_>>())
                + mean(&fake.iter().map(|&f| softplus(f)).collect::<Vec<_>>());
            let dr = real.iter().map(|&f| (sigmoid(f) - 1.0) / nr).collect();
            let df = fake.iter().map(|&f| sigmoid(f) / nf).collect();
            (loss, dr, df)
        }
    }
}

/// mean (F(real) - 1)^2 + mean F(fake)^2.
pub fn disc_loss(real: &[f64], fake: &[f64]) -> f64 {
    disc_loss_grad(GanLossKind::LeastSquares, real, fake).0
}

/// Generator adversarial term and its gradient with respect to the fake
/// outputs.
pub fn adversarial_grad(kind: GanLossKind, fake: &[f64]) -> (f64, Vec<f64>) {
    let n = fake.len() as f64;
    match kind {
        GanLossKind::LeastSquares => (
            mean(&fake.iter().map(|f| (f - 1.0).powi(2)).collect::<Vec<_>>()),
            fake.iter().map(|f| 2.0 * (f - 1.0) / n).collect(),
        ),
        GanLossKind::Log => (
            mean(&fake.iter().map(|&f| softplus(-f)).collect::<Vec<_>>()),
            fake.iter().map(|&f| (sigmoid(f) - 1.0) / n).collect(),
        ),
    }
}

/// Reconstruction term for one sample and its gradient with respect to the
/// completion. The Hausdorff variant is directed from `target` (the input,
/// or ground truth in supervised runs) to the completion.
pub fn recon_grad(kind: ReconKind, tau: f64, target: &PointSet, completion: &PointSet) -> Result<(f64, Vec<Point>)> {
    match kind {
        ReconKind::Hausdorff => hausdorff_directed_grad(target, completion, tau),
        ReconKind::Emd => emd_with_grad(completion, target),
    }
}

/// alpha * mean (F(fake) - 1)^2 + beta * mean reconstruction, with the
/// reconstruction term in its differentiable form.
pub fn gen_loss(fake: &[f64], inputs: &[PointSet], completions: &[PointSet], w: &LossWeights) -> Result<f64> {
    if inputs.len() != completions.len() {
        return Err(Error::SizeMismatch { left: inputs.len(), right: completions.len() });
    }
    if inputs.is_empty() || fake.is_empty() {
        return Err(Error::EmptySet);
    }
    let adv = adversarial_grad(GanLossKind::LeastSquares, fake).0;
    let mut recon = 0.0;
    for (s, c) in inputs.iter().zip(completions) {
        recon += recon_grad(w.recon, w.tau, s, c)?.0;
    }
    Ok(w.combine(adv, recon / inputs.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_disc_examples() {
        assert_eq!(disc_loss(&[1.0], &[0.0]), 0.0);
        assert!((disc_loss(&[0.5], &[0.5]) - 0.5).abs() < 1e-15);
        assert!((disc_loss(&[0.0, 0.0], &[1.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_generator_examples() {
        let w = LossWeights::standard();
        assert_eq!((w.alpha, w.beta), (0.25, 0.75));
        assert!((w.combine(1.0, 0.2) - 0.40).abs() < 1e-15);
        assert_eq!(w.combine(0.0, 0.0), 0.0);
        let pure = LossWeights::new(1.0, 0.0, ReconKind::Hausdorff).unwrap();
        let f = [0.3, -0.2];
        assert_eq!(pure.combine(adversarial_grad(GanLossKind::LeastSquares, &f).0, 123.0), adversarial_grad(GanLossKind::LeastSquares, &f).0);
    }

    #[test]
    fn gen_loss_zero_at_optimum() {
        let s = PointSet::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        let w = LossWeights { recon: ReconKind::Emd, ..LossWeights::standard() };
        assert_eq!(gen_loss(&[1.0, 1.0], &[s.clone()], &[s], &w).unwrap(), 0.0);
    }

    #[test]
    fn invalid_weights_rejected() {
        assert!(LossWeights::new(0.0, 0.0, ReconKind::Emd).is_err());
        assert!(LossWeights::new(-1.0, 1.0, ReconKind::Emd).is_err());
    }

    fn fd_check(f: impl Fn(&[f64]) -> f64, x: &[f64], g: &[f64]) {
        let h = 1e-6;
        for i in 0..x.len() {
            let mut up = x.to_vec();
            up[i] += h;
            let mut dn = x.to_vec();
            dn[i] -= h;
            let num = (f(&up) - f(&dn)) / (2.0 * h);
            assert!(crate::nn::gradcheck::relative_error(g[i], num) < 1e-6, "{i}: {} vs {num}", g[i]);
        }
    }

    #[test]
    fn adversarial_gradients_match_differences() {
        let real = [0.3, -1.2, 2.0];
        let fake = [0.7, -0.4];
        for kind in [GanLossKind::LeastSquares, GanLossKind::Log] {
            let (_, dr, df) = disc_loss_grad(kind, &real, &fake);
            fd_check(|r| disc_loss_grad(kind, r, &fake).0, &real, &dr);
            fd_check(|f| disc_loss_grad(kind, &real, f).0, &fake, &df);
            let (_, dg) = adversarial_grad(kind, &fake);
            fd_check(|f| adversarial_grad(kind, f).0, &fake, &dg);
        }
    }

    #[test]
    fn log_loss_stable_for_large_logits() {
        let (l, dr, df) = disc_loss_grad(GanLossKind::Log, &[800.0], &[-800.0]);
        assert!(l.is_finite() && l < 1e-300);
        assert!(dr[0].is_finite() && df[0].is_finite());
    }
}
