//! Central finite-difference check of analytic parameter gradients.

use super::network::Network;
use crate::error::Result;
use crate::rng::Rng;

/// Anything exposing a flat parameter vector and matching gradient buffer.
pub trait Parameterized {
    fn params_flat(&self) -> Vec<f64>;
    fn set_params_flat(&mut self, values: &[f64]) -> Result<()>;
    fn grads_flat(&self) -> Vec<f64>;
    fn zero_grad(&mut self);
    /// Whether the last forward pass hit a max-pool tie.
    fn has_maxpool_tie(&self) -> bool {
        false
    }
}

impl Parameterized for Network {
    fn params_flat(&self) -> Vec<f64> {
        Network::params_flat(self)
    }

    fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        Network::set_params_flat(self, values)
    }

    fn grads_flat(&self) -> Vec<f64> {
        Network::grads_flat(self)
    }

    fn zero_grad(&mut self) {
        Network::zero_grad(self)
    }

    fn has_maxpool_tie(&self) -> bool {
        self.maxpool_tie()
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Check a seeded random subset of at most this many parameters.
    pub max_checked: Option<usize>,
    pub seed: u64,
    /// Entries where both analytic and numeric magnitudes fall below this
    /// are counted but excluded from the maximum.
    pub noise_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-6,
            max_checked: None,
            seed: 0,
            noise_floor: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
    pub below_floor: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GradCheckOutcome {
    Checked(GradCheckReport),
    Skipped { reason: String },
}

impl GradCheckOutcome {
    pub fn max_rel_error(&self) -> Option<f64> {
        match self {
            GradCheckOutcome::Checked(r) => Some(r.max_rel_error),
            GradCheckOutcome::Skipped { .. } => None,
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Compares analytic gradients against central differences.
///
/// `loss(model, with_grad)` must run a full forward pass returning the scalar
/// loss and, when `with_grad` is set, accumulate parameter gradients.
pub fn grad_check<M, F>(model: &mut M, mut loss: F, cfg: &GradCheckConfig) -> Result<GradCheckOutcome>
where
    M: Parameterized,
    F: FnMut(&mut M, bool) -> Result<f64>,
{
    model.zero_grad();
    loss(model, true)?;
    if model.has_maxpool_tie() {
        return Ok(GradCheckOutcome::Skipped {
            reason: "skipped (nondifferentiable point): max-pool tie".into(),
        });
    }
    let analytic = model.grads_flat();
    let mut params = model.params_flat();
    let mut indices: Vec<usize> = (0..params.len()).collect();
    if let Some(limit) = cfg.max_checked {
        if limit < indices.len() {
            let mut rng = Rng::new(cfg.seed);
            rng.shuffle(&mut indices);
            indices.truncate(limit);
            indices.sort_unstable();
        }
    }
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: None,
        checked: 0,
        below_floor: 0,
    };
    for &i in &indices {
        let orig = params[i];
        params[i] = orig + cfg.step;
        model.set_params_flat(&params)?;
        let up = loss(model, false)?;
        params[i] = orig - cfg.step;
        model.set_params_flat(&params)?;
        let down = loss(model, false)?;
        params[i] = orig;
        let numeric = (up - down) / (2.0 * cfg.step);
        report.checked += 1;
        if analytic[i].abs().max(numeric.abs()) < cfg.noise_floor {
            report.below_floor += 1;
            continue;
        }
        let err = relative_error(analytic[i], numeric);
        if err > report.max_rel_error || report.worst_index.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst_index = Some(i);
        }
    }
    model.set_params_flat(&params)?;
    Ok(GradCheckOutcome::Checked(report))
}
