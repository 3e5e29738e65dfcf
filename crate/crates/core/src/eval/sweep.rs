//! F1 of the completion pipeline and of a plain autoencoder as the input
//! incompleteness grows.

use serde::{Deserialize, Serialize};

use super::metrics::MetricsReport;
use crate::autoencoder::Autoencoder;
use crate::error::{Error, Result};
use crate::gan::Pipeline;
use crate::nn::Mode;
use crate::point::PointSet;
use crate::rng::Rng;
use crate::synth::{corrupt, CorruptionSpec};

pub const STANDARD_R_GRID: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: f64,
    pub f1_ae: f64,
    pub f1_ours: f64,
    pub emd_ae: f64,
    pub emd_ours: f64,
}

/// Corrupts every clean test shape at each `r`, using one seed per shape
/// across all levels so the removed regions grow around the same pick.
pub fn corrupt_at_level(clean: &[PointSet], r: f64, sigma: f64, seed: u64) -> Result<Vec<PointSet>> {
    clean
        .iter()
        .enumerate()
        .map(|(i, c)| corrupt(c, &CorruptionSpec::new(r, sigma, Rng::derive(seed, i as u64).next_u64())?))
        .collect()
}

pub fn incompleteness_sweep(
    pipeline: &mut Pipeline,
    baseline: &mut Autoencoder,
    clean_test: &[PointSet],
    r_values: &[f64],
    sigma: f64,
    seed: u64,
    eps: f64,
) -> Result<Vec<SweepRow>> {
    if clean_test.is_empty() {
        return Err(Error::EmptySet);
    }
    baseline.set_mode(Mode::Infer);
    let mut rows = Vec::with_capacity(r_values.len());
    for &r in r_values {
        let partials = corrupt_at_level(clean_test, r, sigma, seed)?;
        let ae_out = baseline.reconstruct(&partials)?;
        let ours = pipeline.complete_batch(&partials)?;
        let ae = MetricsReport::evaluate(&ae_out, clean_test, eps)?;
        let us = MetricsReport::evaluate(&ours, clean_test, eps)?;
        rows.push(SweepRow {
            r,
            f1_ae: ae.mean.f1,
            f1_ours: us.mean.f1,
            emd_ae: ae.mean.emd,
            emd_ours: us.mean.emd,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("r,f1_ae,f1_ours,emd_ae,emd_ours\n");
    for row in rows {
        out.push_str(&format!(
            "{:.2},{:.6},{:.6},{:.6},{:.6}\n",
            row.r, row.f1_ae, row.f1_ours, row.emd_ae, row.emd_ours
        ));
    }
    out
}
