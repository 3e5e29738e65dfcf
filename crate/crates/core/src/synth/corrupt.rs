//! Partial-scan corruption: regional removal, noise and re-duplication.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{duplicate_to_count, nearest_neighbors, PointSet};
use crate::rng::Rng;

pub const DEFAULT_SIGMA: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSpec {
    /// Fraction of points removed around a random pick, in [0, 1).
    pub r: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(r: f64, sigma: f64, seed: u64) -> Result<Self> {
        let spec = Self { r, sigma, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.r) {
            return Err(Error::invalid(format!("incompleteness r = {} outside [0, 1)", self.r)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("noise sigma = {} must be >= 0", self.sigma)));
        }
        Ok(())
    }

    pub fn removed_count(&self, n: usize) -> usize {
        (n as f64 * self.r).floor() as usize
    }
}

/// Indices that survive removal around `pick`: the pick itself and its
/// nearest neighbors go, `removed` points in total.
pub fn surviving_indices(clean: &PointSet, pick: usize, removed: usize) -> Result<Vec<usize>> {
    let n = clean.len();
    if removed >= n {
        return Err(Error::invalid(format!("cannot remove {removed} of {n} points")));
    }
    let mut gone = vec![false; n];
    if removed > 0 {
        gone[pick] = true;
        let order = nearest_neighbors(clean, clean.get(pick), n)?;
        order
            .into_iter()
            .filter(|&i| i != pick)
            .take(removed - 1)
            .for_each(|i| gone[i] = true);
    }
    Ok((0..n).filter(|&i| !gone[i]).collect())
}

/// Corruption with an explicit pick. The rng drives noise and duplication.
pub fn corrupt_at(clean: &PointSet, pick: usize, spec: &CorruptionSpec, rng: &mut Rng) -> Result<PointSet> {
    spec.validate()?;
    let n = clean.len();
    if pick >= n {
        return Err(Error::invalid(format!("pick {pick} out of range for {n} points")));
    }
    let keep = surviving_indices(clean, pick, spec.removed_count(n))?;
    let mut pts: Vec<_> = keep.iter().map(|&i| clean.get(i)).collect();
    if spec.sigma > 0.0 {
        for p in &mut pts {
            for c in p.iter_mut() {
                *c += spec.sigma * rng.normal();
            }
        }
    }
    duplicate_to_count(&PointSet::new(pts)?, n, rng)
}

/// Picks a point uniformly using the corruption seed, removes its neighborhood,
/// adds Gaussian noise to the survivors and duplicates back to `n` points.
pub fn corrupt(clean: &PointSet, spec: &CorruptionSpec) -> Result<PointSet> {
    spec.validate()?;
    if spec.removed_count(clean.len()) >= clean.len() {
        return Err(Error::invalid("incompleteness removes every point"));
    }
    let mut rng = Rng::new(spec.seed);
    let pick = rng.below(clean.len());
    corrupt_at(clean, pick, spec, &mut rng)
}
