//! Occupancy-grid Jensen-Shannon divergence between cloud collections, and
//! a nearest-centroid family classifier on latent codes.

use serde::{Deserialize, Serialize};

use crate::autoencoder::LatentCode;
use crate::error::{Error, Result};
use crate::point::PointSet;
use crate::rng::Rng;

pub const DEFAULT_GRID: usize = 32;

/// Normalized point counts over a `g^3` grid on `[-1, 1]^3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyDistribution {
    pub resolution: usize,
    pub probs: Vec<f64>,
    /// Points that fell outside the cube and were clamped to its boundary.
    pub clamped: usize,
}

impl OccupancyDistribution {
    pub fn from_clouds(clouds: &[PointSet], g: usize) -> Result<Self> {
        if clouds.is_empty() {
            return Err(Error::EmptySet);
        }
        if g == 0 {
            return Err(Error::invalid("grid resolution must be positive"));
        }
        let mut counts = vec![0u64; g * g * g];
        let mut clamped = 0;
        let mut total = 0u64;
        for cloud in clouds {
            for p in cloud.iter() {
                let mut idx = [0usize; 3];
                let mut outside = false;
                for k in 0..3 {
                    outside |= !(-1.0..=1.0).contains(&p[k]);
                    let c = ((p[k].clamp(-1.0, 1.0) + 1.0) / 2.0 * g as f64).floor() as usize;
                    idx[k] = c.min(g - 1);
                }
                clamped += outside as usize;
                counts[(idx[0] * g + idx[1]) * g + idx[2]] += 1;
                total += 1;
            }
        }
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self { resolution: g, probs, clamped })
    }
}

fn kl_to_mixture(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, mi)| pi * (pi / mi).log2())
        .sum()
}

/// Base-2 Jensen-Shannon divergence, in [0, 1].
pub fn jsd_distributions(a: &OccupancyDistribution, b: &OccupancyDistribution) -> Result<f64> {
    if a.resolution != b.resolution {
        return Err(Error::SizeMismatch { left: a.resolution, right: b.resolution });
    }
    let m: Vec<f64> = a.probs.iter().zip(&b.probs).map(|(x, y)| 0.5 * (x + y)).collect();
    let v = 0.5 * kl_to_mixture(&a.probs, &m) + 0.5 * kl_to_mixture(&b.probs, &m);
    Ok(v.clamp(0.0, 1.0))
}

/// JSD between the aggregate occupancy of two collections. Points outside
/// `[-1, 1]^3` are clamped with a warning on stderr.
pub fn jsd(a: &[PointSet], b: &[PointSet], g: usize) -> Result<f64> {
    let da = OccupancyDistribution::from_clouds(a, g)?;
    let db = OccupancyDistribution::from_clouds(b, g)?;
    let clamped = da.clamped + db.clamped;
    if clamped > 0 {
        eprintln!("warning: {clamped} points outside [-1, 1]^3 clamped for occupancy grid");
    }
    jsd_distributions(&da, &db)
}

/// One cloud drawn uniformly from `gt`, repeated `gt.len()` times.
pub fn mode_collapse_reference(gt: &[PointSet], rng: &mut Rng) -> Result<Vec<PointSet>> {
    if gt.is_empty() {
        return Err(Error::EmptySet);
    }
    let pick = &gt[rng.below(gt.len())];
    Ok(vec![pick.clone(); gt.len()])
}

/// Assigns a code to the label of the closest class mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearestCentroid {
    pub labels: Vec<String>,
    pub centroids: Vec<Vec<f64>>,
}

impl NearestCentroid {
    pub fn fit(codes: &[LatentCode], labels: &[String]) -> Result<Self> {
        if codes.len() != labels.len() {
            return Err(Error::SizeMismatch { left: codes.len(), right: labels.len() });
        }
        if codes.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut names: Vec<String> = labels.to_vec();
        names.sort();
        names.dedup();
        let k = codes[0].len();
        let mut sums = vec![vec![0.0; k]; names.len()];
        let mut counts = vec![0usize; names.len()];
        for (c, l) in codes.iter().zip(labels) {
            let i = names.binary_search(l).expect("label present");
            counts[i] += 1;
            sums[i].iter_mut().zip(c.values()).for_each(|(s, v)| *s += v);
        }
        for (s, n) in sums.iter_mut().zip(&counts) {
            s.iter_mut().for_each(|v| *v /= *n as f64);
        }
        Ok(Self { labels: names, centroids: sums })
    }

    pub fn predict(&self, code: &LatentCode) -> &str {
        let d = |c: &Vec<f64>| c.iter().zip(code.values()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let best = (0..self.centroids.len())
            .min_by(|&a, &b| d(&self.centroids[a]).total_cmp(&d(&self.centroids[b])))
            .expect("at least one class");
        &self.labels[best]
    }

    /// Percentage of codes classified as their expected label.
    pub fn agreement(&self, codes: &[LatentCode], expected: &[String]) -> f64 {
        let hits = codes.iter().zip(expected).filter(|(c, e)| self.predict(c) == e.as_str()).count();
        100.0 * hits as f64 / codes.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    fn cloud(rng: &mut Rng, n: usize, scale: f64) -> PointSet {
        PointSet::new((0..n).map(|_| [rng.uniform_range(-scale, scale), rng.uniform_range(-scale, scale), rng.uniform_range(-scale, scale)]).collect())
            .unwrap()
    }

    #[test]
    fn identical_collections_have_zero_divergence() {
        let mut rng = Rng::new(1);
        let a: Vec<_> = (0..4).map(|_| cloud(&mut rng, 50, 1.0)).collect();
        assert_eq!(jsd(&a, &a, 32).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_cells_have_unit_divergence() {
        let a = [PointSet::new(vec![[-0.9, -0.9, -0.9]; 3]).unwrap()];
        let b = [PointSet::new(vec![[0.9, 0.9, 0.9]; 5]).unwrap()];
        assert!((jsd(&a, &b, 8).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distribution_sums_to_one_and_clamps() {
        let mut rng = Rng::new(2);
        let mut clouds: Vec<_> = (0..3).map(|_| cloud(&mut rng, 40, 1.0)).collect();
        clouds.push(PointSet::new(vec![[2.0, 0.0, 0.0], [0.0, -3.0, 0.0]]).unwrap());
        let d = OccupancyDistribution::from_clouds(&clouds, 16).unwrap();
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.probs.iter().all(|&p| p >= 0.0));
        assert_eq!(d.clamped, 2);
    }

    #[test]
    fn mode_collapse_reference_repeats_one_cloud() {
        let mut rng = Rng::new(3);
        let gt: Vec<_> = (0..6).map(|_| cloud(&mut rng, 30, 0.8)).collect();
        let r = mode_collapse_reference(&gt, &mut rng).unwrap();
        assert_eq!(r.len(), gt.len());
        assert!(r.iter().all(|c| *c == r[0]));
        assert!(gt.contains(&r[0]));
        assert!(jsd(&gt, &r, 8).unwrap() > 0.0);
    }

    #[test]
    fn nearest_centroid_separates_clusters() {
        let codes = vec![
            LatentCode(vec![0.0, 0.0]),
            LatentCode(vec![0.1, 0.0]),
            LatentCode(vec![5.0, 5.0]),
            LatentCode(vec![5.1, 4.9]),
        ];
        let labels: Vec<String> = ["a", "a", "b", "b"].iter().map(|s| s.to_string()).collect();
        let clf = NearestCentroid::fit(&codes, &labels).unwrap();
        assert_eq!(clf.predict(&LatentCode(vec![4.0, 4.0])), "b");
        assert_eq!(clf.agreement(&codes, &labels), 100.0);
    }

    proptest! {
        #[test]
        fn jsd_symmetric_and_bounded(seed in 0u64..200) {
            let mut rng = Rng::new(seed);
            let a: Vec<_> = (0..3).map(|_| cloud(&mut rng, 20, 1.0)).collect();
            let b: Vec<_> = (0..2).map(|_| cloud(&mut rng, 25, 0.5)).collect();
            let ab = jsd(&a, &b, 8).unwrap();
            let ba = jsd(&b, &a, 8).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }
    }
}
