//! Point-set distances: Earth Mover's Distance, Chamfer distance and the
//! directed / symmetric Hausdorff distances, with the gradients used in
//! training.

pub mod assignment;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{dist, dist2, sub, Point, PointSet};
use assignment::{auction, hungarian, CostMatrix};

/// Largest size solved exactly; above it the auction solver is used.
pub const EXACT_ASSIGNMENT_LIMIT: usize = 512;

/// Final auction epsilon; bounds the total-cost gap by `1e-6 * n`.
pub const AUCTION_EPS: f64 = 1e-6;

/// Default temperature of the soft Hausdorff relaxation.
pub const DEFAULT_TAU: f64 = 0.01;

/// Bijection pairing point `i` of one set with point `mapping[i]` of the
/// other, and the mean matched distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub mapping: Vec<usize>,
    pub cost: f64,
}

fn check_same_size(a: &PointSet, b: &PointSet) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Earth Mover's Distance: the minimum over bijections of the mean matched
/// Euclidean distance.
pub fn emd(a: &PointSet, b: &PointSet) -> Result<(f64, Assignment)> {
    check_same_size(a, b)?;
    let n = a.len();
    let (pa, pb) = (a.points(), b.points());
    let cost = CostMatrix::from_fn(n, |i, j| dist(pa[i], pb[j]));
    let mapping = if n <= EXACT_ASSIGNMENT_LIMIT {
        hungarian(&cost)
    } else {
        auction(&cost, AUCTION_EPS).mapping
    };
    let mean = cost.total(&mapping) / n as f64;
    Ok((
        mean,
        Assignment {
            mapping,
            cost: mean,
        },
    ))
}

/// EMD value and its subgradient with respect to the points of `a`, taken at
/// the optimal assignment. Coincident matched pairs contribute zero.
pub fn emd_with_grad(a: &PointSet, b: &PointSet) -> Result<(f64, Vec<Point>)> {
    let (cost, asg) = emd(a, b)?;
    let n = a.len() as f64;
    let grad = a
        .iter()
        .zip(&asg.mapping)
        .map(|(&p, &j)| {
            let d = sub(p, b.get(j));
            let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if len > 0.0 {
                let s = 1.0 / (n * len);
                [d[0] * s, d[1] * s, d[2] * s]
            } else {
                [0.0; 3]
            }
        })
        .collect();
    Ok((cost, grad))
}

pub fn emd_grad(a: &PointSet, b: &PointSet) -> Result<Vec<Point>> {
    emd_with_grad(a, b).map(|(_, g)| g)
}

fn nearest_sq(p: Point, set: &PointSet) -> f64 {
    set.iter().map(|&q| dist2(p, q)).fold(f64::INFINITY, f64::min)
}

/// Chamfer distance with squared nearest-neighbour distances, averaged per
/// direction and summed.
pub fn chamfer(a: &PointSet, b: &PointSet) -> Result<f64> {
    let ab = a.iter().map(|&p| nearest_sq(p, b)).sum::<f64>() / a.len() as f64;
    let ba = b.iter().map(|&q| nearest_sq(q, a)).sum::<f64>() / b.len() as f64;
    Ok(ab + ba)
}

/// max over `s` of the distance to the nearest point of `r`.
pub fn hausdorff_directed(s: &PointSet, r: &PointSet) -> Result<f64> {
    Ok(s.iter()
        .map(|&p| nearest_sq(p, r))
        .fold(0.0f64, f64::max)
        .sqrt())
}

pub fn hausdorff_symmetric(a: &PointSet, b: &PointSet) -> Result<f64> {
    Ok(hausdorff_directed(a, b)?.max(hausdorff_directed(b, a)?))
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

/// Log-sum-exp relaxation of the directed Hausdorff distance: a soft min over
/// `r` nested in a soft max over `s`, both at temperature `tau`. Lies within
/// `tau * ln(|s| * |r|)` of the hard value.
pub fn soft_hausdorff_directed(s: &PointSet, r: &PointSet, tau: f64) -> Result<f64> {
    hausdorff_directed_grad(s, r, tau).map(|(v, _)| v)
}

/// Soft directed Hausdorff value and its gradient with respect to the points
/// of `r`.
pub fn hausdorff_directed_grad(
    s: &PointSet,
    r: &PointSet,
    tau: f64,
) -> Result<(f64, Vec<Point>)> {
    check_tau(tau)?;
    let (ns, nr) = (s.len(), r.len());
    let mut d = vec![0.0; ns * nr];
    for (i, &p) in s.iter().enumerate() {
        for (j, &q) in r.iter().enumerate() {
            d[i * nr + j] = dist(p, q);
        }
    }
    let mut soft_min = vec![0.0; ns];
    let mut scratch = vec![0.0; nr];
    for i in 0..ns {
        for j in 0..nr {
            scratch[j] = -d[i * nr + j] / tau;
        }
        soft_min[i] = -tau * log_sum_exp(&scratch);
    }
    let scaled: Vec<f64> = soft_min.iter().map(|m| m / tau).collect();
    let lse = log_sum_exp(&scaled);
    let value = tau * lse;

    let mut grad = vec![[0.0; 3]; nr];
    for i in 0..ns {
        let w = (scaled[i] - lse).exp();
        if w == 0.0 {
            continue;
        }
        let row = &d[i * nr..(i + 1) * nr];
        let dmin = row.iter().copied().fold(f64::INFINITY, f64::min);
        let norm: f64 = row.iter().map(|&x| (-(x - dmin) / tau).exp()).sum();
        let p = s.get(i);
        for j in 0..nr {
            let dij = row[j];
            if dij == 0.0 {
                continue;
            }
            let v = (-(dij - dmin) / tau).exp() / norm;
            let coef = w * v / dij;
            if coef == 0.0 {
                continue;
            }
            let q = r.get(j);
            for k in 0..3 {
                grad[j][k] += coef * (q[k] - p[k]);
            }
        }
    }
    Ok((value, grad))
}
