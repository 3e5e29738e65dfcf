//! Accuracy, completeness, F1 and distance summaries.

use serde::{Deserialize, Serialize};

use crate::distance::{chamfer, emd, hausdorff_symmetric};
use crate::error::{Error, Result};
use crate::point::{nearest_distance, PointSet};

pub const DEFAULT_EPSILON: f64 = 0.03;

fn within_percent(from: &PointSet, to: &PointSet, eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::invalid(format!("threshold must be >= 0, got {eps}")));
    }
    let hits = from.iter().filter(|&&p| nearest_distance(to, p) <= eps).count();
    Ok(100.0 * hits as f64 / from.len() as f64)
}

/// Percentage of completion points within `eps` of the ground truth.
pub fn accuracy(comp: &PointSet, gt: &PointSet, eps: f64) -> Result<f64> {
    within_percent(comp, gt, eps)
}

/// Percentage of ground-truth points within `eps` of the completion.
pub fn completeness(comp: &PointSet, gt: &PointSet, eps: f64) -> Result<f64> {
    within_percent(gt, comp, eps)
}

/// Harmonic mean of two percentages; 0 when both are 0.
pub fn f1(acc: f64, comp: f64) -> f64 {
    if acc + comp == 0.0 {
        0.0
    } else {
        2.0 * acc * comp / (acc + comp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeMetrics {
    pub accuracy: f64,
    pub completeness: f64,
    pub f1: f64,
    pub emd: f64,
    pub chamfer: f64,
    pub hausdorff_sym: f64,
}

impl ShapeMetrics {
    pub fn compute(comp: &PointSet, gt: &PointSet, eps: f64) -> Result<Self> {
        let accuracy = accuracy(comp, gt, eps)?;
        let completeness = completeness(comp, gt, eps)?;
        Ok(Self {
            accuracy,
            completeness,
            f1: f1(accuracy, completeness),
            emd: emd(comp, gt)?.0,
            chamfer: chamfer(comp, gt)?,
            hausdorff_sym: hausdorff_symmetric(comp, gt)?,
        })
    }

    pub fn mean(rows: &[ShapeMetrics]) -> Self {
        let n = rows.len().max(1) as f64;
        let avg = |f: fn(&ShapeMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
        Self {
            accuracy: avg(|r| r.accuracy),
            completeness: avg(|r| r.completeness),
            f1: avg(|r| r.f1),
            emd: avg(|r| r.emd),
            chamfer: avg(|r| r.chamfer),
            hausdorff_sym: avg(|r| r.hausdorff_sym),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub epsilon: f64,
    pub rows: Vec<ShapeMetrics>,
    pub mean: ShapeMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jsd: Option<f64>,
    /// JSD between the ground truth and a single ground-truth cloud repeated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jsd_reference: Option<f64>,
}

impl MetricsReport {
    /// Pairs `completions[i]` with `gts[i]`.
    pub fn evaluate(completions: &[PointSet], gts: &[PointSet], eps: f64) -> Result<Self> {
        if completions.len() != gts.len() {
            return Err(Error::SizeMismatch { left: completions.len(), right: gts.len() });
        }
        if completions.is_empty() {
            return Err(Error::EmptySet);
        }
        let rows = completions
            .iter()
            .zip(gts)
            .map(|(c, g)| ShapeMetrics::compute(c, g, eps))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { epsilon: eps, mean: ShapeMetrics::mean(&rows), rows, jsd: None, jsd_reference: None })
    }

    /// One row per shape, then a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("shape,accuracy,completeness,f1,emd,chamfer,hausdorff_sym\n");
        let line = |label: String, r: &ShapeMetrics| {
            format!(
                "{label},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                r.accuracy, r.completeness, r.f1, r.emd, r.chamfer, r.hausdorff_sym
            )
        };
        for (i, r) in self.rows.iter().enumerate() {
            out.push_str(&line(i.to_string(), r));
        }
        out.push_str(&line("mean".into(), &self.mean));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::{prop_assert, proptest};

    fn set(p: &[[f64; 3]]) -> PointSet {
        PointSet::new(p.to_vec()).unwrap()
    }

    #[test]
    fn accuracy_examples() {
        let comp = set(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let gt = set(&[[0.0, 0.0, 0.01]]);
        assert_eq!(accuracy(&comp, &comp, 0.03).unwrap(), 100.0);
        assert_eq!(accuracy(&comp, &gt, 0.03).unwrap(), 50.0);
        assert_eq!(accuracy(&gt, &set(&[[5.0, 0.0, 0.0]]), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn completeness_examples() {
        let comp = set(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let gt = set(&[[0.0, 0.0, 0.01]]);
        assert_eq!(completeness(&comp, &gt, 0.03).unwrap(), 100.0);
        assert_eq!(completeness(&comp, &set(&[[0.0, 0.0, 0.0]]), 0.03).unwrap(), 100.0);
        assert_eq!(completeness(&comp, &set(&[[9.0, 9.0, 9.0]]), 0.03).unwrap(), 0.0);
    }

    #[test]
    fn f1_examples() {
        assert!((f1(80.7, 80.8) - 80.8).abs() <= 0.1);
        assert!((f1(39.6, 61.8) - 48.2).abs() <= 0.1);
        assert_eq!(f1(42.0, 42.0), 42.0);
        assert!((f1(50.0, 100.0) - 66.666_666_666).abs() < 1e-6);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn report_csv_has_mean_row() {
        let a = set(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let r = MetricsReport::evaluate(&[a.clone(), a.clone()], &[a.clone(), a], 0.03).unwrap();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().last().unwrap().starts_with("mean,100.000000"));
        assert!(r.to_json().contains("\"epsilon\""));
    }

    fn cloud(rng: &mut Rng, n: usize) -> PointSet {
        PointSet::new((0..n).map(|_| [rng.normal() * 0.3, rng.normal() * 0.3, rng.normal() * 0.3]).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn f1_between_inputs(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            let f = f1(a, b);
            prop_assert!(f >= a.min(b) - 1e-12 && f <= a.max(b) + 1e-12);
        }

        #[test]
        fn accuracy_monotone_in_epsilon(seed in 0u64..300, e1 in 0.0f64..0.5, e2 in 0.0f64..0.5) {
            let mut rng = Rng::new(seed);
            let (c, g) = (cloud(&mut rng, 12), cloud(&mut rng, 9));
            let (lo, hi) = (e1.min(e2), e1.max(e2));
            prop_assert!(accuracy(&c, &g, lo).unwrap() <= accuracy(&c, &g, hi).unwrap());
            prop_assert!(completeness(&c, &g, lo).unwrap() <= completeness(&c, &g, hi).unwrap());
        }

        #[test]
        fn metrics_ignore_point_order(seed in 0u64..300) {
            let mut rng = Rng::new(seed);
            let (c, g) = (cloud(&mut rng, 10), cloud(&mut rng, 10));
            let pc = c.permuted(&rng.permutation(10));
            let pg = g.permuted(&rng.permutation(10));
            prop_assert!(accuracy(&c, &g, 0.2).unwrap() == accuracy(&pc, &pg, 0.2).unwrap());
            prop_assert!(completeness(&c, &g, 0.2).unwrap() == completeness(&pc, &pg, 0.2).unwrap());
        }
    }
}
