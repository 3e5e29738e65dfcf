//! Point sets and the geometric queries shared by every other module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub type Point = [f64; 3];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dist2(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub fn norm(a: Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// An ordered, non-empty sequence of finite points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct PointSet {
    points: Vec<Point>,
}

impl TryFrom<Vec<Point>> for PointSet {
    type Error = Error;

    fn try_from(points: Vec<Point>) -> Result<Self> {
        PointSet::new(points)
    }
}

impl From<PointSet> for Vec<Point> {
    fn from(set: PointSet) -> Self {
        set.points
    }
}

impl PointSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        if let Some(i) = points
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::NonFiniteCoordinate(i));
        }
        Ok(Self { points })
    }

    /// Builds a set from interleaved `x y z` coordinates.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if coords.len() % 3 != 0 {
            return Err(Error::invalid(format!(
                "flat coordinate length {} is not a multiple of 3",
                coords.len()
            )));
        }
        Self::new(coords.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn get(&self, i: usize) -> Point {
        self.points[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point> {
        self.points.iter()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| p.iter().copied()).collect()
    }

    pub fn centroid(&self) -> Point {
        let mut c = [0.0; 3];
        for p in &self.points {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        let n = self.points.len() as f64;
        [c[0] / n, c[1] / n, c[2] / n]
    }

    pub fn max_radius(&self) -> f64 {
        self.points.iter().map(|&p| norm(p)).fold(0.0, f64::max)
    }

    /// Reorders points so that output `i` is input `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            points: order.iter().map(|&i| self.points[i]).collect(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.points[i]).collect())
    }

    pub fn translated(&self, offset: Point) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]])
                .collect(),
        }
    }

    pub fn concat(&self, other: &PointSet) -> Self {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        Self { points }
    }
}

/// Centers the set on its centroid and scales it so the farthest point sits
/// at radius 1.
pub fn normalize_unit_sphere(set: &PointSet) -> Result<PointSet> {
    let first = set.points[0];
    if set.points.iter().all(|&p| p == first) {
        return Err(Error::ZeroExtent);
    }
    let c = set.centroid();
    let centered: Vec<Point> = set.points.iter().map(|&p| sub(p, c)).collect();
    let r = centered.iter().map(|&p| norm(p)).fold(0.0, f64::max);
    if !(r > f64::MIN_POSITIVE) {
        return Err(Error::ZeroExtent);
    }
    PointSet::new(
        centered
            .into_iter()
            .map(|p| [p[0] / r, p[1] / r, p[2] / r])
            .collect(),
    )
}

/// Indices of the `k` points closest to `query`, nearest first, ties broken
/// by lower index.
pub fn nearest_neighbors(set: &PointSet, query: Point, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > set.len() {
        return Err(Error::invalid(format!(
            "k = {k} must lie in 1..={}",
            set.len()
        )));
    }
    let mut order: Vec<(f64, usize)> = set
        .points
        .iter()
        .enumerate()
        .map(|(i, &p)| (dist2(p, query), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(order.into_iter().take(k).map(|(_, i)| i).collect())
}

/// Distance from `query` to the closest point of `set`.
pub fn nearest_distance(set: &PointSet, query: Point) -> f64 {
    set.points
        .iter()
        .map(|&p| dist2(p, query))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Farthest-point sampling from an explicit start index. Output order is the
/// selection order; ties go to the lower index.
pub fn farthest_point_sample(set: &PointSet, m: usize, start: usize) -> Result<PointSet> {
    let n = set.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("sample size {m} must lie in 1..={n}")));
    }
    if start >= n {
        return Err(Error::invalid(format!("start index {start} out of range")));
    }
    let mut chosen = Vec::with_capacity(m);
    let mut min_d = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut current = start;
    for _ in 0..m {
        chosen.push(current);
        taken[current] = true;
        let c = set.points[current];
        let mut best = usize::MAX;
        let mut best_d = -1.0;
        for (i, p) in set.points.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = dist2(*p, c);
            if d < min_d[i] {
                min_d[i] = d;
            }
            if min_d[i] > best_d {
                best_d = min_d[i];
                best = i;
            }
        }
        if best == usize::MAX {
            break;
        }
        current = best;
    }
    set.select(&chosen)
}

/// Farthest-point downsampling to `m` points from a random start.
pub fn downsample(set: &PointSet, m: usize, rng: &mut Rng) -> Result<PointSet> {
    if m == 0 || m > set.len() {
        return Err(Error::invalid(format!(
            "sample size {m} must lie in 1..={}",
            set.len()
        )));
    }
    let start = rng.below(set.len());
    farthest_point_sample(set, m, start)
}

/// Pads the set to `m` points with uniform-with-replacement copies of its own
/// points; the first `n` output points are the input.
pub fn duplicate_to_count(set: &PointSet, m: usize, rng: &mut Rng) -> Result<PointSet> {
    let n = set.len();
    if m < n {
        return Err(Error::invalid(format!(
            "target count {m} is below the current count {n}"
        )));
    }
    let mut points = set.points.clone();
    points.reserve(m - n);
    for _ in n..m {
        points.push(set.points[rng.below(n)]);
    }
    PointSet::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};

    fn line(n: usize) -> PointSet {
        PointSet::new((0..n).map(|i| [i as f64, 0.0, 0.0]).collect()).unwrap()
    }

    fn random_cloud(rng: &mut Rng, n: usize) -> PointSet {
        PointSet::new(
            (0..n)
                .map(|_| [rng.normal(), rng.normal() * 2.0 + 3.0, rng.uniform()])
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(PointSet::new(vec![]), Err(Error::EmptySet)));
        assert!(matches!(
            PointSet::new(vec![[0.0, f64::NAN, 0.0]]),
            Err(Error::NonFiniteCoordinate(0))
        ));
    }

    #[test]
    fn normalize_two_points() {
        let s = PointSet::new(vec![[1.0, 1.0, 1.0], [3.0, 1.0, 1.0]]).unwrap();
        let n = normalize_unit_sphere(&s).unwrap();
        assert_eq!(n.points(), &[[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    }

    #[test]
    fn normalize_random_cloud() {
        let mut rng = Rng::new(1);
        let s = random_cloud(&mut rng, 64);
        let n = normalize_unit_sphere(&s).unwrap();
        assert!(norm(n.centroid()) < 1e-9);
        assert!((n.max_radius() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalize_zero_extent() {
        let s = PointSet::new(vec![[2.0, 2.0, 2.0]; 5]).unwrap();
        assert!(matches!(normalize_unit_sphere(&s), Err(Error::ZeroExtent)));
    }

    #[test]
    fn nearest_neighbors_on_a_line() {
        let s = line(8);
        assert_eq!(nearest_neighbors(&s, [0.0, 0.0, 0.0], 4).unwrap(), vec![0, 1, 2, 3]);
        let all = nearest_neighbors(&s, [3.2, 0.0, 0.0], 8).unwrap();
        let mut sorted = all.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..8).collect::<Vec<_>>());
        assert_eq!(nearest_neighbors(&s, [5.0, 0.0, 0.0], 1).unwrap(), vec![5]);
        assert!(nearest_neighbors(&s, [0.0; 3], 9).is_err());
    }

    #[test]
    fn nearest_neighbors_tie_break() {
        // 1 and 3 are equidistant from 2.
        let s = line(5);
        assert_eq!(nearest_neighbors(&s, [2.0, 0.0, 0.0], 3).unwrap(), vec![2, 1, 3]);
    }

    #[test]
    fn fps_collinear() {
        let s = line(8);
        let d = farthest_point_sample(&s, 2, 0).unwrap();
        assert_eq!(d.points(), &[[0.0, 0.0, 0.0], [7.0, 0.0, 0.0]]);
    }

    #[test]
    fn downsample_full_is_permutation() {
        let mut rng = Rng::new(9);
        let s = random_cloud(&mut rng, 20);
        let d = downsample(&s, 20, &mut rng).unwrap();
        let mut a: Vec<_> = s.points().to_vec();
        let mut b: Vec<_> = d.points().to_vec();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(a, b);
        assert_eq!(downsample(&s, 1, &mut rng).unwrap().len(), 1);
        assert!(downsample(&s, 21, &mut rng).is_err());
    }

    #[test]
    fn duplicate_contract() {
        let mut rng = Rng::new(2);
        let s = line(4);
        let d = duplicate_to_count(&s, 8, &mut rng).unwrap();
        assert_eq!(d.len(), 8);
        assert_eq!(&d.points()[..4], s.points());
        for p in s.points() {
            assert!(d.points().contains(p));
        }
        for p in d.points() {
            assert!(s.points().contains(p));
        }
        assert_eq!(duplicate_to_count(&s, 4, &mut rng).unwrap(), s);
        let one = PointSet::new(vec![[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(
            duplicate_to_count(&one, 3, &mut rng).unwrap().points(),
            &[[1.0, 2.0, 3.0]; 3]
        );
        assert!(duplicate_to_count(&s, 3, &mut rng).is_err());
    }

    #[test]
    fn rng_operations_reproducible() {
        let s = random_cloud(&mut Rng::new(4), 50);
        let a = downsample(&s, 10, &mut Rng::new(77)).unwrap();
        let b = downsample(&s, 10, &mut Rng::new(77)).unwrap();
        assert_eq!(a, b);
        let a = duplicate_to_count(&s, 80, &mut Rng::new(78)).unwrap();
        let b = duplicate_to_count(&s, 80, &mut Rng::new(78)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn normalize_idempotent(seed in any::<u64>(), n in 2usize..40) {
            let s = random_cloud(&mut Rng::new(seed), n);
            let once = normalize_unit_sphere(&s).unwrap();
            let twice = normalize_unit_sphere(&once).unwrap();
            for (p, q) in once.iter().zip(twice.iter()) {
                prop_assert!(dist(*p, *q) < 1e-9);
            }
        }

        #[test]
        fn neighbor_distances_non_decreasing(seed in any::<u64>(), n in 1usize..40) {
            let mut rng = Rng::new(seed);
            let s = random_cloud(&mut rng, n);
            let q = [rng.normal(), rng.normal(), rng.normal()];
            let k = 1 + rng.below(n);
            let idx = nearest_neighbors(&s, q, k).unwrap();
            let d: Vec<f64> = idx.iter().map(|&i| dist(s.get(i), q)).collect();
            prop_assert!(d.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
