//! Linear assignment solvers over dense square cost matrices.

/// Square cost matrix stored row-major.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn total(&self, mapping: &[usize]) -> f64 {
        mapping.iter().enumerate().map(|(i, &j)| self.at(i, j)).sum()
    }
}

/// Exact minimum-cost perfect matching by shortest augmenting paths with
/// vertex potentials (Hungarian method, O(n^3)). Returns `mapping[row] = col`.
pub fn hungarian(cost: &CostMatrix) -> Vec<usize> {
    let n = cost.n();
    if n == 0 {
        return Vec::new();
    }
    // 1-based internally; column 0 is the virtual root.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let crow = cost.row(i0 - 1);
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = crow[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut mapping = vec![0usize; n];
    for j in 1..=n {
        mapping[col_owner[j] - 1] = j - 1;
    }
    mapping
}

/// Result of the approximate solver together with its duality certificate.
#[derive(Clone, Debug)]
pub struct AuctionResult {
    pub mapping: Vec<usize>,
    /// Upper bound on `total(mapping) - optimum`.
    pub gap: f64,
}

/// Gauss-Seidel auction with epsilon scaling. The final phase runs with
/// `eps_final`, which bounds the suboptimality of the total cost by
/// `n * eps_final`; the returned gap is the exact primal-dual difference.
pub fn auction(cost: &CostMatrix, eps_final: f64) -> AuctionResult {
    let n = cost.n();
    if n == 0 {
        return AuctionResult {
            mapping: Vec::new(),
            gap: 0.0,
        };
    }
    let max_c = cost.data.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    let mut prices = vec![0.0f64; n];
    let mut eps = (max_c / 4.0).max(eps_final);
    let mut owner: Vec<Option<usize>>;
    let mut assigned: Vec<Option<usize>>;
    loop {
        owner = vec![None; n];
        assigned = vec![None; n];
        let mut queue: std::collections::VecDeque<usize> = (0..n).collect();
        while let Some(i) = queue.pop_front() {
            // benefit = -cost; value of object j to person i = -c_ij - p_j
            let row = cost.row(i);
            let mut best = f64::NEG_INFINITY;
            let mut second = f64::NEG_INFINITY;
            let mut best_j = 0;
            for j in 0..n {
                let val = -row[j] - prices[j];
                if val > best {
                    second = best;
                    best = val;
                    best_j = j;
                } else if val > second {
                    second = val;
                }
            }
            let incr = if second.is_finite() { best - second } else { 0.0 };
            prices[best_j] += incr + eps;
            if let Some(prev) = owner[best_j] {
                assigned[prev] = None;
                queue.push_back(prev);
            }
            owner[best_j] = Some(i);
            assigned[i] = Some(best_j);
        }
        if eps <= eps_final {
            break;
        }
        eps = (eps / 5.0).max(eps_final);
    }
    let mapping: Vec<usize> = assigned.into_iter().map(|a| a.expect("complete")).collect();
    // Dual objective for the min-cost problem: sum_i min_j (c_ij + p_j) - sum_j p_j.
    let dual: f64 = (0..n)
        .map(|i| {
            cost.row(i)
                .iter()
                .zip(&prices)
                .map(|(c, p)| c + p)
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        - prices.iter().sum::<f64>();
    let gap = (cost.total(&mapping) - dual).max(0.0);
    AuctionResult { mapping, gap }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn brute_force(cost: &CostMatrix) -> f64 {
        fn rec(cost: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            let n = cost.n();
            if row == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(cost, row + 1, used, acc + cost.at(row, j), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.n()], 0.0, &mut best);
        best
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let mut rng = Rng::new(10);
        for n in 1..=7 {
            for _ in 0..20 {
                let c = CostMatrix::from_fn(n, |_, _| rng.uniform() * 10.0);
                let m = hungarian(&c);
                assert!((c.total(&m) - brute_force(&c)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn hungarian_known_instance() {
        let rows = [[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]];
        let c = CostMatrix::from_fn(3, |i, j| rows[i][j]);
        let m = hungarian(&c);
        assert_eq!(c.total(&m), 5.0);
    }

    #[test]
    fn auction_within_certified_gap() {
        let mut rng = Rng::new(12);
        for &n in &[5usize, 40, 120] {
            let c = CostMatrix::from_fn(n, |_, _| rng.uniform());
            let exact = c.total(&hungarian(&c));
            let res = auction(&c, 1e-6);
            let mut seen = vec![false; n];
            for &j in &res.mapping {
                assert!(!seen[j]);
                seen[j] = true;
            }
            let approx = c.total(&res.mapping);
            assert!(approx >= exact - 1e-9);
            assert!(approx - exact <= res.gap + 1e-9);
            assert!(res.gap <= 1e-6 * n as f64 + 1e-9, "gap {}", res.gap);
        }
    }
}
