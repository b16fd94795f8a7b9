use crate::error::{arg_err, Result};
use crate::shape::Vec3;

/// Largest size solved exactly unless exact solving is forced.
pub const EXACT_LIMIT: usize = 512;
/// Auction tolerance relative to the joint bounding-box diagonal.
pub const AUCTION_EPS_FRAC: f64 = 1e-3;

fn dist(a: &Vec3, b: &Vec3) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Minimum-cost perfect matching on a square cost matrix (row-major).
/// Returns `assignment[row] = col`.
pub fn hungarian(cost: &[f64], n: usize) -> Result<Vec<usize>> {
    if cost.len() != n * n {
        return arg_err(format!("cost matrix has {} entries, expected {n}²", cost.len()));
    }
    // potentials method with 1-based sentinel column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    Ok(assignment)
}

/// Forward auction with ε-scaling; total cost within `n·eps` of optimal.
pub fn auction(cost: &[f64], n: usize, eps: f64) -> Result<Vec<usize>> {
    if cost.len() != n * n {
        return arg_err(format!("cost matrix has {} entries, expected {n}²", cost.len()));
    }
    if !(eps > 0.0) {
        return arg_err("auction tolerance must be positive");
    }
    let max_cost = cost.iter().cloned().fold(0.0, f64::max);
    let mut prices = vec![0.0; n];
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut e = (max_cost / 4.0).max(eps);
    loop {
        owner.iter_mut().for_each(|o| *o = None);
        assigned.iter_mut().for_each(|a| *a = None);
        let mut free: Vec<usize> = (0..n).rev().collect();
        while let Some(i) = free.pop() {
            let row = &cost[i * n..(i + 1) * n];
            let (mut best, mut second, mut best_j) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
            for j in 0..n {
                let value = -row[j] - prices[j];
                if value > best {
                    second = best;
                    best = value;
                    best_j = j;
                } else if value > second {
                    second = value;
                }
            }
            let gap = if second.is_finite() { best - second } else { 0.0 };
            prices[best_j] += gap + e;
            if let Some(prev) = owner[best_j].replace(i) {
                assigned[prev] = None;
                free.push(prev);
            }
            assigned[i] = Some(best_j);
        }
        if e <= eps {
            break;
        }
        e = (e / 4.0).max(eps);
    }
    Ok(assigned.into_iter().map(|a| a.expect("auction leaves no bidder unassigned")).collect())
}

/// Optimal-assignment distance `Σ ‖aᵢ − b_π(i)‖`.
pub fn emd(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    emd_with(a, b, false)
}

/// `exact` forces the Hungarian solver above [`EXACT_LIMIT`].
pub fn emd_with(a: &[Vec3], b: &[Vec3], exact: bool) -> Result<f64> {
    if a.len() != b.len() {
        return arg_err(format!("EMD needs equal-size sets, got {} and {}", a.len(), b.len()));
    }
    if a.is_empty() {
        return arg_err("EMD needs non-empty point sets");
    }
    let n = a.len();
    let mut cost = Vec::with_capacity(n * n);
    for p in a {
        for q in b {
            cost.push(dist(p, q));
        }
    }
    let assignment = if exact || n <= EXACT_LIMIT {
        hungarian(&cost, n)?
    } else {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in a.iter().chain(b) {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let diag = dist(&lo, &hi).max(1e-12);
        auction(&cost, n, AUCTION_EPS_FRAC * diag / n as f64)?
    };
    Ok(assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn examples() {
        let a = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let b = [[1.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
        assert_eq!(emd(&a, &b).unwrap(), 2.0);
        assert_eq!(emd(&a, &[a[1], a[0]]).unwrap(), 0.0);
        assert!((emd(&[[0.0; 3]], &[[3.0, 4.0, 0.0]]).unwrap() - 5.0).abs() < 1e-15);
        assert!(emd(&a, &b[..1]).is_err());
    }

    #[test]
    fn auction_is_near_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 120;
        let pts = |rng: &mut ChaCha8Rng| -> Vec<Vec3> {
            (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect()
        };
        let (a, b) = (pts(&mut rng), pts(&mut rng));
        let mut cost = Vec::new();
        for p in &a {
            for q in &b {
                cost.push(dist(p, q));
            }
        }
        let total = |asg: &[usize]| asg.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>();
        let exact = total(&hungarian(&cost, n).unwrap());
        let eps = 1e-4;
        let approx = total(&auction(&cost, n, eps).unwrap());
        assert!(approx >= exact - 1e-9 && approx <= exact + n as f64 * eps + 1e-9, "{approx} vs {exact}");
    }
}
