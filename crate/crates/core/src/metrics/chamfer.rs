use crate::error::{arg_err, Result};
use crate::shape::Vec3;

#[inline]
fn dist_sq(a: &Vec3, b: &Vec3) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    dx * dx + dy * dy + dz * dz
}

/// Uniform bucket grid over a point set for exact nearest-neighbor queries.
pub struct PointGrid<'a> {
    points: &'a [Vec3],
    lo: Vec3,
    cell: f64,
    dims: [usize; 3],
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> PointGrid<'a> {
    pub fn new(points: &'a [Vec3]) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let ext: Vec3 = std::array::from_fn(|k| (hi[k] - lo[k]).max(1e-9));
        // about two points per occupied cell for surface-like sets
        let target = (points.len() as f64 / 2.0).max(1.0);
        let cell = ((ext[0] * ext[1] + ext[1] * ext[2] + ext[0] * ext[2]) / target)
            .sqrt()
            .max(ext[0].max(ext[1]).max(ext[2]) / 256.0);
        let dims: [usize; 3] = std::array::from_fn(|k| ((ext[k] / cell).floor() as usize + 1).min(256));
        let n_cells = dims[0] * dims[1] * dims[2];
        let mut grid = Self {
            points,
            lo,
            cell,
            dims,
            starts: vec![0; n_cells + 1],
            order: Vec::with_capacity(points.len()),
        };
        let keys: Vec<usize> = points.iter().map(|p| grid.flat(grid.cell_of(p))).collect();
        for &k in &keys {
            grid.starts[k + 1] += 1;
        }
        for i in 0..n_cells {
            grid.starts[i + 1] += grid.starts[i];
        }
        let mut fill = grid.starts.clone();
        grid.order = vec![0; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            grid.order[fill[k]] = i;
            fill[k] += 1;
        }
        grid
    }

    fn cell_of(&self, p: &Vec3) -> [usize; 3] {
        std::array::from_fn(|k| {
            let c = ((p[k] - self.lo[k]) / self.cell).floor();
            (c.max(0.0) as usize).min(self.dims[k] - 1)
        })
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    /// Squared distance to the nearest point. Same value as a linear scan.
    pub fn nearest_sq(&self, q: &Vec3) -> f64 {
        let base = self.cell_of(q);
        let max_ring = self.dims[0].max(self.dims[1]).max(self.dims[2]);
        let mut best = f64::INFINITY;
        for r in 0..=max_ring {
            let lo: [isize; 3] = std::array::from_fn(|k| base[k] as isize - r as isize);
            let hi: [isize; 3] = std::array::from_fn(|k| base[k] as isize + r as isize);
            for z in lo[2].max(0)..=hi[2].min(self.dims[2] as isize - 1) {
                for y in lo[1].max(0)..=hi[1].min(self.dims[1] as isize - 1) {
                    let on_shell_yz = z == lo[2] || z == hi[2] || y == lo[1] || y == hi[1];
                    let mut x = lo[0].max(0);
                    while x <= hi[0].min(self.dims[0] as isize - 1) {
                        let key = self.flat([x as usize, y as usize, z as usize]);
                        for &i in &self.order[self.starts[key]..self.starts[key + 1]] {
                            let d = dist_sq(q, &self.points[i]);
                            if d < best {
                                best = d;
                            }
                        }
                        // interior of the shell was visited in earlier rings
                        x = if on_shell_yz || x == hi[0] { x + 1 } else { hi[0] };
                    }
                }
            }
            // every point not yet visited lies outside the visited block
            let mut bound = f64::INFINITY;
            for k in 0..3 {
                let b_lo = self.lo[k] + lo[k] as f64 * self.cell;
                let b_hi = self.lo[k] + (hi[k] + 1) as f64 * self.cell;
                if lo[k] > 0 {
                    bound = bound.min(q[k] - b_lo);
                }
                if hi[k] < self.dims[k] as isize - 1 {
                    bound = bound.min(b_hi - q[k]);
                }
            }
            if bound == f64::INFINITY {
                break;
            }
            if bound > 0.0 && best < bound * bound * (1.0 - 1e-12) {
                break;
            }
        }
        best
    }
}

fn check_sets(a: &[Vec3], b: &[Vec3]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return arg_err("chamfer distance needs two non-empty point sets");
    }
    Ok(())
}

/// Squared-distance Chamfer distance, mean over each direction, summed.
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    check_sets(a, b)?;
    let (ga, gb) = (PointGrid::new(a), PointGrid::new(b));
    let ab: f64 = a.iter().map(|p| gb.nearest_sq(p)).sum();
    let ba: f64 = b.iter().map(|p| ga.nearest_sq(p)).sum();
    Ok(ab / a.len() as f64 + ba / b.len() as f64)
}

/// Quadratic reference implementation.
pub fn chamfer_brute(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    check_sets(a, b)?;
    let nn = |p: &Vec3, set: &[Vec3]| set.iter().map(|q| dist_sq(p, q)).fold(f64::INFINITY, f64::min);
    let ab: f64 = a.iter().map(|p| nn(p, b)).sum();
    let ba: f64 = b.iter().map(|p| nn(p, a)).sum();
    Ok(ab / a.len() as f64 + ba / b.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn examples() {
        let o = [0.0, 0.0, 0.0];
        assert_eq!(chamfer(&[o], &[o]).unwrap(), 0.0);
        assert_eq!(chamfer(&[o], &[[1.0, 0.0, 0.0]]).unwrap(), 2.0);
        assert_eq!(chamfer(&[o, [2.0, 0.0, 0.0]], &[[1.0, 0.0, 0.0]]).unwrap(), 2.0);
        assert!(chamfer(&[], &[o]).is_err());
    }

    #[test]
    fn grid_matches_brute_force_on_clustered_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..10 {
            let spread = if trial % 2 == 0 { 1.0 } else { 0.01 };
            let a: Vec<Vec3> = (0..300)
                .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0) * spread))
                .collect();
            let b: Vec<Vec3> = (0..200)
                .map(|_| std::array::from_fn(|k| rng.random_range(-1.0..1.0) + k as f64))
                .collect();
            assert_eq!(chamfer(&a, &b).unwrap(), chamfer_brute(&a, &b).unwrap());
        }
    }
}
