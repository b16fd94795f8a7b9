use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mesh::LabeledMesh;
use super::primitive::Vec3;
use crate::error::{arg_err, Result};

/// Area-weighted uniform samples on the mesh surface.
pub fn sample_surface(mesh: &LabeledMesh, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    if mesh.is_empty() {
        return arg_err("cannot sample an empty mesh");
    }
    if n == 0 {
        return arg_err("sample count must be at least 1");
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return arg_err("mesh has zero surface area");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.random::<f64>() * total;
        let f = cumulative
            .partition_point(|&c| c <= r)
            .min(mesh.faces.len() - 1);
        let [a, b, c] = mesh.triangle(f);
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        let su = u.sqrt();
        let (wa, wb, wc) = (1.0 - su, su * (1.0 - v), su * v);
        out.push(std::array::from_fn(|i| wa * a[i] + wb * b[i] + wc * c[i]));
    }
    Ok(out)
}
