//! Signed distance to a union of primitive parts.

use super::primitive::{PartKind, PartPrimitive, Vec3};
use crate::error::{arg_err, Result};

fn length(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Signed distance to a single part. Exact for boxes and cylinders; for
/// ellipsoids the scaled-sphere bound `(|p/r| - 1)·min(r)`, which has the
/// exact zero set and never overestimates.
pub fn part_sdf(p: &PartPrimitive, q: Vec3) -> f64 {
    let l = p.to_local(q);
    let h = p.half_extents;
    match p.kind {
        PartKind::Box => {
            let d = [l[0].abs() - h[0], l[1].abs() - h[1], l[2].abs() - h[2]];
            let outside = length([d[0].max(0.0), d[1].max(0.0), d[2].max(0.0)]);
            outside + d[0].max(d[1]).max(d[2]).min(0.0)
        }
        PartKind::Cylinder => {
            let radial = (l[0] * l[0] + l[2] * l[2]).sqrt() - h[0];
            let axial = l[1].abs() - h[1];
            let outside = (radial.max(0.0).powi(2) + axial.max(0.0).powi(2)).sqrt();
            outside + radial.max(axial).min(0.0)
        }
        PartKind::Ellipsoid => {
            let k = length([l[0] / h[0], l[1] / h[1], l[2] / h[2]]);
            (k - 1.0) * h[0].min(h[1]).min(h[2])
        }
    }
}

/// Union distance: minimum over the parts.
pub fn sdf(parts: &[PartPrimitive], q: Vec3) -> Result<f64> {
    if parts.is_empty() {
        return arg_err("sdf of an empty part list");
    }
    Ok(sdf_unchecked(parts, q))
}

pub(crate) fn sdf_unchecked(parts: &[PartPrimitive], q: Vec3) -> f64 {
    parts
        .iter()
        .map(|p| part_sdf(p, q))
        .fold(f64::INFINITY, f64::min)
}

/// Index of the part with the smallest signed distance at `q` (lowest index
/// on ties).
pub fn part_responsibility(parts: &[PartPrimitive], q: Vec3) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in parts.iter().enumerate() {
        let d = part_sdf(p, q);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Central-difference gradient of the union field.
pub fn sdf_gradient(parts: &[PartPrimitive], q: Vec3, h: f64) -> Vec3 {
    let mut g = [0.0; 3];
    for i in 0..3 {
        let mut a = q;
        let mut b = q;
        a[i] += h;
        b[i] -= h;
        g[i] = (sdf_unchecked(parts, a) - sdf_unchecked(parts, b)) / (2.0 * h);
    }
    g
}
