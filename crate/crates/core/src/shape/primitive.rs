//! Primitive parts and their exact latent encoding.
//!
//! A latent row holds 16 semantic entries followed by zero padding:
//!
//! | index | content                         |
//! |-------|---------------------------------|
//! | 0..3  | one-hot kind (box, cylinder, ellipsoid) |
//! | 3..6  | center                          |
//! | 6..9  | half extents                    |
//! | 9, 10 | cos yaw, sin yaw                |
//! | 11    | occupancy tag (1.0)             |
//! | 12..16| zeros                           |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of meaningful leading entries in a latent row.
pub const SEMANTIC_WIDTH: usize = 16;

pub const HALF_EXTENT_RANGE: (f64, f64) = (0.02, 1.2);
pub const CENTER_LIMIT: f64 = 1.1;

pub type Vec3 = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartKind {
    Box,
    /// Vertical (y) axis; radius is `half_extents[0]`, half height is
    /// `half_extents[1]`. `half_extents[2]` is carried but unused.
    Cylinder,
    Ellipsoid,
}

impl PartKind {
    pub const ALL: [PartKind; 3] = [PartKind::Box, PartKind::Cylinder, PartKind::Ellipsoid];

    pub fn index(self) -> usize {
        match self {
            PartKind::Box => 0,
            PartKind::Cylinder => 1,
            PartKind::Ellipsoid => 2,
        }
    }
}

/// One geometric part: a posed box, cylinder or ellipsoid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartPrimitive {
    pub kind: PartKind,
    pub center: Vec3,
    pub half_extents: Vec3,
    /// Rotation about the vertical axis, radians in `[-π, π)`.
    pub yaw: f64,
}

impl PartPrimitive {
    pub fn new(kind: PartKind, center: Vec3, half_extents: Vec3, yaw: f64) -> Self {
        Self {
            kind,
            center,
            half_extents,
            yaw: wrap_angle(yaw),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.half_extents.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Argument(format!(
                "half extents must be positive: {:?}",
                self.half_extents
            )));
        }
        for i in 0..3 {
            if (self.center[i].abs() + self.half_extents[i]) > 1.25 + 1e-12 {
                return Err(Error::Argument(format!(
                    "part exceeds [-1.25, 1.25]^3 on axis {i}"
                )));
            }
        }
        if !(-std::f64::consts::PI..std::f64::consts::PI).contains(&self.yaw) {
            return Err(Error::Argument(format!("yaw {} outside [-π, π)", self.yaw)));
        }
        Ok(())
    }

    /// Radius of a bounding sphere around the part center.
    pub fn bounding_radius(&self) -> f64 {
        let h = self.half_extents;
        match self.kind {
            PartKind::Cylinder => (h[0] * h[0] + h[1] * h[1]).sqrt(),
            _ => (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt(),
        }
    }

    /// World-space axis-aligned bounds `(min, max)`.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        let h = self.half_extents;
        let (c, s) = (self.yaw.cos().abs(), self.yaw.sin().abs());
        let (hx, hz) = match self.kind {
            PartKind::Cylinder => (h[0], h[0]),
            _ => (c * h[0] + s * h[2], s * h[0] + c * h[2]),
        };
        let e = [hx, h[1], hz];
        let min = [self.center[0] - e[0], self.center[1] - e[1], self.center[2] - e[2]];
        let max = [self.center[0] + e[0], self.center[1] + e[1], self.center[2] + e[2]];
        (min, max)
    }

    /// Maps a world point into the part's unrotated local frame.
    pub fn to_local(&self, q: Vec3) -> Vec3 {
        let d = [q[0] - self.center[0], q[1] - self.center[1], q[2] - self.center[2]];
        let (s, c) = self.yaw.sin_cos();
        // inverse of a rotation about +y by yaw
        [c * d[0] - s * d[2], d[1], s * d[0] + c * d[2]]
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    if (-PI..PI).contains(&a) {
        return a;
    }
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Writes the latent encoding of `p` into a row of width `d_model`.
pub fn encode_part(p: &PartPrimitive, d_model: usize) -> Result<Vec<f64>> {
    if d_model < SEMANTIC_WIDTH {
        return Err(Error::Config(format!(
            "d_model {d_model} is below the {SEMANTIC_WIDTH}-entry part layout"
        )));
    }
    let mut row = vec![0.0; d_model];
    row[p.kind.index()] = 1.0;
    row[3..6].copy_from_slice(&p.center);
    row[6..9].copy_from_slice(&p.half_extents);
    row[9] = p.yaw.cos();
    row[10] = p.yaw.sin();
    row[11] = 1.0;
    Ok(row)
}

/// Total decoder: clamps and normalizes any finite row into a valid part.
pub fn decode_part(row: &[f64]) -> Result<PartPrimitive> {
    if row.len() < SEMANTIC_WIDTH {
        return Err(Error::Argument(format!(
            "latent row has {} entries, need at least {SEMANTIC_WIDTH}",
            row.len()
        )));
    }
    if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("latent row holds non-finite value {bad}")));
    }
    let mut kind = 0;
    for i in 1..3 {
        if row[i] > row[kind] {
            kind = i;
        }
    }
    let center = [
        row[3].clamp(-CENTER_LIMIT, CENTER_LIMIT),
        row[4].clamp(-CENTER_LIMIT, CENTER_LIMIT),
        row[5].clamp(-CENTER_LIMIT, CENTER_LIMIT),
    ];
    let (lo, hi) = HALF_EXTENT_RANGE;
    let half_extents = [row[6].clamp(lo, hi), row[7].clamp(lo, hi), row[8].clamp(lo, hi)];
    let yaw = wrap_angle(row[10].atan2(row[9]));
    Ok(PartPrimitive {
        kind: PartKind::ALL[kind],
        center,
        half_extents,
        yaw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_box_layout() {
        let p = PartPrimitive::new(PartKind::Box, [0.0; 3], [1.0; 3], 0.0);
        let row = encode_part(&p, 20).unwrap();
        let mut expect = vec![1., 0., 0., 0., 0., 0., 1., 1., 1., 1., 0., 1., 0., 0., 0., 0.];
        expect.extend([0.0; 4]);
        assert_eq!(row, expect);
    }

    #[test]
    fn narrow_width_is_config_error() {
        let p = PartPrimitive::new(PartKind::Box, [0.0; 3], [1.0; 3], 0.0);
        assert!(matches!(encode_part(&p, 15), Err(Error::Config(_))));
    }

    #[test]
    fn decode_rules() {
        let mut row = vec![0.0; 16];
        row[0] = 0.4;
        row[1] = 0.39;
        row[2] = 0.1;
        row[6] = -0.5;
        row[7] = 5.0;
        row[8] = 0.3;
        row[3] = 3.0;
        row[9] = 1.0;
        let p = decode_part(&row).unwrap();
        assert_eq!(p.kind, PartKind::Box);
        assert_eq!(p.half_extents, [0.02, 1.2, 0.3]);
        assert_eq!(p.center[0], 1.1);

        row[0] = 0.39;
        row[1] = 0.39;
        assert_eq!(decode_part(&row).unwrap().kind, PartKind::Box);

        row[4] = f64::NAN;
        assert!(matches!(decode_part(&row), Err(Error::Numeric(_))));
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.5), 0.5);
    }

    /// The full parameter grid: 3 kinds × 5³ centers × 3³ extents × 8 yaws.
    pub(crate) fn parameter_grid() -> Vec<PartPrimitive> {
        let centers = [-0.5, -0.25, 0.0, 0.25, 0.5];
        let extents = [0.1, 0.35, 0.7];
        let mut out = Vec::new();
        for kind in PartKind::ALL {
            for &cx in &centers {
                for &cy in &centers {
                    for &cz in &centers {
                        for &hx in &extents {
                            for &hy in &extents {
                                for &hz in &extents {
                                    for k in 0..8 {
                                        let yaw = -PI + k as f64 * PI / 4.0;
                                        out.push(PartPrimitive::new(
                                            kind,
                                            [cx, cy, cz],
                                            [hx, hy, hz],
                                            yaw,
                                        ));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn round_trip_exact_on_grid() {
        let grid = parameter_grid();
        assert_eq!(grid.len(), 3 * 125 * 27 * 8);
        for p in &grid {
            p.validate().unwrap();
            let back = decode_part(&encode_part(p, 32).unwrap()).unwrap();
            assert_eq!(&back, p);
        }
    }

    #[test]
    fn distinct_primitives_have_distinct_rows() {
        let grid = parameter_grid();
        let mut rows: Vec<Vec<u64>> = grid
            .iter()
            .map(|p| {
                encode_part(p, 16)
                    .unwrap()
                    .iter()
                    .map(|v| v.to_bits())
                    .collect()
            })
            .collect();
        rows.sort();
        rows.dedup();
        assert_eq!(rows.len(), grid.len());
    }

    proptest::proptest! {
        #[test]
        fn random_round_trip(
            kind in 0usize..3,
            c in proptest::array::uniform3(-0.9f64..0.9),
            h in proptest::array::uniform3(0.02f64..0.3),
            yaw in -PI..PI,
        ) {
            let p = PartPrimitive::new(PartKind::ALL[kind], c, h, yaw);
            let back = decode_part(&encode_part(&p, 32).unwrap()).unwrap();
            proptest::prop_assert_eq!(back.kind, p.kind);
            proptest::prop_assert_eq!(back.center, p.center);
            proptest::prop_assert_eq!(back.half_extents, p.half_extents);
            let dy = wrap_angle(back.yaw - p.yaw);
            proptest::prop_assert!(dy.abs() < 1e-12);
        }
    }
}
