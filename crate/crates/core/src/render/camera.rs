use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shape::mesh::{cross, dot, norm};
use crate::shape::Vec3;

/// Radius of the ball enclosing every shape (`[-1, 1]³`).
pub const SHAPE_CIRCUMRADIUS: f64 = 1.732_050_807_568_877_2;

/// Half width of the orthographic view window in world units.
pub const ORTHO_HALF_WIDTH: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Projection {
    Orthographic,
    /// Vertical field of view in radians.
    Perspective { fov: f64 },
}

/// Orbit camera looking at the origin with +y up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub projection: Projection,
}

/// A ray with unit direction.
#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Camera {
    pub fn orthographic(azimuth: f64, elevation: f64) -> Self {
        Self {
            azimuth,
            elevation,
            distance: 3.0,
            projection: Projection::Orthographic,
        }
    }

    /// The six training views: azimuths 0°, 60°, …, 300° at 20° elevation.
    pub fn standard_views() -> Vec<Camera> {
        (0..6)
            .map(|i| Camera::orthographic((60.0 * i as f64).to_radians(), 20f64.to_radians()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance > SHAPE_CIRCUMRADIUS) {
            return Err(Error::Argument(format!(
                "camera distance {} must exceed the shape circumradius",
                self.distance
            )));
        }
        if let Projection::Perspective { fov } = self.projection {
            let deg = fov.to_degrees();
            if !(deg > 10.0 && deg < 90.0) {
                return Err(Error::Argument(format!("field of view {deg}° outside (10°, 90°)")));
            }
        }
        if !self.azimuth.is_finite() || !self.elevation.is_finite() {
            return Err(Error::Argument("camera angles must be finite".into()));
        }
        Ok(())
    }

    pub fn eye(&self) -> Vec3 {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        [
            self.distance * ce * sa,
            self.distance * se,
            self.distance * ce * ca,
        ]
    }

    /// Orthonormal `(right, up, forward)` basis.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let e = self.eye();
        let d = norm(e);
        let forward = [-e[0] / d, -e[1] / d, -e[2] / d];
        let mut right = cross(forward, [0.0, 1.0, 0.0]);
        let rn = norm(right);
        if rn < 1e-12 {
            right = [1.0, 0.0, 0.0];
        } else {
            right = right.map(|v| v / rn);
        }
        let up = cross(right, forward);
        (right, up, forward)
    }

    /// Depth beyond which nothing can be hit.
    pub fn far(&self) -> f64 {
        self.distance + SHAPE_CIRCUMRADIUS
    }

    /// Ray through the center of pixel `(row, col)` of a `res × res` image.
    pub fn ray(&self, row: usize, col: usize, res: usize) -> Ray {
        let ndc_x = ((col as f64 + 0.5) / res as f64) * 2.0 - 1.0;
        let ndc_y = 1.0 - ((row as f64 + 0.5) / res as f64) * 2.0;
        let (right, up, forward) = self.basis();
        let eye = self.eye();
        match self.projection {
            Projection::Orthographic => {
                let (u, v) = (ndc_x * ORTHO_HALF_WIDTH, ndc_y * ORTHO_HALF_WIDTH);
                Ray {
                    origin: std::array::from_fn(|i| eye[i] + u * right[i] + v * up[i]),
                    dir: forward,
                }
            }
            Projection::Perspective { fov } => {
                let t = (fov / 2.0).tan();
                let d: Vec3 =
                    std::array::from_fn(|i| forward[i] + ndc_x * t * right[i] + ndc_y * t * up[i]);
                let n = norm(d);
                Ray {
                    origin: eye,
                    dir: d.map(|v| v / n),
                }
            }
        }
    }

    /// Projects a world point to continuous pixel coordinates `(col, row)`.
    pub fn project(&self, p: Vec3, res: usize) -> (f64, f64) {
        let (right, up, forward) = self.basis();
        let eye = self.eye();
        let rel = [p[0] - eye[0], p[1] - eye[1], p[2] - eye[2]];
        let (u, v) = match self.projection {
            Projection::Orthographic => (
                dot(rel, right) / ORTHO_HALF_WIDTH,
                dot(rel, up) / ORTHO_HALF_WIDTH,
            ),
            Projection::Perspective { fov } => {
                let z = dot(rel, forward);
                let t = (fov / 2.0).tan();
                (dot(rel, right) / (z * t), dot(rel, up) / (z * t))
            }
        };
        let col = (u + 1.0) / 2.0 * res as f64;
        let row = (1.0 - v) / 2.0 * res as f64;
        (col, row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Camera::orthographic(0.0, 0.3).validate().is_ok());
        let mut c = Camera::orthographic(0.0, 0.0);
        c.distance = 1.0;
        assert!(c.validate().is_err());
        c.distance = 3.0;
        c.projection = Projection::Perspective { fov: 5f64.to_radians() };
        assert!(c.validate().is_err());
        c.projection = Projection::Perspective { fov: 45f64.to_radians() };
        assert!(c.validate().is_ok());
    }

    #[test]
    fn center_ray_hits_origin_axis() {
        let cam = Camera::orthographic(0.7, 0.4);
        let r = cam.ray(127, 127, 255);
        // the center pixel's ray passes through the origin
        let t = -dot(r.origin, r.dir);
        let closest: Vec3 = std::array::from_fn(|i| r.origin[i] + t * r.dir[i]);
        assert!(norm(closest) < 1e-12);
    }

    #[test]
    fn projection_inverts_ray() {
        for cam in [
            Camera::orthographic(1.1, 0.3),
            Camera {
                projection: Projection::Perspective { fov: 0.8 },
                ..Camera::orthographic(-0.4, 0.2)
            },
        ] {
            let r = cam.ray(40, 90, 128);
            let p: Vec3 = std::array::from_fn(|i| r.origin[i] + 2.0 * r.dir[i]);
            let (col, row) = cam.project(p, 128);
            assert!((col - 90.5).abs() < 1e-9 && (row - 40.5).abs() < 1e-9);
        }
    }
}
