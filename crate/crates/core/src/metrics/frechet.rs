//! Fréchet distance between per-view Gaussian feature statistics, with a
//! frozen random convolutional feature extractor standing in for a
//! pretrained classifier.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{arg_err, Result};
use crate::render::{Camera, GrayImage};
use crate::shape::LabeledMesh;

pub const FEATURE_SEED: u64 = 0xFEED;
pub const FEATURE_DIM: usize = 64;
pub const FRECHET_VIEWS: usize = 20;
pub const VIEW_RES: usize = 128;

/// Mean and covariance of one view's features.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl Gaussian {
    /// Symmetrizes `sigma` and clamps eigenvalues in `[-1e-10, 0)` to zero.
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if sigma.nrows() != d || sigma.ncols() != d {
            return arg_err(format!("covariance is {}×{}, mean has {d}", sigma.nrows(), sigma.ncols()));
        }
        let sym = (&sigma + sigma.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        if eig.eigenvalues.iter().any(|&l| l < -1e-10) {
            return arg_err("covariance is not positive semi-definite");
        }
        let vals = eig.eigenvalues.map(|l| l.max(0.0));
        let sigma = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        Ok(Self { mu, sigma })
    }

    /// Sample statistics of the rows of `samples` (population covariance).
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = samples.first() else {
            return arg_err("no feature samples");
        };
        let d = first.len();
        let n = samples.len() as f64;
        let mut mu = DVector::zeros(d);
        for s in samples {
            if s.len() != d {
                return arg_err("feature samples differ in width");
            }
            mu += DVector::from_column_slice(s);
        }
        mu /= n;
        let mut sigma = DMatrix::zeros(d, d);
        for s in samples {
            let c = DVector::from_column_slice(s) - &mu;
            sigma += &c * c.transpose();
        }
        sigma /= n;
        Self::new(mu, sigma)
    }
}

/// Per-view statistics for one shape.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStats {
    pub views: Vec<Gaussian>,
}

fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// `‖μ₁ − μ₂‖² + Tr(Σ₁ + Σ₂ − 2(Σ₂Σ₁)^{1/2})`.
pub fn frechet_gaussian(a: &Gaussian, b: &Gaussian) -> Result<f64> {
    if a.mu.len() != b.mu.len() {
        return arg_err(format!("feature widths {} and {} differ", a.mu.len(), b.mu.len()));
    }
    // Tr((Σ₂Σ₁)^{1/2}) = Tr((Σ₂^{1/2} Σ₁ Σ₂^{1/2})^{1/2}), a symmetric form
    let s = sqrt_psd(&b.sigma);
    let inner = &s * &a.sigma * &s;
    let tr_sqrt = sqrt_psd(&inner).trace();
    let dm = (&a.mu - &b.mu).norm_squared();
    Ok((dm + a.sigma.trace() + b.sigma.trace() - 2.0 * tr_sqrt).max(0.0))
}

/// View-averaged Fréchet distance.
pub fn frechet_distance(out: &FeatureStats, reference: &FeatureStats) -> Result<f64> {
    if out.views.len() != reference.views.len() || out.views.is_empty() {
        return arg_err(format!(
            "view counts {} and {} must match and be non-zero",
            out.views.len(),
            reference.views.len()
        ));
    }
    let mut total = 0.0;
    for (a, b) in out.views.iter().zip(&reference.views) {
        total += frechet_gaussian(a, b)?;
    }
    Ok(total / out.views.len() as f64)
}

struct Conv {
    cin: usize,
    cout: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

/// Three frozen 3×3 stride-2 convolutions with ReLU, weights drawn from
/// `FEATURE_SEED`.
pub struct FeatureExtractor {
    layers: Vec<Conv>,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self::new()
    }
}

impl FeatureExtractor {
    pub fn new() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(FEATURE_SEED);
        let layers = [(1, 16), (16, 32), (32, FEATURE_DIM)]
            .into_iter()
            .map(|(cin, cout)| {
                let std = (2.0 / (9 * cin) as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                Conv {
                    cin,
                    cout,
                    w: (0..cout * cin * 9).map(|_| normal.sample(&mut rng)).collect(),
                    b: (0..cout).map(|_| normal.sample(&mut rng) * 0.1).collect(),
                }
            })
            .collect();
        Self { layers }
    }

    /// Final feature map as `h·w` columns of `FEATURE_DIM` values.
    pub fn columns(&self, image: &GrayImage) -> Result<Vec<Vec<f64>>> {
        let (w0, h0) = (image.width(), image.height());
        if w0 != h0 || w0 < 8 {
            return arg_err(format!("feature extraction needs a square image, got {w0}×{h0}"));
        }
        // channel-major maps; ink and shading as deviation from white
        let mut map: Vec<f64> = image.data().iter().map(|v| 1.0 - v).collect();
        let mut side = w0;
        for layer in &self.layers {
            let out_side = side.div_ceil(2);
            let mut out = vec![0.0; layer.cout * out_side * out_side];
            for o in 0..layer.cout {
                for y in 0..out_side {
                    for x in 0..out_side {
                        let mut acc = layer.b[o];
                        for c in 0..layer.cin {
                            let wk = &layer.w[(o * layer.cin + c) * 9..][..9];
                            let plane = &map[c * side * side..][..side * side];
                            for ky in 0..3 {
                                let sy = (2 * y + ky) as isize - 1;
                                if sy < 0 || sy >= side as isize {
                                    continue;
                                }
                                for kx in 0..3 {
                                    let sx = (2 * x + kx) as isize - 1;
                                    if sx < 0 || sx >= side as isize {
                                        continue;
                                    }
                                    acc += wk[ky * 3 + kx] * plane[sy as usize * side + sx as usize];
                                }
                            }
                        }
                        out[(o * out_side + y) * out_side + x] = acc.max(0.0);
                    }
                }
            }
            map = out;
            side = out_side;
        }
        let n = side * side;
        Ok((0..n)
            .map(|i| (0..FEATURE_DIM).map(|c| map[c * n + i]).collect())
            .collect())
    }

    /// Globally pooled `FEATURE_DIM` vector.
    pub fn features(&self, image: &GrayImage) -> Result<Vec<f64>> {
        let cols = self.columns(image)?;
        let n = cols.len() as f64;
        let mut out = vec![0.0; FEATURE_DIM];
        for col in &cols {
            for (o, v) in out.iter_mut().zip(col) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= n);
        Ok(out)
    }

    /// Statistics over the spatial columns of one view.
    pub fn view_stats(&self, image: &GrayImage) -> Result<Gaussian> {
        Gaussian::from_samples(&self.columns(image)?)
    }
}

pub fn extract_view_features(image: &GrayImage) -> Result<Vec<f64>> {
    FeatureExtractor::new().features(image)
}

/// `FRECHET_VIEWS` cameras on a ring at 20° elevation.
pub fn frechet_cameras() -> Vec<Camera> {
    (0..FRECHET_VIEWS)
        .map(|i| Camera::orthographic((360.0 * i as f64 / FRECHET_VIEWS as f64).to_radians(), 20f64.to_radians()))
        .collect()
}

/// Z-buffered Lambert rendering of a mesh on white.
pub fn render_mesh_shaded(mesh: &LabeledMesh, camera: &Camera, res: usize) -> GrayImage {
    let mut img = GrayImage::filled(res, res, 1.0);
    let mut depth = vec![f64::INFINITY; res * res];
    let (_, _, forward) = camera.basis();
    let eye = camera.eye();
    for f in 0..mesh.faces.len() {
        let tri = mesh.triangle(f);
        let e1: [f64; 3] = std::array::from_fn(|k| tri[1][k] - tri[0][k]);
        let e2: [f64; 3] = std::array::from_fn(|k| tri[2][k] - tri[0][k]);
        let n = [
            e1[1] * e2[2] - e1[2] * e2[1],
            e1[2] * e2[0] - e1[0] * e2[2],
            e1[0] * e2[1] - e1[1] * e2[0],
        ];
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if len == 0.0 {
            continue;
        }
        let facing = -(n[0] * forward[0] + n[1] * forward[1] + n[2] * forward[2]) / len;
        let shade = 0.1 + 0.8 * facing.abs();
        let pix: Vec<(f64, f64)> = tri.iter().map(|p| camera.project(*p, res)).collect();
        let dep: Vec<f64> = tri
            .iter()
            .map(|p| (0..3).map(|k| (p[k] - eye[k]) * forward[k]).sum())
            .collect();
        let (x0, x1) = (pix.iter().map(|p| p.0).fold(f64::INFINITY, f64::min), pix.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max));
        let (y0, y1) = (pix.iter().map(|p| p.1).fold(f64::INFINITY, f64::min), pix.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max));
        let area = (pix[1].0 - pix[0].0) * (pix[2].1 - pix[0].1) - (pix[2].0 - pix[0].0) * (pix[1].1 - pix[0].1);
        if area.abs() < 1e-12 {
            continue;
        }
        let cx0 = (x0 - 0.5).ceil().max(0.0) as usize;
        let cy0 = (y0 - 0.5).ceil().max(0.0) as usize;
        let cx1 = ((x1 - 0.5).floor().min(res as f64 - 1.0)).max(-1.0);
        let cy1 = ((y1 - 0.5).floor().min(res as f64 - 1.0)).max(-1.0);
        if cx1 < 0.0 || cy1 < 0.0 {
            continue;
        }
        for y in cy0..=cy1 as usize {
            for x in cx0..=cx1 as usize {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let w0 = ((pix[1].0 - px) * (pix[2].1 - py) - (pix[2].0 - px) * (pix[1].1 - py)) / area;
                let w1 = ((pix[2].0 - px) * (pix[0].1 - py) - (pix[0].0 - px) * (pix[2].1 - py)) / area;
                let w2 = 1.0 - w0 - w1;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let d = w0 * dep[0] + w1 * dep[1] + w2 * dep[2];
                let i = y * res + x;
                if d < depth[i] {
                    depth[i] = d;
                    img.set(x, y, shade);
                }
            }
        }
    }
    img
}

/// Statistics of a mesh over the standard Fréchet view ring.
pub fn mesh_feature_stats(mesh: &LabeledMesh, extractor: &FeatureExtractor) -> Result<FeatureStats> {
    let views = frechet_cameras()
        .iter()
        .map(|cam| extractor.view_stats(&render_mesh_shaded(mesh, cam, VIEW_RES)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureStats { views })
}
