//! Evaluation: Chamfer and Earth Mover's distances on surface samples, the
//! per-view Fréchet feature distance, and Chamfer-based retrieval.

pub mod chamfer;
pub mod emd;
pub mod frechet;

pub use chamfer::{chamfer, chamfer_brute, PointGrid};
pub use emd::{emd, emd_with, hungarian};
pub use frechet::{
    extract_view_features, frechet_distance, frechet_gaussian, mesh_feature_stats, FeatureExtractor,
    FeatureStats, Gaussian,
};

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::shape::{sample_surface, LabeledMesh};

/// Default surface samples per mesh for CD and EMD.
pub const DEFAULT_POINTS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub id: String,
    pub cd: f64,
}

/// Chamfer distance from `query` to every candidate on seeded surface
/// samples; the `k` closest in ascending order, ties broken by id.
pub fn retrieval_topk(
    query: &LabeledMesh,
    candidates: &[(String, LabeledMesh)],
    k: usize,
    n_points: usize,
    seed: u64,
) -> Result<Vec<RetrievalHit>> {
    if candidates.is_empty() {
        return arg_err("retrieval needs at least one candidate");
    }
    if k == 0 || k > candidates.len() {
        return arg_err(format!("k = {k} outside 1..={}", candidates.len()));
    }
    let q = sample_surface(query, n_points, seed)?;
    let mut hits = candidates
        .iter()
        .map(|(id, mesh)| {
            let pts = sample_surface(mesh, n_points, seed)?;
            Ok(RetrievalHit {
                id: id.clone(),
                cd: chamfer(&q, &pts)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    hits.sort_by(|a, b| a.cd.total_cmp(&b.cd).then_with(|| a.id.cmp(&b.id)));
    hits.truncate(k);
    Ok(hits)
}

/// Plain-text rank table.
pub fn retrieval_table(hits: &[RetrievalHit]) -> String {
    let mut out = String::from("rank  cd            id\n");
    for (i, h) in hits.iter().enumerate() {
        out.push_str(&format!("{:<5} {:<13.6e} {}\n", i + 1, h.cd, h.id));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cd_mean: f64,
    pub cd_per_item: Vec<f64>,
    pub emd_mean: f64,
    /// Absent when Fréchet scoring was not requested.
    pub frechet: Option<f64>,
    pub n_points: usize,
    pub seed: u64,
}

/// Scores predicted meshes against references pairwise. Prediction `i` is
/// sampled with seed `seed + 2i`, reference `i` with `seed + 2i + 1`.
pub fn evaluate_pairs(
    preds: &[LabeledMesh],
    refs: &[LabeledMesh],
    n_points: usize,
    seed: u64,
    with_frechet: bool,
) -> Result<MetricsReport> {
    if preds.len() != refs.len() || preds.is_empty() {
        return arg_err(format!(
            "need equal non-zero mesh counts, got {} and {}",
            preds.len(),
            refs.len()
        ));
    }
    let extractor = with_frechet.then(FeatureExtractor::new);
    let mut cds = Vec::with_capacity(preds.len());
    let mut emds = Vec::with_capacity(preds.len());
    let mut fids = Vec::new();
    for (i, (p, r)) in preds.iter().zip(refs).enumerate() {
        let s = seed.wrapping_add(2 * i as u64);
        let a = sample_surface(p, n_points, s)?;
        let b = sample_surface(r, n_points, s.wrapping_add(1))?;
        cds.push(chamfer(&a, &b)?);
        emds.push(emd(&a, &b)?);
        if let Some(e) = &extractor {
            fids.push(frechet_distance(&mesh_feature_stats(p, e)?, &mesh_feature_stats(r, e)?)?);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(MetricsReport {
        cd_mean: mean(&cds),
        emd_mean: mean(&emds),
        frechet: with_frechet.then(|| mean(&fids)),
        cd_per_item: cds,
        n_points,
        seed,
    })
}
