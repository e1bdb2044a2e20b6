//! IsoScore and the angle view of the isotropy defect.
//!
//! The cloud is PCA-reoriented, its per-axis variances are rescaled to the
//! length of the all-ones vector `1`, and the chord `||v~ - 1||` between the
//! two is the raw defect. Normalising the chord by its maximum
//! `sqrt(2 (d - sqrt d))` (all variance on one axis) gives a defect in
//! `[0, 1]`, which maps to the score via
//! `k = (d - defect^2 (d - sqrt d))^2 / d` and `score = (k - 1) / (d - 1)`.
//! The score is 1 for isotropic clouds and 0 for clouds lying on a line.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{pca_reorient, variance_from_pairs, PointCloud, VarianceVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsoScoreReport {
    /// Normalised chord between `v~` and `1`, in `[0, 1]`.
    pub defect: f64,
    /// IsoScore in `[0, 1]`.
    pub score: f64,
    /// Cosine between the variance vector and `1`.
    pub cos_alignment: f64,
}

/// Variance vector of the PCA-reoriented cloud.
pub fn reoriented_variance(cloud: &PointCloud) -> Result<VarianceVector> {
    let rotated = pca_reorient(cloud)?;
    Ok(variance_from_pairs(&rotated))
}

/// Maps a defect in `[0, 1]` to IsoScore for dimension `d >= 2`.
pub fn score_from_defect(defect: f64, d: usize) -> f64 {
    let d = d as f64;
    let k = (d - defect * defect * (d - d.sqrt())).powi(2) / d;
    ((k - 1.0) / (d - 1.0)).clamp(0.0, 1.0)
}

fn cosine_with_ones(v: &[f64]) -> f64 {
    let sum: f64 = v.iter().sum();
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (sum / (len * (v.len() as f64).sqrt())).clamp(-1.0, 1.0)
}

fn chord_to_ones(normalized: &[f64]) -> f64 {
    normalized
        .iter()
        .map(|x| (x - 1.0) * (x - 1.0))
        .sum::<f64>()
        .sqrt()
}

/// IsoScore of a cloud. Always re-runs PCA, so pre-rotated input is fine.
pub fn isoscore(cloud: &PointCloud) -> Result<IsoScoreReport> {
    if cloud.len() < 2 {
        return Err(Error::InvalidCloud("IsoScore needs at least 2 points".into()));
    }
    let d = cloud.dim();
    if d < 2 {
        return Err(Error::InvalidCloud("IsoScore needs dimension >= 2".into()));
    }
    let variance = reoriented_variance(cloud)?;
    isoscore_from_variance(&variance)
}

/// IsoScore of an already computed (PCA-axis) variance vector.
pub fn isoscore_from_variance(variance: &VarianceVector) -> Result<IsoScoreReport> {
    let d = variance.dim();
    if d < 2 {
        return Err(Error::InvalidCloud("IsoScore needs dimension >= 2".into()));
    }
    let normalized = variance.normalized()?;
    let raw = chord_to_ones(normalized.values());
    let df = d as f64;
    let defect = (raw / (2.0 * (df - df.sqrt())).sqrt()).clamp(0.0, 1.0);
    Ok(IsoScoreReport {
        defect,
        score: score_from_defect(defect, d),
        cos_alignment: cosine_with_ones(variance.values()),
    })
}

/// Isotropy objective: cosine between the reoriented variance vector and `1`.
pub fn isotropy_objective(cloud: &PointCloud) -> Result<f64> {
    let variance = reoriented_variance(cloud)?;
    if variance.norm() == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(cosine_with_ones(variance.values()))
}

/// Residual of the chord/half-angle identity
/// `||v~ - 1||^2 / (4d) - 1 = -cos^2(alpha / 2)`, with `alpha` the angle
/// between `v~` and `1`. Zero up to rounding for every valid cloud.
pub fn chord_cos_identity_residual(cloud: &PointCloud) -> Result<f64> {
    let variance = reoriented_variance(cloud)?;
    chord_cos_residual_of(&variance)
}

pub fn chord_cos_residual_of(variance: &VarianceVector) -> Result<f64> {
    let normalized = variance.normalized()?;
    let d = variance.dim() as f64;
    let chord = chord_to_ones(normalized.values());
    let alpha = cosine_with_ones(variance.values()).acos();
    let half = (alpha / 2.0).cos();
    Ok((chord * chord / (4.0 * d) - 1.0 + half * half).abs())
}
