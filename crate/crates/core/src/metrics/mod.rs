//! Cluster-structure and isotropy metrics.

mod indices;
mod isotropy;
mod silhouette;

pub use indices::{aux_indices, AuxIndices, IndexValue};
pub use isotropy::{
    chord_cos_identity_residual, chord_cos_residual_of, isoscore, isoscore_from_variance,
    isotropy_objective, reoriented_variance, score_from_defect, IsoScoreReport,
};
pub use silhouette::{cost, silhouette, silhouette_objective, SilhouetteReport};

use rand::Rng;

use crate::error::Result;
use crate::geometry::PointCloud;
use crate::labels::LabelAssignment;

/// Uniform sample of `cap` row indices without replacement, sorted, or
/// `None` when the cloud is no larger than the cap.
pub fn sample_indices<R: Rng + ?Sized>(n: usize, cap: Option<usize>, rng: &mut R) -> Option<Vec<usize>> {
    let cap = cap?;
    if n <= cap {
        return None;
    }
    let mut picked = rand::seq::index::sample(rng, n, cap).into_vec();
    picked.sort_unstable();
    Some(picked)
}

/// Restricts a cloud and its labels to a uniform random subset when `n`
/// exceeds `cap`. Each call draws afresh from `rng`.
pub fn subsample<R: Rng + ?Sized>(
    cloud: &PointCloud,
    labels: &LabelAssignment,
    cap: Option<usize>,
    rng: &mut R,
) -> Result<(PointCloud, LabelAssignment)> {
    match sample_indices(cloud.len(), cap, rng) {
        Some(idx) => Ok((cloud.select(&idx)?, labels.select(&idx)?)),
        None => Ok((cloud.clone(), labels.clone())),
    }
}
