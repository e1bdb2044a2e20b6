use crate::error::{Error, Result};
#[cfg(target_arch = "x86_64")]
use crate::geometry::avx2;
use crate::geometry::{dist, has_avx2, sq_dist, sq_dist_two, PointCloud};
use crate::labels::{sign, LabelAssignment};

/// Per-point silhouettes and their unweighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteReport {
    pub per_point: Vec<f64>,
    pub mean: f64,
}

/// Mean Euclidean distance from `point` to the members of `set`.
pub fn cost<R: AsRef<[f64]>>(point: &[f64], set: &[R]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut total = 0.0;
    for other in set {
        let other = other.as_ref();
        if other.len() != point.len() {
            return Err(Error::DimensionMismatch {
                expected: point.len(),
                found: other.len(),
            });
        }
        total += dist(point, other);
    }
    Ok(total / set.len() as f64)
}

/// Silhouette of every point against the composite-label clustering.
///
/// Cohesion is the mean distance to the other members of the point's own
/// cluster; separation the smallest mean distance to any other cluster.
/// A point alone in its cluster scores 0, as does a point with
/// `sep == coh == 0`.
pub fn silhouette(cloud: &PointCloud, labels: &LabelAssignment) -> Result<SilhouetteReport> {
    if labels.len() != cloud.len() {
        return Err(Error::InvalidLabels(format!(
            "{} labels for {} points",
            labels.len(),
            cloud.len()
        )));
    }
    let clusters = labels.clusters();
    let k = clusters.count();
    if k < 2 {
        return Err(Error::SilhouetteUndefined(k));
    }
    let n = cloud.len();
    let ids = &clusters.ids;

    let sums = cluster_distance_sums(cloud, ids, k);

    let per_point: Vec<f64> = (0..n)
        .map(|j| {
            let own = ids[j];
            let size = clusters.sizes[own];
            if size == 1 {
                return 0.0;
            }
            let row = &sums[j * k..(j + 1) * k];
            let coh = row[own] / (size - 1) as f64;
            let sep = (0..k)
                .filter(|&c| c != own)
                .map(|c| row[c] / clusters.sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = sep.max(coh);
            if denom == 0.0 {
                0.0
            } else {
                (sep - coh) / denom
            }
        })
        .collect();
    let mean = per_point.iter().sum::<f64>() / n as f64;
    Ok(SilhouetteReport { per_point, mean })
}

/// `sums[j * k + c]` is the total distance from point `j` to the members of
/// cluster `c`. Pairs are added in ascending order of the partner index.
fn cluster_distance_sums(cloud: &PointCloud, ids: &[usize], k: usize) -> Vec<f64> {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: AVX2 support was detected at runtime.
        return unsafe { sums_avx2(cloud, ids, k) };
    }
    sums_with(cloud, ids, k, sq_dist_two)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
fn sums_avx2(cloud: &PointCloud, ids: &[usize], k: usize) -> Vec<f64> {
    sums_with(cloud, ids, k, |a, b0, b1| avx2::sq_dist_two(a, b0, b1))
}

#[inline(always)]
fn sums_with(cloud: &PointCloud, ids: &[usize], k: usize, two: impl Fn(&[f64], &[f64], &[f64]) -> (f64, f64)) -> Vec<f64> {
    let n = cloud.len();
    let mut sums = vec![0.0; n * k];
    for j in 0..n {
        let a = cloud.row(j);
        let cj = ids[j];
        let mut kk = j + 1;
        while kk + 1 < n {
            let (s0, s1) = two(a, cloud.row(kk), cloud.row(kk + 1));
            let (v0, v1) = (s0.sqrt(), s1.sqrt());
            sums[j * k + ids[kk]] += v0;
            sums[kk * k + cj] += v0;
            sums[j * k + ids[kk + 1]] += v1;
            sums[(kk + 1) * k + cj] += v1;
            kk += 2;
        }
        if kk < n {
            let v = sq_dist(a, cloud.row(kk)).sqrt();
            sums[j * k + ids[kk]] += v;
            sums[kk * k + cj] += v;
        }
    }
    sums
}

/// Signed double sum over ordered pairs of squared distances: intra-label
/// pairs count negatively, inter-label pairs positively.
pub fn silhouette_objective(cloud: &PointCloud, labels: &LabelAssignment) -> Result<f64> {
    if labels.len() != cloud.len() {
        return Err(Error::InvalidLabels(format!(
            "{} labels for {} points",
            labels.len(),
            cloud.len()
        )));
    }
    let n = cloud.len();
    let mut total = 0.0;
    for j in 0..n {
        let lj = labels.label(j);
        for k in 0..n {
            total += sign(lj, labels.label(k)) * sq_dist(cloud.row(j), cloud.row(k));
        }
    }
    Ok(total)
}
