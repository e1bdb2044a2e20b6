use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{dist, sq_dist, PointCloud};
use crate::labels::LabelAssignment;

/// A validity index value that may be unbounded (e.g. a zero denominator
/// from perfectly collapsed clusters). Serialises as
/// `{"value": x, "unbounded": false}` or `{"value": null, "unbounded": true}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IndexValue {
    Finite(f64),
    Unbounded,
}

impl IndexValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            IndexValue::Finite(v) => Some(v),
            IndexValue::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, IndexValue::Unbounded)
    }

    fn ratio(num: f64, den: f64) -> Self {
        if den == 0.0 {
            IndexValue::Unbounded
        } else {
            IndexValue::Finite(num / den)
        }
    }
}

impl Serialize for IndexValue {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("IndexValue", 2)?;
        s.serialize_field("value", &self.finite())?;
        s.serialize_field("unbounded", &self.is_unbounded())?;
        s.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuxIndices {
    /// Smallest inter-cluster point distance over largest cluster diameter.
    pub dunn: IndexValue,
    /// Between- over within-cluster dispersion, each per degree of freedom.
    pub calinski_harabasz: IndexValue,
    /// Mean over clusters of the worst `(s_i + s_j) / |c_i - c_j|` ratio.
    pub davies_bouldin: f64,
}

/// Dunn, Caliński–Harabasz and Davies–Bouldin indices of the composite-label
/// clustering. Davies–Bouldin treats a pair of coincident centroids as
/// infinitely separated, contributing 0.
pub fn aux_indices(cloud: &PointCloud, labels: &LabelAssignment) -> Result<AuxIndices> {
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
    let d = cloud.dim();
    let first = cloud.row(0);
    if cloud.rows().all(|r| r == first) {
        return Err(Error::Degenerate("all points are identical".into()));
    }

    let mut min_inter = f64::INFINITY;
    let mut max_diameter = 0.0f64;
    for j in 0..n {
        for kk in (j + 1)..n {
            let v = sq_dist(cloud.row(j), cloud.row(kk));
            if clusters.ids[j] == clusters.ids[kk] {
                max_diameter = max_diameter.max(v);
            } else {
                min_inter = min_inter.min(v);
            }
        }
    }
    let dunn = IndexValue::ratio(min_inter.sqrt(), max_diameter.sqrt());

    let mut centroids = vec![0.0; k * d];
    for (row, &c) in cloud.rows().zip(&clusters.ids) {
        for (acc, x) in centroids[c * d..(c + 1) * d].iter_mut().zip(row) {
            *acc += x;
        }
    }
    for c in 0..k {
        let size = clusters.sizes[c] as f64;
        centroids[c * d..(c + 1) * d]
            .iter_mut()
            .for_each(|x| *x /= size);
    }
    let centroid = |c: usize| &centroids[c * d..(c + 1) * d];
    let mean = cloud.mean();

    let between: f64 = (0..k)
        .map(|c| clusters.sizes[c] as f64 * sq_dist(centroid(c), &mean))
        .sum();
    let mut within = 0.0;
    let mut scatter = vec![0.0; k];
    for (row, &c) in cloud.rows().zip(&clusters.ids) {
        within += sq_dist(row, centroid(c));
        scatter[c] += dist(row, centroid(c));
    }
    for (s, &size) in scatter.iter_mut().zip(&clusters.sizes) {
        *s /= size as f64;
    }
    let calinski_harabasz = if n == k {
        IndexValue::Unbounded
    } else {
        IndexValue::ratio(
            between / (k - 1) as f64,
            within / (n - k) as f64,
        )
    };

    let mut db = 0.0;
    for a in 0..k {
        let mut worst = 0.0f64;
        for b in 0..k {
            if a == b {
                continue;
            }
            let sep = dist(centroid(a), centroid(b));
            if sep > 0.0 {
                worst = worst.max((scatter[a] + scatter[b]) / sep);
            }
        }
        db += worst;
    }

    Ok(AuxIndices {
        dunn,
        calinski_harabasz,
        davies_bouldin: db / k as f64,
    })
}
