//! Closed-form objectives relating classification and metric learning to
//! cluster structure: the signed dot-product objective of a linear head and
//! its norm/distance expansion, and the triplet objective with its
//! weighted-sign upper bound.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::Uniform;

use crate::error::{Error, Result};
use crate::geometry::{dist, dot, sq_dist, PointCloud};
use crate::labels::{sign, Label, LabelAssignment};

/// Linear output projection. `weights` is `dim x classes`, row-major; column
/// `k` is the class vector of universe symbol `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    dim: usize,
    classes: usize,
    weights: Vec<f64>,
    bias: Option<Vec<f64>>,
}

impl ClassifierHead {
    pub fn new(dim: usize, classes: usize, weights: Vec<f64>, bias: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 || classes == 0 {
            return Err(Error::InvalidConfig("head needs dim >= 1 and classes >= 1".into()));
        }
        if weights.len() != dim * classes {
            return Err(Error::DimensionMismatch {
                expected: dim * classes,
                found: weights.len(),
            });
        }
        if let Some(b) = &bias {
            if b.len() != classes {
                return Err(Error::DimensionMismatch {
                    expected: classes,
                    found: b.len(),
                });
            }
        }
        Ok(Self {
            dim,
            classes,
            weights,
            bias,
        })
    }

    /// Builds a head from its class vectors.
    pub fn from_class_vectors<R: AsRef<[f64]>>(columns: &[R]) -> Result<Self> {
        let classes = columns.len();
        let dim = columns.first().map(|c| c.as_ref().len()).unwrap_or(0);
        let mut weights = vec![0.0; dim * classes];
        for (k, col) in columns.iter().enumerate() {
            let col = col.as_ref();
            if col.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: col.len(),
                });
            }
            for (i, w) in col.iter().enumerate() {
                weights[i * classes + k] = *w;
            }
        }
        Self::new(dim, classes, weights, None)
    }

    /// Entries uniform in `[-1/sqrt(dim), 1/sqrt(dim)]`, bias (if any) zero.
    pub fn random<R: Rng + ?Sized>(dim: usize, classes: usize, with_bias: bool, rng: &mut R) -> Result<Self> {
        let bound = 1.0 / (dim.max(1) as f64).sqrt();
        let uniform = Uniform::new_inclusive(-bound, bound)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let weights = (0..dim * classes).map(|_| rng.sample(uniform)).collect();
        Self::new(dim, classes, weights, with_bias.then(|| vec![0.0; classes]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub fn bias_mut(&mut self) -> Option<&mut [f64]> {
        self.bias.as_deref_mut()
    }

    pub fn class_vector(&self, k: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.weights[i * self.classes + k]).collect()
    }

    /// Row-major `n x classes` logits `X W (+ b)`.
    pub fn logits(&self, points: &[f64]) -> Vec<f64> {
        let k = self.classes;
        let n = points.len() / self.dim;
        let mut out = vec![0.0; n * k];
        for (row, z) in points.chunks_exact(self.dim).zip(out.chunks_exact_mut(k)) {
            if let Some(b) = &self.bias {
                z.copy_from_slice(b);
            }
            for (x, w) in row.iter().zip(self.weights.chunks_exact(k)) {
                for (zc, wc) in z.iter_mut().zip(w) {
                    *zc += x * wc;
                }
            }
        }
        out
    }

    pub(crate) fn check_against(&self, cloud: &PointCloud, labels: &LabelAssignment) -> Result<()> {
        if cloud.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: cloud.dim(),
            });
        }
        if labels.universe().len() != self.classes {
            return Err(Error::DimensionMismatch {
                expected: labels.universe().len(),
                found: self.classes,
            });
        }
        if labels.len() != cloud.len() {
            return Err(Error::InvalidLabels(format!(
                "{} labels for {} points",
                labels.len(),
                cloud.len()
            )));
        }
        Ok(())
    }
}

/// Both sides of `<d, c> = (|d|^2 + |c|^2 - |d - c|^2) / 2`.
pub fn dot_distance_identity(d: &[f64], c: &[f64]) -> Result<(f64, f64)> {
    if d.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: d.len(),
            found: c.len(),
        });
    }
    let lhs = dot(d, c);
    let rhs = 0.5 * (dot(d, d) + dot(c, c) - sq_dist(d, c));
    Ok((lhs, rhs))
}

/// The classifier objective evaluated directly and through its expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierObjective {
    /// `-sum_d sum_w sign(w, l(d)) <d, c^w>`.
    pub direct: f64,
    /// `-sum_d (|Ω| - 2) / 2 |d|^2`.
    pub data_norm_term: f64,
    /// `-sum_w (|D| - 2 |D_w|) / 2 |c^w|^2`.
    pub class_norm_term: f64,
    /// `1/2 sum_d sum_w sign(w, l(d)) |d - c^w|^2`.
    pub distance_term: f64,
}

impl ClassifierObjective {
    pub fn expanded(&self) -> f64 {
        self.data_norm_term + self.class_norm_term + self.distance_term
    }
}

/// Signed dot-product objective of a linear head (bias ignored).
pub fn classifier_objective(
    cloud: &PointCloud,
    labels: &LabelAssignment,
    head: &ClassifierHead,
) -> Result<ClassifierObjective> {
    let targets = labels.class_indices("the classifier objective")?;
    head.check_against(cloud, labels)?;
    let k = head.classes();
    let columns: Vec<Vec<f64>> = (0..k).map(|c| head.class_vector(c)).collect();
    let symbols: Vec<Label> = labels
        .universe()
        .iter()
        .map(|s| Label::single(s.as_str()))
        .collect::<Result<_>>()?;

    let mut direct = 0.0;
    let mut distance_term = 0.0;
    let mut data_norm_term = 0.0;
    let mut class_size = vec![0usize; k];
    for (row, &t) in cloud.rows().zip(&targets) {
        class_size[t] += 1;
        let own = &symbols[t];
        for (c, col) in columns.iter().enumerate() {
            let s = sign(&symbols[c], own);
            direct -= s * dot(row, col);
            distance_term += 0.5 * s * sq_dist(row, col);
        }
        data_norm_term -= (k as f64 - 2.0) / 2.0 * dot(row, row);
    }
    let n = cloud.len() as f64;
    let class_norm_term = columns
        .iter()
        .zip(&class_size)
        .map(|(col, &size)| -(n - 2.0 * size as f64) / 2.0 * dot(col, col))
        .sum();
    Ok(ClassifierObjective {
        direct,
        data_norm_term,
        class_norm_term,
        distance_term,
    })
}

/// Margin-free triplet hinge `max(|a - p| - |a - n|, 0)`. Panics if the
/// lengths differ.
pub fn triplet_loss(anchor: &[f64], positive: &[f64], negative: &[f64]) -> f64 {
    assert_eq!(anchor.len(), positive.len(), "dimension mismatch");
    assert_eq!(anchor.len(), negative.len(), "dimension mismatch");
    (dist(anchor, positive) - dist(anchor, negative)).max(0.0)
}

/// Weighted sign: `|D_w| - |D|` for equal labels, `|D_w| - 1` otherwise,
/// where `w` is the first label.
pub fn sign_wgt(a: &Label, b: &Label, counts: &BTreeMap<Label, usize>, total: usize) -> Result<i64> {
    let size = *counts
        .get(a)
        .ok_or_else(|| Error::UnknownLabel(a.to_string()))?;
    if !counts.contains_key(b) {
        return Err(Error::UnknownLabel(b.to_string()));
    }
    if a == b {
        Ok(size as i64 - total as i64)
    } else {
        Ok(size as i64 - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletBound {
    /// `-sum` of the hinge over every valid (anchor, positive, negative).
    pub objective: f64,
    /// `sum_d sum_d' sign_wgt(l(d), l(d')) |d - d'|`.
    pub bound: f64,
}

/// Every valid (anchor, positive, negative) index triple, anchor-major.
pub fn valid_triplets(labels: &LabelAssignment) -> Vec<(usize, usize, usize)> {
    let ids = labels.clusters().ids;
    let n = ids.len();
    let mut out = Vec::new();
    for a in 0..n {
        for p in 0..n {
            if p == a || ids[p] != ids[a] {
                continue;
            }
            for q in 0..n {
                if ids[q] != ids[a] {
                    out.push((a, p, q));
                }
            }
        }
    }
    out
}

/// Triplet objective together with its weighted-sign upper bound.
pub fn triplet_objective_and_bound(cloud: &PointCloud, labels: &LabelAssignment) -> Result<TripletBound> {
    labels.class_indices("the triplet objective")?;
    if labels.len() != cloud.len() {
        return Err(Error::InvalidLabels(format!(
            "{} labels for {} points",
            labels.len(),
            cloud.len()
        )));
    }
    let triples = valid_triplets(labels);
    if triples.is_empty() {
        return Err(Error::NoValidTriplet);
    }
    let objective = -triples
        .iter()
        .map(|&(a, p, q)| triplet_loss(cloud.row(a), cloud.row(p), cloud.row(q)))
        .sum::<f64>();

    let counts = labels.counts();
    let n = cloud.len();
    let mut bound = 0.0;
    for j in 0..n {
        for k in 0..n {
            let w = sign_wgt(labels.label(j), labels.label(k), &counts, n)?;
            bound += w as f64 * dist(cloud.row(j), cloud.row(k));
        }
    }
    Ok(TripletBound { objective, bound })
}
