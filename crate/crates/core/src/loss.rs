//! Differentiable full-batch losses with analytic gradients for both the
//! point coordinates and the classifier head. All reductions are means.

use crate::error::{Error, Result};
use crate::geometry::{dist, PointCloud};
use crate::labels::LabelAssignment;
use crate::objectives::ClassifierHead;

/// Loss value and gradients. `points` is row-major like the cloud, `weights`
/// matches [`ClassifierHead::weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

/// Backpropagates `dlogits` (row-major `n x k`) through `X W + b`.
fn backprop_linear(points: &[f64], head: &ClassifierHead, dlogits: &[f64]) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
    let d = head.dim();
    let k = head.classes();
    let w = head.weights();
    let mut gp = vec![0.0; points.len()];
    let mut gw = vec![0.0; d * k];
    for ((row, g_row), dz) in points
        .chunks_exact(d)
        .zip(gp.chunks_exact_mut(d))
        .zip(dlogits.chunks_exact(k))
    {
        for i in 0..d {
            let wi = &w[i * k..(i + 1) * k];
            let gwi = &mut gw[i * k..(i + 1) * k];
            let mut acc = 0.0;
            for c in 0..k {
                acc += dz[c] * wi[c];
                gwi[c] += row[i] * dz[c];
            }
            g_row[i] = acc;
        }
    }
    let gb = head.bias().map(|_| {
        let mut gb = vec![0.0; k];
        for dz in dlogits.chunks_exact(k) {
            for (g, z) in gb.iter_mut().zip(dz) {
                *g += z;
            }
        }
        gb
    });
    (gp, gw, gb)
}

/// Mean softmax cross-entropy on raw row-major points.
pub fn cross_entropy_raw(points: &[f64], head: &ClassifierHead, targets: &[usize]) -> LossGrad {
    let k = head.classes();
    let n = targets.len();
    let mut dz = head.logits(points);
    let mut total = 0.0;
    for (z, &t) in dz.chunks_exact_mut(k).zip(targets) {
        let (arg, m) = z
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        let rest: f64 = z
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != arg)
            .map(|(_, &v)| (v - m).exp())
            .sum();
        // log-sum-exp, with log1p keeping saturated losses accurate
        let lse = m + rest.ln_1p();
        total += lse - z[t];
        for v in z.iter_mut() {
            *v = (*v - lse).exp() / n as f64;
        }
        z[t] -= 1.0 / n as f64;
    }
    let (gp, gw, gb) = backprop_linear(points, head, &dz);
    LossGrad {
        loss: total / n as f64,
        points: gp,
        weights: gw,
        bias: gb,
    }
}

/// Mean over points and symbols of per-symbol sigmoid binary cross-entropy.
/// `targets` is the row-major 0/1 matrix of [`LabelAssignment::target_matrix`].
pub fn bce_raw(points: &[f64], head: &ClassifierHead, targets: &[f64]) -> LossGrad {
    let k = head.classes();
    let n = targets.len() / k;
    let scale = 1.0 / (n * k) as f64;
    let mut dz = head.logits(points);
    let mut total = 0.0;
    for (z, t) in dz.iter_mut().zip(targets) {
        // softplus(z) - t z, written to avoid overflow
        total += z.max(0.0) - t * *z + (-z.abs()).exp().ln_1p();
        let p = if *z >= 0.0 {
            1.0 / (1.0 + (-*z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        };
        *z = (p - t) * scale;
    }
    let (gp, gw, gb) = backprop_linear(points, head, &dz);
    LossGrad {
        loss: total * scale,
        points: gp,
        weights: gw,
        bias: gb,
    }
}

pub fn cross_entropy_loss(cloud: &PointCloud, labels: &LabelAssignment, head: &ClassifierHead) -> Result<LossGrad> {
    let targets = labels.class_indices("cross-entropy")?;
    head.check_against(cloud, labels)?;
    Ok(cross_entropy_raw(cloud.as_slice(), head, &targets))
}

pub fn bce_multilabel_loss(cloud: &PointCloud, labels: &LabelAssignment, head: &ClassifierHead) -> Result<LossGrad> {
    head.check_against(cloud, labels)?;
    Ok(bce_raw(cloud.as_slice(), head, &labels.target_matrix()))
}

/// Mean triplet hinge over the given (anchor, positive, negative) triples and
/// its gradient with respect to the points. Zero-length differences get a
/// zero subgradient.
pub fn triplet_raw(points: &[f64], dim: usize, triples: &[(usize, usize, usize)]) -> Result<(f64, Vec<f64>)> {
    if triples.is_empty() {
        return Err(Error::NoValidTriplet);
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut grad = vec![0.0; points.len()];
    let scale = 1.0 / triples.len() as f64;
    let mut total = 0.0;
    let mut unit_p = vec![0.0; dim];
    let mut unit_n = vec![0.0; dim];
    for &(a, p, q) in triples {
        let dp = dist(row(a), row(p));
        let dn = dist(row(a), row(q));
        let hinge = dp - dn;
        if hinge <= 0.0 {
            continue;
        }
        total += hinge;
        for i in 0..dim {
            unit_p[i] = if dp > 0.0 { (row(a)[i] - row(p)[i]) / dp } else { 0.0 };
            unit_n[i] = if dn > 0.0 { (row(a)[i] - row(q)[i]) / dn } else { 0.0 };
        }
        for i in 0..dim {
            grad[a * dim + i] += scale * (unit_p[i] - unit_n[i]);
            grad[p * dim + i] -= scale * unit_p[i];
            grad[q * dim + i] += scale * unit_n[i];
        }
    }
    Ok((total * scale, grad))
}
