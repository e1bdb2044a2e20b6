//! Dense point clouds and the linear-algebra primitives the metrics build on:
//! pairwise distances, population covariance, PCA reorientation and the
//! per-dimension variance vector.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// An ordered multiset of `n` points of shared dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud from row-major coordinates.
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCloud("dimension must be >= 1".into()));
        }
        if data.is_empty() {
            return Err(Error::InvalidCloud("cloud must hold at least one point".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidCloud(format!(
                "{} coordinates do not split into rows of {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidCloud(format!(
                "non-finite coordinate in point {}",
                pos / dim
            )));
        }
        Ok(Self {
            n: data.len() / dim,
            d: dim,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidCloud("cloud must hold at least one point".into()))?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, dim)
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false; a cloud holds at least one point.
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Sub-cloud made of the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::InvalidCloud(format!(
                    "row index {i} out of range for {} points",
                    self.n
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(data, self.d)
    }

    /// Per-dimension arithmetic mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for row in self.rows() {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        let n = self.n as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Applies `f` to every coordinate. Used by tests and transforms; the
    /// result is re-validated.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.data.iter().map(|&x| f(x)).collect(), self.d)
    }
}

/// Per-dimension variances of a cloud, optionally rescaled so that its
/// Euclidean norm equals that of the all-ones vector (`sqrt(d)`).
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceVector {
    variances: Vec<f64>,
    is_normalized: bool,
}

impl VarianceVector {
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::InvalidCloud("variance vector must be non-empty".into()));
        }
        if variances.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidCloud(
                "variances must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            variances,
            is_normalized: false,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.variances
    }

    pub fn is_normalized(&self) -> bool {
        self.is_normalized
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.variances)
    }

    /// Rescales to norm `sqrt(d)`. Fails on the zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let len = self.norm();
        if len == 0.0 {
            return Err(Error::ZeroVariance);
        }
        let target = (self.dim() as f64).sqrt();
        Ok(Self {
            variances: self.variances.iter().map(|v| v * target / len).collect(),
            is_normalized: true,
        })
    }
}

/// Squared Euclidean distance. The summation order is fixed (eight
/// interleaved partial sums, combined as a balanced tree, then the tail) so
/// every caller and every instruction set sees identical bits. Panics if the
/// lengths differ.
#[inline(always)]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    let mut acc = [0.0f64; LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (x, y) in (&mut ca).zip(&mut cb) {
        let x: &[f64; LANES] = x.try_into().unwrap();
        let y: &[f64; LANES] = y.try_into().unwrap();
        for l in 0..LANES {
            let t = x[l] - y[l];
            acc[l] += t * t;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let t = x - y;
        tail += t * t;
    }
    reduce(acc) + tail
}

/// Two squared distances from `a`, each summed in exactly the order
/// [`sq_dist`] uses. Interleaving them only shortens the dependency chains.
#[inline(always)]
pub(crate) fn sq_dist_two(a: &[f64], b0: &[f64], b1: &[f64]) -> (f64, f64) {
    let mut acc0 = [0.0f64; LANES];
    let mut acc1 = [0.0f64; LANES];
    let full = a.len() / LANES;
    for c in 0..full {
        let r = c * LANES..(c + 1) * LANES;
        let x: &[f64; LANES] = a[r.clone()].try_into().unwrap();
        let y0: &[f64; LANES] = b0[r.clone()].try_into().unwrap();
        let y1: &[f64; LANES] = b1[r].try_into().unwrap();
        for l in 0..LANES {
            let t0 = x[l] - y0[l];
            let t1 = x[l] - y1[l];
            acc0[l] += t0 * t0;
            acc1[l] += t1 * t1;
        }
    }
    let (mut tail0, mut tail1) = (0.0, 0.0);
    for i in full * LANES..a.len() {
        let t0 = a[i] - b0[i];
        let t1 = a[i] - b1[i];
        tail0 += t0 * t0;
        tail1 += t1 * t1;
    }
    (reduce(acc0) + tail0, reduce(acc1) + tail1)
}

const LANES: usize = 8;

#[inline(always)]
fn reduce(acc: [f64; LANES]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Full `n x n` matrix of squared Euclidean distances. Symmetric with an
/// exactly zero diagonal: each unordered pair is computed once and mirrored.
pub fn pairwise_sq_dists(cloud: &PointCloud) -> DMatrix<f64> {
    let n = cloud.len();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let a = cloud.row(j);
        for k in (j + 1)..n {
            let v = sq_dist(a, cloud.row(k));
            out[(j, k)] = v;
            out[(k, j)] = v;
        }
    }
    out
}

/// Population covariance (divide by `n`) of the mean-centred cloud.
pub fn covariance(cloud: &PointCloud) -> DMatrix<f64> {
    let d = cloud.dim();
    let mean = cloud.mean();
    // upper triangle, row-major: upper[a * d + b] for b >= a
    let mut upper = vec![0.0; d * d];
    let mut centred = vec![0.0; d];
    for row in cloud.rows() {
        for ((c, x), m) in centred.iter_mut().zip(row).zip(&mean) {
            *c = x - m;
        }
        for a in 0..d {
            let ca = centred[a];
            for (u, cb) in upper[a * d + a..(a + 1) * d].iter_mut().zip(&centred[a..]) {
                *u += ca * cb;
            }
        }
    }
    let n = cloud.len() as f64;
    let mut cov = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = upper[a * d + b] / n;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue (ties
/// keep the solver's original index order). Each eigenvector's sign is fixed
/// so that its largest-magnitude component is positive.
pub fn sorted_symmetric_eigen(matrix: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = matrix.nrows();
    let eig = SymmetricEigen::try_new(matrix, f64::EPSILON, 100_000)
        .ok_or(Error::EigenNotConverged)?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let flip = if pivot < 0.0 { -1.0 } else { 1.0 };
        for r in 0..dim {
            vectors[(r, dst)] = flip * col[r];
        }
    }
    Ok((values, vectors))
}

/// Centres the cloud and rotates it onto the eigenbasis of its covariance,
/// principal axis first. No dimension is dropped.
pub fn pca_reorient(cloud: &PointCloud) -> Result<PointCloud> {
    let d = cloud.dim();
    let (_, basis) = sorted_symmetric_eigen(covariance(cloud))?;
    // rows[i * d + axis] = component i of eigenvector `axis`
    let mut rows = vec![0.0; d * d];
    for i in 0..d {
        for axis in 0..d {
            rows[i * d + axis] = basis[(i, axis)];
        }
    }
    let mean = cloud.mean();
    let mut out = vec![0.0; cloud.len() * d];
    for (row, dst) in cloud.rows().zip(out.chunks_exact_mut(d)) {
        for (i, (x, m)) in row.iter().zip(&mean).enumerate() {
            let c = x - m;
            for (o, e) in dst.iter_mut().zip(&rows[i * d..(i + 1) * d]) {
                *o += c * e;
            }
        }
    }
    PointCloud::new(out, d)
}

/// Per-dimension variance obtained from pairwise squared coordinate gaps:
/// `V_i = 1 / (2 n^2) * sum_j sum_k (x_ji - x_ki)^2`. Each unordered pair is
/// visited once and counted twice.
pub fn variance_from_pairs(cloud: &PointCloud) -> VarianceVector {
    let n = cloud.len();
    let d = cloud.dim();
    let mut columns = vec![0.0; n * d];
    for (j, row) in cloud.rows().enumerate() {
        for (i, x) in row.iter().enumerate() {
            columns[i * n + j] = *x;
        }
    }
    let totals = gap_totals(&columns, n, d);
    // 2 * total ordered-pair sum / (2 n^2)
    let variances = totals.into_iter().map(|t| t / (n as f64 * n as f64)).collect();
    VarianceVector {
        variances,
        is_normalized: false,
    }
}

/// Dimensions whose pair sums run interleaved. Each dimension keeps its own
/// accumulators and summation order, so the grouping never changes a bit.
const GAP_GROUP: usize = 4;

/// Per-dimension `sum_{j<k} (x_j - x_k)^2` over a column-major `d x n` buffer.
fn gap_totals(columns: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut totals = vec![0.0; d];
    if n == 0 {
        return totals;
    }
    let wide = has_avx2();
    let mut groups = columns.chunks_exact(GAP_GROUP * n);
    for (g, group) in (&mut groups).enumerate() {
        let cols: [&[f64]; GAP_GROUP] = std::array::from_fn(|q| &group[q * n..(q + 1) * n]);
        let out: &mut [f64; GAP_GROUP] = (&mut totals[g * GAP_GROUP..(g + 1) * GAP_GROUP]).try_into().unwrap();
        #[cfg(target_arch = "x86_64")]
        if wide {
            // SAFETY: AVX2 support was detected at runtime.
            unsafe { avx2::gap_group(cols, out) };
            continue;
        }
        let _ = wide;
        gap_group(cols, out);
    }
    let done = d - d % GAP_GROUP;
    for (q, col) in groups.remainder().chunks_exact(n).enumerate() {
        let mut out = [0.0];
        gap_group([col], &mut out);
        totals[done + q] = out[0];
    }
    totals
}

fn gap_group<const B: usize>(cols: [&[f64]; B], totals: &mut [f64; B]) {
    let n = cols[0].len();
    for j in 0..n {
        let xj: [f64; B] = std::array::from_fn(|q| cols[q][j]);
        let mut acc = [[0.0f64; LANES]; B];
        let rest = n - j - 1;
        let full = rest / LANES;
        for c in 0..full {
            let at = j + 1 + c * LANES;
            for q in 0..B {
                let chunk: &[f64; LANES] = cols[q][at..at + LANES].try_into().unwrap();
                for l in 0..LANES {
                    let t = xj[q] - chunk[l];
                    acc[q][l] += t * t;
                }
            }
        }
        for q in 0..B {
            let mut tail = 0.0;
            for x in &cols[q][j + 1 + full * LANES..] {
                let t = xj[q] - x;
                tail += t * t;
            }
            totals[q] += reduce(acc[q]) + tail;
        }
    }
}

/// Whether the AVX2 kernels can run on this CPU. The result is cached by
/// the standard library after the first query.
#[inline]
pub(crate) fn has_avx2() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::arch::is_x86_feature_detected!("avx2")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// 256-bit versions of the hot loops. Register lane `l` of `lo`/`hi` holds
/// accumulator `l`/`l + 4` of the portable kernel, and only separate
/// subtract, multiply and add instructions are used, so results are
/// bit-identical to the portable code on every input.
#[cfg(target_arch = "x86_64")]
pub(crate) mod avx2 {
    use std::arch::x86_64::*;

    use super::{reduce, LANES};

    #[inline(always)]
    fn spill(lo: __m256d, hi: __m256d) -> [f64; LANES] {
        let mut acc = [0.0; LANES];
        // SAFETY: `acc` holds exactly two 4-lane vectors.
        unsafe {
            _mm256_storeu_pd(acc.as_mut_ptr(), lo);
            _mm256_storeu_pd(acc.as_mut_ptr().add(4), hi);
        }
        acc
    }

    #[target_feature(enable = "avx2")]
    pub(crate) fn gap_group<const B: usize>(cols: [&[f64]; B], totals: &mut [f64; B]) {
        let n = cols[0].len();
        assert!(cols.iter().all(|c| c.len() == n));
        for j in 0..n {
            let full = (n - j - 1) / LANES;
            let xj: [__m256d; B] = std::array::from_fn(|q| _mm256_set1_pd(cols[q][j]));
            let mut lo = [_mm256_setzero_pd(); B];
            let mut hi = [_mm256_setzero_pd(); B];
            for c in 0..full {
                let at = j + 1 + c * LANES;
                for q in 0..B {
                    // SAFETY: at + LANES <= n, the length of every column.
                    let (a, b) = unsafe {
                        let p = cols[q].as_ptr().add(at);
                        (_mm256_loadu_pd(p), _mm256_loadu_pd(p.add(4)))
                    };
                    let ta = _mm256_sub_pd(xj[q], a);
                    let tb = _mm256_sub_pd(xj[q], b);
                    lo[q] = _mm256_add_pd(lo[q], _mm256_mul_pd(ta, ta));
                    hi[q] = _mm256_add_pd(hi[q], _mm256_mul_pd(tb, tb));
                }
            }
            for q in 0..B {
                let x = cols[q][j];
                let mut tail = 0.0;
                for y in &cols[q][j + 1 + full * LANES..] {
                    let t = x - y;
                    tail += t * t;
                }
                totals[q] += reduce(spill(lo[q], hi[q])) + tail;
            }
        }
    }

    /// Same contract as [`super::sq_dist_two`].
    #[target_feature(enable = "avx2")]
    #[inline]
    pub(crate) fn sq_dist_two(a: &[f64], b0: &[f64], b1: &[f64]) -> (f64, f64) {
        let d = a.len();
        assert!(b0.len() == d && b1.len() == d);
        let full = d / LANES;
        let (mut lo0, mut hi0) = (_mm256_setzero_pd(), _mm256_setzero_pd());
        let (mut lo1, mut hi1) = (_mm256_setzero_pd(), _mm256_setzero_pd());
        for c in 0..full {
            // SAFETY: (c + 1) * LANES <= d for all three slices.
            unsafe {
                let (pa, p0, p1) = (a.as_ptr().add(c * LANES), b0.as_ptr().add(c * LANES), b1.as_ptr().add(c * LANES));
                let (xa, xb) = (_mm256_loadu_pd(pa), _mm256_loadu_pd(pa.add(4)));
                let t = _mm256_sub_pd(xa, _mm256_loadu_pd(p0));
                lo0 = _mm256_add_pd(lo0, _mm256_mul_pd(t, t));
                let t = _mm256_sub_pd(xb, _mm256_loadu_pd(p0.add(4)));
                hi0 = _mm256_add_pd(hi0, _mm256_mul_pd(t, t));
                let t = _mm256_sub_pd(xa, _mm256_loadu_pd(p1));
                lo1 = _mm256_add_pd(lo1, _mm256_mul_pd(t, t));
                let t = _mm256_sub_pd(xb, _mm256_loadu_pd(p1.add(4)));
                hi1 = _mm256_add_pd(hi1, _mm256_mul_pd(t, t));
            }
        }
        let (mut tail0, mut tail1) = (0.0, 0.0);
        for i in full * LANES..d {
            let t0 = a[i] - b0[i];
            let t1 = a[i] - b1[i];
            tail0 += t0 * t0;
            tail1 += t1 * t1;
        }
        (reduce(spill(lo0, hi0)) + tail0, reduce(spill(lo1, hi1)) + tail1)
    }
}
