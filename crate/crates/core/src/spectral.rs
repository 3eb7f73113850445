//! Scatter matrices and leading eigenvectors of symmetric matrices.
//!
//! Leading eigenpairs are computed by Householder tridiagonalization, implicit
//! QL for the eigenvalues, inverse iteration on the tridiagonal matrix for the
//! requested eigenvectors, and back-transformation through the stored
//! reflectors. Only the requested eigenvectors are ever formed.
//!
//! Sign convention: every returned eigenvector has its largest-magnitude entry
//! positive, ties going to the lowest row index. For a degenerate eigenspace the
//! returned basis is the one inverse iteration reaches from fixed pseudo-random
//! start vectors, so repeated calls agree exactly.

use crate::error::{Error, Result};
use crate::series::TensorSeries;
use crate::tensor_core::{axpy, dot, split_extents, Matrix};

const QL_MAX_ITER: usize = 60;

/// Symmetric `n x n` second-moment matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterMatrix {
    n: usize,
    data: Vec<f64>,
}

/// Leading eigenvectors (orthonormal columns) with their eigenvalues, descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigBasis {
    vectors: Matrix,
    values: Vec<f64>,
}

impl ScatterMatrix {
    /// Wraps a square matrix, checking symmetry to 1e-12 relative to its largest entry.
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::ShapeMismatch(format!(
                "scatter matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let scale = m.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for j in 0..n {
            for i in 0..j {
                if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 * scale {
                    return Err(Error::ShapeMismatch(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { n, data: m.into_data() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + self.n * j]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::new(self.n, self.n, self.data.clone()).expect("square buffer")
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Upper triangle accumulated in `data`; mirror it and divide by `norm`.
    fn finish_upper(n: usize, mut data: Vec<f64>, norm: f64) -> Self {
        for j in 0..n {
            for i in 0..=j {
                let v = data[i + n * j] / norm;
                data[i + n * j] = v;
                data[j + n * i] = v;
            }
        }
        Self { n, data }
    }
}

impl EigBasis {
    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.rows()
    }

    /// Keeps the leading `r` pairs.
    pub fn truncated(&self, r: usize) -> Result<EigBasis> {
        if r == 0 || r > self.rank() {
            return Err(Error::RankOutOfRange { rank: r, dim: self.rank() });
        }
        let n = self.dim();
        Ok(EigBasis {
            vectors: Matrix::new(n, r, self.vectors.data()[..n * r].to_vec())?,
            values: self.values[..r].to_vec(),
        })
    }

    /// The orthogonal projector `V V'`.
    pub fn projector(&self) -> Matrix {
        self.vectors.outer_gram()
    }
}

/// `(1/T) Σ_t M_t M_t'` over a list of equally shaped matrices.
pub fn scatter(series: &[Matrix], normalize: usize) -> Result<ScatterMatrix> {
    let first = series
        .first()
        .ok_or_else(|| Error::Empty("scatter of an empty series".into()))?;
    if normalize == 0 {
        return Err(Error::Empty("scatter normalized by T = 0".into()));
    }
    let (n, p) = (first.rows(), first.cols());
    let mut acc = vec![0.0; n * n];
    for (t, m) in series.iter().enumerate() {
        if m.rows() != n || m.cols() != p {
            return Err(Error::ShapeMismatch(format!(
                "matrix {t} is {}x{}, expected {n}x{p}",
                m.rows(),
                m.cols()
            )));
        }
        for l in 0..p {
            rank_one_upper(&mut acc, n, m.col(l));
        }
    }
    Ok(ScatterMatrix::finish_upper(n, acc, normalize as f64))
}

#[inline]
fn rank_one_upper(acc: &mut [f64], n: usize, s: &[f64]) {
    for (b, &sb) in s.iter().enumerate() {
        if sb != 0.0 {
            axpy(&mut acc[n * b..n * b + b + 1], &s[..=b], sb);
        }
    }
}

/// `(1/T) Σ_t X_{t,(k)} X_{t,(k)}'` for the mode-`k` unfoldings of a series,
/// computed straight from the frame buffers.
pub fn mode_scatter(series: &TensorSeries, k: usize) -> Result<ScatterMatrix> {
    let dims = series.dims();
    if k >= dims.len() {
        return Err(Error::ModeOutOfRange { mode: k, order: dims.len() });
    }
    let dk = dims[k];
    let (left, right) = split_extents(dims, k);
    let mut acc = vec![0.0; dk * dk];
    for frame in series.frames() {
        for r in 0..right {
            let slab = &frame[left * dk * r..left * dk * (r + 1)];
            if left == 1 {
                rank_one_upper(&mut acc, dk, slab);
            } else {
                for b in 0..dk {
                    let cb = &slab[left * b..left * (b + 1)];
                    for a in 0..=b {
                        acc[a + dk * b] += dot(&slab[left * a..left * (a + 1)], cb);
                    }
                }
            }
        }
    }
    Ok(ScatterMatrix::finish_upper(dk, acc, series.len() as f64))
}

/// Leading `r` eigenpairs of a symmetric matrix.
///
/// The residual `‖S V − V Λ‖_F` stays within `1e-8 ‖S‖_F`; failure to reach it
/// is reported as [`Error::NoConvergence`].
pub fn top_eigvecs(s: &ScatterMatrix, r: usize) -> Result<EigBasis> {
    let n = s.dim();
    if r == 0 || r > n {
        return Err(Error::RankOutOfRange { rank: r, dim: n });
    }
    let tri = Tridiagonal::reduce(s);
    let values = tri.leading_eigenvalues(r)?;
    let tvecs = tri.eigenvectors(&values)?;
    let mut vectors = Matrix::zeros(n, r);
    for (j, y) in tvecs.into_iter().enumerate() {
        let x = tri.back_transform(y);
        vectors.col_mut(j).copy_from_slice(&x);
    }
    fix_signs(&mut vectors);
    Ok(EigBasis { vectors, values })
}

/// Leading `r` eigenvectors of `(1/T) X X'` where the columns of `X` are the
/// vectorised frames of `series`.
///
/// When frames are longer than the series, the `T x T` Gram matrix is
/// decomposed instead and its eigenvectors mapped back through `X`.
pub fn top_eigvecs_of_frames(series: &TensorSeries, r: usize) -> Result<EigBasis> {
    let n = series.frame_len();
    let t_len = series.len();
    if r == 0 || r > n {
        return Err(Error::RankOutOfRange { rank: r, dim: n });
    }
    if n <= t_len || r > t_len {
        let flat = series.clone().with_dims(vec![n])?;
        return top_eigvecs(&mode_scatter(&flat, 0)?, r);
    }
    let mut gram = vec![0.0; t_len * t_len];
    for b in 0..t_len {
        let xb = series.frame(b);
        for a in 0..=b {
            gram[a + t_len * b] = dot(series.frame(a), xb);
        }
    }
    let gram = ScatterMatrix::finish_upper(t_len, gram, t_len as f64);
    let small = top_eigvecs(&gram, r)?;
    let top = small.values.first().copied().unwrap_or(0.0).max(0.0);
    let mut vectors = Matrix::zeros(n, r);
    let mut filled = 0;
    for j in 0..r {
        let lambda = small.values[j];
        if lambda.is_nan() || lambda <= 1e-12 * top {
            break;
        }
        let col = vectors.col_mut(j);
        for (t, &u) in small.vectors.col(j).iter().enumerate() {
            axpy(col, series.frame(t), u);
        }
        let scale = 1.0 / (t_len as f64 * lambda).sqrt();
        col.iter_mut().for_each(|v| *v *= scale);
        filled += 1;
    }
    let mut values = small.values.clone();
    complete_basis(&mut vectors, filled);
    for v in values.iter_mut().skip(filled) {
        *v = 0.0;
    }
    fix_signs(&mut vectors);
    Ok(EigBasis { vectors, values })
}

/// Fills columns `filled..` with unit vectors orthogonal to the earlier columns,
/// drawn from the standard basis in order.
fn complete_basis(v: &mut Matrix, filled: usize) {
    let n = v.rows();
    let mut next = 0;
    for j in filled..v.cols() {
        while next < n {
            let mut e = vec![0.0; n];
            e[next] = 1.0;
            next += 1;
            for _ in 0..2 {
                for q in 0..j {
                    let c = dot(v.col(q), &e);
                    axpy(&mut e, v.col(q), -c);
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 1e-8 {
                e.iter_mut().for_each(|x| *x /= norm);
                v.col_mut(j).copy_from_slice(&e);
                break;
            }
        }
    }
}

/// Flips each column so its largest-magnitude entry (lowest index on ties) is positive.
fn fix_signs(v: &mut Matrix) {
    for j in 0..v.cols() {
        let col = v.col_mut(j);
        let mut best = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Householder reduction `A = Q T Q'` with `Q = H_0 H_1 ⋯ H_{n-3}`.
struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
    /// Reflector `k` acts on coordinates `k+1..n`; `vs[k][0] == 1`.
    vs: Vec<Vec<f64>>,
    betas: Vec<f64>,
}

impl Tridiagonal {
    fn reduce(s: &ScatterMatrix) -> Self {
        let n = s.dim();
        let mut a = s.data().to_vec();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        let mut vs = Vec::with_capacity(n.saturating_sub(2));
        let mut betas = Vec::with_capacity(n.saturating_sub(2));
        for k in 0..n.saturating_sub(2) {
            diag[k] = a[k + n * k];
            let m = n - k - 1;
            let x: Vec<f64> = a[(k + 1) + n * k..n * (k + 1)].to_vec();
            let (v, beta, alpha) = householder(&x);
            off[k] = alpha;
            if beta != 0.0 {
                // p = beta * A22 v
                let mut p = vec![0.0; m];
                for (j, &vj) in v.iter().enumerate() {
                    let col = (k + 1 + j) * n + k + 1;
                    axpy(&mut p, &a[col..col + m], vj);
                }
                p.iter_mut().for_each(|x| *x *= beta);
                let c = 0.5 * beta * dot(&p, &v);
                let w: Vec<f64> = p.iter().zip(&v).map(|(pi, vi)| pi - c * vi).collect();
                for j in 0..m {
                    let col = (k + 1 + j) * n + k + 1;
                    let dst = &mut a[col..col + m];
                    axpy(dst, &v, -w[j]);
                    axpy(dst, &w, -v[j]);
                }
            }
            vs.push(v);
            betas.push(beta);
        }
        if n >= 2 {
            diag[n - 2] = a[(n - 2) + n * (n - 2)];
            off[n - 2] = a[(n - 1) + n * (n - 2)];
        }
        diag[n - 1] = a[(n - 1) + n * (n - 1)];
        Self { diag, off, vs, betas }
    }

    fn norm(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.off[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// All eigenvalues by implicit QL with Wilkinson shifts, returned descending
    /// and truncated to `r`.
    fn leading_eigenvalues(&self, r: usize) -> Result<Vec<f64>> {
        let n = self.diag.len();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::NoConvergence(QL_MAX_ITER));
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut rr = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + rr.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut i = m;
                let mut underflow = false;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    rr = f.hypot(g);
                    e[i + 1] = rr;
                    if rr == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / rr;
                    c = g / rr;
                    g = d[i + 1] - p;
                    rr = (d[i] - g) * s + 2.0 * c * b;
                    p = s * rr;
                    d[i + 1] = g + p;
                    g = c * rr - b;
                }
                if underflow {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        d.sort_by(|a, b| b.total_cmp(a));
        d.truncate(r);
        Ok(d)
    }

    /// Eigenvectors of the tridiagonal matrix for the given (descending) eigenvalues.
    fn eigenvectors(&self, values: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.diag.len();
        let tnorm = self.norm();
        if n == 1 || tnorm == 0.0 {
            let mut ys: Vec<Vec<f64>> = (0..values.len()).map(|j| start_vector(n, j)).collect();
            orthonormalize_all(&mut ys);
            return Ok(ys);
        }
        let eps = f64::EPSILON;
        let cluster_tol = 1e-3 * tnorm;
        let pert = 10.0 * eps * tnorm;
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(values.len());
        let mut cluster_start = 0;
        let mut prev_shift = f64::INFINITY;
        for (j, &lambda) in values.iter().enumerate() {
            if j > 0 && (values[j - 1] - lambda) > cluster_tol {
                cluster_start = j;
            }
            let mut shift = lambda;
            if j > cluster_start && prev_shift - shift < pert {
                shift = prev_shift - pert;
            }
            prev_shift = shift;
            let lu = TriLu::factor(&self.diag, &self.off, shift, eps * tnorm);
            let mut y = start_vector(n, j);
            let mut converged = false;
            for it in 0..8 {
                lu.solve(&mut y);
                for q in &out[cluster_start..] {
                    let c = dot(q, &y);
                    axpy(&mut y, q, -c);
                }
                let norm = dot(&y, &y).sqrt();
                if !norm.is_finite() || norm == 0.0 {
                    y = start_vector(n, j + it + 1);
                    continue;
                }
                y.iter_mut().for_each(|v| *v /= norm);
                if it >= 2 && self.residual(&y, lambda) <= 1e-10 * tnorm {
                    converged = true;
                    break;
                }
            }
            if !converged && self.residual(&y, lambda) > 1e-9 * tnorm {
                return Err(Error::NoConvergence(8));
            }
            out.push(y);
        }
        Ok(out)
    }

    fn residual(&self, y: &[f64], lambda: f64) -> f64 {
        let n = y.len();
        let mut s = 0.0;
        for i in 0..n {
            let mut v = (self.diag[i] - lambda) * y[i];
            if i > 0 {
                v += self.off[i - 1] * y[i - 1];
            }
            if i + 1 < n {
                v += self.off[i] * y[i + 1];
            }
            s += v * v;
        }
        s.sqrt()
    }

    fn back_transform(&self, mut y: Vec<f64>) -> Vec<f64> {
        for k in (0..self.vs.len()).rev() {
            let beta = self.betas[k];
            if beta == 0.0 {
                continue;
            }
            let v = &self.vs[k];
            let tail = &mut y[k + 1..];
            let c = beta * dot(v, tail);
            axpy(tail, v, -c);
        }
        y
    }
}

fn orthonormalize_all(ys: &mut [Vec<f64>]) {
    for j in 0..ys.len() {
        let (done, rest) = ys.split_at_mut(j);
        let y = &mut rest[0];
        for _ in 0..2 {
            for q in done.iter() {
                let c = dot(q, y);
                axpy(y, q, -c);
            }
        }
        let norm = dot(y, y).sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Deterministic pseudo-random start vector with entries in (-1, 1).
fn start_vector(n: usize, seed: usize) -> Vec<f64> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ (seed as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

/// Householder vector `v` (with `v[0] = 1`) and `beta` such that
/// `(I - beta v v') x = alpha e_1`.
fn householder(x: &[f64]) -> (Vec<f64>, f64, f64) {
    let sigma: f64 = x[1..].iter().map(|v| v * v).sum();
    let mut v = x.to_vec();
    v[0] = 1.0;
    if sigma == 0.0 {
        return (v, 0.0, x[0]);
    }
    let mu = (x[0] * x[0] + sigma).sqrt();
    let v0 = if x[0] <= 0.0 { x[0] - mu } else { -sigma / (x[0] + mu) };
    let beta = 2.0 * v0 * v0 / (sigma + v0 * v0);
    v[1..].iter_mut().for_each(|vi| *vi /= v0);
    // (I - beta v v') x = mu e_1 with this choice of v0
    (v, beta, mu)
}

/// LU factorization with partial pivoting of `T - shift I` for tridiagonal `T`.
struct TriLu {
    dd: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    dl: Vec<f64>,
    swapped: Vec<bool>,
}

impl TriLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64, tiny: f64) -> Self {
        let n = diag.len();
        let mut dd: Vec<f64> = diag.iter().map(|d| d - shift).collect();
        let mut du = off.to_vec();
        let mut dl = off.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if dd[i].abs() >= dl[i].abs() {
                let fact = if dd[i] != 0.0 { dl[i] / dd[i] } else { 0.0 };
                dl[i] = fact;
                dd[i + 1] -= fact * du[i];
            } else {
                let fact = dd[i] / dl[i];
                dd[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = dd[i + 1];
                dd[i + 1] = temp - fact * dd[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        let tiny = if tiny > 0.0 { tiny } else { f64::MIN_POSITIVE };
        for p in dd.iter_mut() {
            if p.abs() < tiny {
                *p = if *p < 0.0 { -tiny } else { tiny };
            }
        }
        Self { dd, du, du2, dl, swapped }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.dl[i] * x[i];
        }
        x[n - 1] /= self.dd[n - 1];
        if n >= 2 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.dd[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.dd[i];
        }
    }
}
