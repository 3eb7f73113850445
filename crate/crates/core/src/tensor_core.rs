//! Dense tensors, matrices and the multilinear algebra used throughout the crate.
//!
//! Storage is first-index-fastest: element `(i_1, ..., i_K)` of a tensor with
//! extents `(d_1, ..., d_K)` lives at `i_1 + d_1 * (i_2 + d_2 * (i_3 + ...))`.
//! Under this linearization the vectorisation of a tensor is its buffer, and an
//! order-2 tensor shares its buffer with the column-major [`Matrix`] view.
//!
//! Mode indices in this API are zero-based. A [`ModeSet`] over an order-`K`
//! tensor holds strictly ascending indices in `0..K`.

use crate::error::{Error, Result};

/// Default cap on the number of entries of an explicitly formed Kronecker product.
pub const KRON_CAP: usize = 10_000_000;

/// Dense real tensor with first-index-fastest storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

/// Dense column-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Strictly ascending set of zero-based mode indices of an order-`K` tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModeSet {
    indices: Vec<usize>,
    order: usize,
}

pub(crate) fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::InvalidDims("tensor order must be at least 1".into()));
    }
    if let Some(pos) = dims.iter().position(|&d| d == 0) {
        return Err(Error::InvalidDims(format!("extent of mode {pos} is zero")));
    }
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| {
        Error::InvalidDims(format!("extents {dims:?} overflow the address space"))
    })
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n = check_dims(&dims)?;
        if data.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "buffer of length {} does not match extents {:?} (expected {n})",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let n = check_dims(&dims)?;
        Ok(Self { dims, data: vec![0.0; n] })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let n = check_dims(&dims)?;
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            advance(&mut idx, &dims);
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter()
            .zip(&self.dims)
            .rev()
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Tensor {
        Tensor { dims: self.dims.clone(), data: self.data.iter().map(|v| c * v).collect() }
    }

    /// Returns `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Tensor, b: f64) -> Result<Tensor> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!(
                "cannot combine tensors of extents {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Ok(Tensor { dims: self.dims.clone(), data })
    }

    /// Same buffer, new extents with the same total size.
    pub fn with_dims(self, dims: Vec<usize>) -> Result<Tensor> {
        Tensor::new(dims, self.data)
    }

    pub fn as_matrix(&self) -> Result<Matrix> {
        match self.dims.as_slice() {
            [r, c] => Ok(Matrix { rows: *r, cols: *c, data: self.data.clone() }),
            [r] => Ok(Matrix { rows: *r, cols: 1, data: self.data.clone() }),
            _ => Err(Error::ShapeMismatch(format!(
                "order-{} tensor has no matrix view",
                self.order()
            ))),
        }
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let n = check_dims(&[rows, cols])?;
        if data.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "buffer of length {} does not match a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i + n * i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row slices; convenient in tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        let mut m = Self::new(r, c, vec![0.0; r * c])?;
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + self.rows * j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + self.rows * j] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[self.rows * j..self.rows * (j + 1)]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[self.rows * j..self.rows * (j + 1)]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let dst = &mut out.data[self.rows * j..self.rows * (j + 1)];
            for (l, &b) in rhs.col(j).iter().enumerate() {
                if b != 0.0 {
                    axpy(dst, self.col(l), b);
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        for (l, &b) in x.iter().enumerate() {
            axpy(&mut out, self.col(l), b);
        }
        Ok(out)
    }

    /// `self * self'`, the projector when the columns are orthonormal.
    pub fn outer_gram(&self) -> Matrix {
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for l in 0..self.cols {
            let c = self.col(l);
            for j in 0..n {
                let cj = c[j];
                if cj != 0.0 {
                    axpy(&mut out.data[n * j..n * (j + 1)], c, cj);
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor { dims: vec![self.rows, self.cols], data: self.data.clone() }
    }
}

impl ModeSet {
    pub fn new(indices: Vec<usize>, order: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidModeSet("mode set is empty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModeSet(format!(
                "modes {indices:?} are not strictly ascending"
            )));
        }
        if let Some(&m) = indices.last().filter(|&&m| m >= order) {
            return Err(Error::InvalidModeSet(format!(
                "mode {m} out of range for order-{order} tensor"
            )));
        }
        Ok(Self { indices, order })
    }

    /// Parses one-based mode labels (as used on the command line and in reports).
    pub fn from_one_based(labels: &[usize], order: usize) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::InvalidModeSet("mode labels are one-based".into()));
        }
        Self::new(labels.iter().map(|&l| l - 1).collect(), order)
    }

    /// All modes `0..order`.
    pub fn full(order: usize) -> Result<Self> {
        Self::new((0..order).collect(), order)
    }

    /// Trailing modes `first..order`.
    pub fn suffix(first: usize, order: usize) -> Result<Self> {
        Self::new((first..order).collect(), order)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }

    /// Modes not in the set, ascending.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.order).filter(|k| !self.contains(*k)).collect()
    }

    pub fn is_suffix(&self) -> bool {
        self.indices.iter().enumerate().all(|(i, &m)| m == self.order - self.indices.len() + i)
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|m| m + 1).collect()
    }

    fn check_order(&self, order: usize) -> Result<()> {
        if self.order != order {
            return Err(Error::InvalidModeSet(format!(
                "mode set built for order {} applied to order-{order} tensor",
                self.order
            )));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn axpy(dst: &mut [f64], src: &[f64], a: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorize without reassociating a single sum
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Odometer increment, first index fastest.
fn advance(idx: &mut [usize], dims: &[usize]) {
    for (i, &d) in idx.iter_mut().zip(dims) {
        *i += 1;
        if *i < d {
            return;
        }
        *i = 0;
    }
}

fn check_mode(k: usize, order: usize) -> Result<()> {
    if k >= order {
        return Err(Error::ModeOutOfRange { mode: k, order });
    }
    Ok(())
}

/// Products of the extents before and after mode `k`.
#[inline]
pub(crate) fn split_extents(dims: &[usize], k: usize) -> (usize, usize) {
    (dims[..k].iter().product(), dims[k + 1..].iter().product())
}

/// Mode-`k` unfolding: a `d_k x d_{-k}` matrix whose columns are the mode-`k`
/// fibres, ordered first-index-fastest over the remaining modes.
pub fn unfold(x: &Tensor, k: usize) -> Result<Matrix> {
    check_mode(k, x.order())?;
    let dk = x.dims[k];
    let (left, right) = split_extents(&x.dims, k);
    let mut out = vec![0.0; x.len()];
    for r in 0..right {
        for i in 0..dk {
            let src = &x.data[left * (i + dk * r)..left * (i + dk * r + 1)];
            for (l, &v) in src.iter().enumerate() {
                out[i + dk * (l + left * r)] = v;
            }
        }
    }
    Matrix::new(dk, left * right, out)
}

/// Inverse of [`unfold`]: refolds a `d_k x d_{-k}` matrix into a tensor of extents `dims`.
pub fn fold(m: &Matrix, dims: &[usize], k: usize) -> Result<Tensor> {
    let n = check_dims(dims)?;
    check_mode(k, dims.len())?;
    let dk = dims[k];
    if m.rows != dk || m.rows * m.cols != n {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix cannot be folded along mode {k} into extents {dims:?}",
            m.rows, m.cols
        )));
    }
    let (left, right) = split_extents(dims, k);
    let mut out = vec![0.0; n];
    for r in 0..right {
        for i in 0..dk {
            let dst = &mut out[left * (i + dk * r)..left * (i + dk * r + 1)];
            for (l, v) in dst.iter_mut().enumerate() {
                *v = m.data[i + dk * (l + left * r)];
            }
        }
    }
    Tensor::new(dims.to_vec(), out)
}

/// Vectorisation: the canonical buffer.
pub fn vectorize(x: &Tensor) -> Vec<f64> {
    x.data.clone()
}

/// Writes `x ×_k a` into `dst`, where `x` is the buffer of a tensor with extents `dims`.
pub(crate) fn mode_product_into(src: &[f64], dims: &[usize], a: &Matrix, k: usize, dst: &mut [f64]) {
    let dk = dims[k];
    let p = a.rows;
    let (left, right) = split_extents(dims, k);
    debug_assert_eq!(a.cols, dk);
    debug_assert_eq!(dst.len(), left * p * right);
    dst.iter_mut().for_each(|v| *v = 0.0);
    if left == 1 {
        for r in 0..right {
            let s = &src[dk * r..dk * (r + 1)];
            let o = &mut dst[p * r..p * (r + 1)];
            for (i, &v) in s.iter().enumerate() {
                if v != 0.0 {
                    axpy(o, a.col(i), v);
                }
            }
        }
    } else {
        for r in 0..right {
            for q in 0..p {
                let o = &mut dst[left * (q + p * r)..left * (q + p * r + 1)];
                for i in 0..dk {
                    let c = a.data[q + p * i];
                    if c != 0.0 {
                        axpy(o, &src[left * (i + dk * r)..left * (i + dk * r + 1)], c);
                    }
                }
            }
        }
    }
}

/// Mode-`k` product `x ×_k a`, defined by `unfold(x ×_k a, k) = a · unfold(x, k)`.
pub fn mode_product(x: &Tensor, a: &Matrix, k: usize) -> Result<Tensor> {
    check_mode(k, x.order())?;
    if a.cols != x.dims[k] {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix cannot act on mode {k} of extent {}",
            a.rows, a.cols, x.dims[k]
        )));
    }
    let mut dims = x.dims.clone();
    dims[k] = a.rows;
    let mut out = vec![0.0; check_dims(&dims)?];
    mode_product_into(&x.data, &x.dims, a, k, &mut out);
    Tensor::new(dims, out)
}

/// Successive mode products `x ×_{k_1} a_1 ×_{k_2} a_2 ...`.
pub fn multi_mode_product(x: &Tensor, factors: &[(usize, &Matrix)]) -> Result<Tensor> {
    factors.iter().try_fold(x.clone(), |acc, (k, a)| mode_product(&acc, a, *k))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut data = vec![0.0; rows * cols];
    for ja in 0..a.cols {
        for jb in 0..b.cols {
            let col = ja * b.cols + jb;
            let dst = &mut data[rows * col..rows * (col + 1)];
            for ia in 0..a.rows {
                let c = a.get(ia, ja);
                let blk = &mut dst[ia * b.rows..(ia + 1) * b.rows];
                for (d, s) in blk.iter_mut().zip(b.col(jb)) {
                    *d = c * s;
                }
            }
        }
    }
    Matrix { rows, cols, data }
}

/// `mats[0] ⊗ mats[1] ⊗ ...`, refusing to materialize more than `cap` entries.
pub fn kron_chain(mats: &[&Matrix], cap: usize) -> Result<Matrix> {
    let (first, rest) = mats
        .split_first()
        .ok_or_else(|| Error::Empty("kronecker chain needs at least one factor".into()))?;
    let size = mats.iter().try_fold(1usize, |acc, m| {
        acc.checked_mul(m.rows)?.checked_mul(m.cols)
    });
    match size {
        Some(s) if s <= cap => {}
        Some(s) => return Err(Error::KronTooLarge(s)),
        None => return Err(Error::KronTooLarge(usize::MAX)),
    }
    Ok(rest.iter().fold((*first).clone(), |acc, m| kron(&acc, m)))
}

/// Permutes modes: mode `i` of the result is mode `perm[i]` of `x`.
pub fn permute_modes(x: &Tensor, perm: &[usize]) -> Result<Tensor> {
    let order = x.order();
    let mut seen = vec![false; order];
    if perm.len() != order || perm.iter().any(|&p| p >= order || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidModeSet(format!(
            "{perm:?} is not a permutation of 0..{order}"
        )));
    }
    let mut strides = vec![1usize; order];
    for k in 1..order {
        strides[k] = strides[k - 1] * x.dims[k - 1];
    }
    let out_dims: Vec<usize> = perm.iter().map(|&p| x.dims[p]).collect();
    let out_strides: Vec<usize> = perm.iter().map(|&p| strides[p]).collect();
    Ok(Tensor { data: gather(&x.data, &out_dims, &out_strides), dims: out_dims })
}

/// Reads `src` in the order of an odometer over `dims` whose axis `i` advances
/// the source offset by `strides[i]`.
fn gather(src: &[f64], dims: &[usize], strides: &[usize]) -> Vec<f64> {
    let n: usize = dims.iter().product();
    let mut out = Vec::with_capacity(n);
    let d0 = dims[0];
    let s0 = strides[0];
    let outer = &dims[1..];
    let mut idx = vec![0usize; outer.len()];
    let mut base = 0usize;
    for _ in 0..n / d0 {
        out.extend((0..d0).map(|i| src[base + i * s0]));
        for (a, i) in idx.iter_mut().enumerate() {
            *i += 1;
            base += strides[a + 1];
            if *i < outer[a] {
                break;
            }
            base -= strides[a + 1] * outer[a];
            *i = 0;
        }
    }
    out
}

fn reshape_perm(order: usize, a: &ModeSet) -> Vec<usize> {
    let mut perm = a.complement();
    perm.extend_from_slice(a.indices());
    debug_assert_eq!(perm.len(), order);
    perm
}

/// Extents of `reshape(x, a)` for `x` with extents `dims`.
pub fn reshape_dims(dims: &[usize], a: &ModeSet) -> Result<Vec<usize>> {
    check_dims(dims)?;
    a.check_order(dims.len())?;
    let mut out: Vec<usize> = a.complement().iter().map(|&k| dims[k]).collect();
    out.push(a.indices().iter().map(|&k| dims[k]).product());
    Ok(out)
}

/// Merges the modes in `a` into a single trailing mode.
///
/// The result has order `K - |a| + 1`; surviving modes keep their relative
/// order and the merged mode is linearized with the lowest merged mode
/// fastest. Computed as one gather through a mode permutation.
pub fn reshape(x: &Tensor, a: &ModeSet) -> Result<Tensor> {
    let out_dims = reshape_dims(&x.dims, a)?;
    let perm = reshape_perm(x.order(), a);
    let permuted = permute_modes(x, &perm)?;
    Tensor::new(out_dims, permuted.data)
}

/// Recovers the original tensor from `reshape(x, a)` given the original extents.
pub fn unreshape(y: &Tensor, orig_dims: &[usize], a: &ModeSet) -> Result<Tensor> {
    let expected = reshape_dims(orig_dims, a)?;
    if y.dims != expected {
        return Err(Error::ShapeMismatch(format!(
            "extents {:?} are not those of a reshape of {orig_dims:?} along {:?} (expected {expected:?})",
            y.dims,
            a.indices()
        )));
    }
    let perm = reshape_perm(orig_dims.len(), a);
    let permuted_dims: Vec<usize> = perm.iter().map(|&p| orig_dims[p]).collect();
    let mut inverse = vec![0usize; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inverse[p] = i;
    }
    let permuted = Tensor { dims: permuted_dims, data: y.data.clone() };
    permute_modes(&permuted, &inverse)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(dims: Vec<usize>) -> Tensor {
        let n: usize = dims.iter().product();
        Tensor::new(dims, (1..=n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn unfold_order_two_is_identity_and_transpose() {
        let x = seq(vec![2, 3]);
        let m = x.as_matrix().unwrap();
        assert_eq!(unfold(&x, 0).unwrap(), m);
        assert_eq!(unfold(&x, 1).unwrap(), m.transpose());
    }

    #[test]
    fn unfold_rejects_bad_mode() {
        let x = seq(vec![2, 3]);
        assert_eq!(unfold(&x, 2), Err(Error::ModeOutOfRange { mode: 2, order: 2 }));
    }

    #[test]
    fn fold_rejects_shape_mismatch() {
        let m = Matrix::zeros(3, 2);
        assert!(matches!(fold(&m, &[2, 3], 0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn fold_order_two() {
        let m = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(fold(&m, &[2, 3], 0).unwrap(), m.to_tensor());
    }

    #[test]
    fn vectorize_column_stacks() {
        let x = Matrix::from_rows(&[&[1.0, 3.0], &[2.0, 4.0]]).unwrap().to_tensor();
        assert_eq!(vectorize(&x), vec![1.0, 2.0, 3.0, 4.0]);
        let v = Tensor::new(vec![3], vec![5.0, 6.0, 7.0]).unwrap();
        assert_eq!(vectorize(&v), vec![5.0, 6.0, 7.0]);
    }

    #[test]
    fn mode_product_identity_and_column_sums() {
        let x = seq(vec![2, 3, 2]);
        for k in 0..3 {
            let id = Matrix::identity(x.dims()[k]);
            assert_eq!(mode_product(&x, &id, k).unwrap(), x);
        }
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap().to_tensor();
        let ones = Matrix::from_rows(&[&[1.0, 1.0]]).unwrap();
        let s = mode_product(&m, &ones, 0).unwrap();
        assert_eq!(s.dims(), &[1, 2]);
        assert_eq!(s.data(), &[4.0, 6.0]);
    }

    #[test]
    fn mode_product_rejects_inner_mismatch() {
        let x = seq(vec![2, 3]);
        assert!(mode_product(&x, &Matrix::zeros(2, 2), 1).is_err());
    }

    #[test]
    fn kron_basics() {
        assert_eq!(kron(&Matrix::identity(2), &Matrix::identity(3)), Matrix::identity(6));
        let b = Matrix::from_rows(&[&[1.0, -2.0], &[0.5, 3.0]]).unwrap();
        let two = Matrix::from_rows(&[&[2.0]]).unwrap();
        let k = kron(&two, &b);
        assert_eq!(k.data(), b.data().iter().map(|v| 2.0 * v).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn kron_chain_respects_cap() {
        let a = Matrix::identity(10);
        assert!(kron_chain(&[&a, &a], 10_000).is_ok());
        assert_eq!(kron_chain(&[&a, &a], 9_999), Err(Error::KronTooLarge(10_000)));
    }

    #[test]
    fn reshape_matrix_cases() {
        let x = seq(vec![2, 3]);
        let r2 = reshape(&x, &ModeSet::new(vec![1], 2).unwrap()).unwrap();
        assert_eq!(r2, x);
        let r1 = reshape(&x, &ModeSet::new(vec![0], 2).unwrap()).unwrap();
        assert_eq!(r1.as_matrix().unwrap(), x.as_matrix().unwrap().transpose());
        let rv = reshape(&x, &ModeSet::full(2).unwrap()).unwrap();
        assert_eq!(rv.dims(), &[6]);
        assert_eq!(rv.data(), x.data());
    }

    #[test]
    fn unreshape_rejects_inconsistent_dims() {
        let y = seq(vec![2, 5]);
        let a = ModeSet::new(vec![1, 2], 3).unwrap();
        assert!(matches!(unreshape(&y, &[2, 2, 2], &a), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn mode_set_validation() {
        assert!(ModeSet::new(vec![], 3).is_err());
        assert!(ModeSet::new(vec![1, 1], 3).is_err());
        assert!(ModeSet::new(vec![2, 1], 3).is_err());
        assert!(ModeSet::new(vec![3], 3).is_err());
        assert!(ModeSet::from_one_based(&[0, 1], 3).is_err());
        let a = ModeSet::from_one_based(&[2, 3], 3).unwrap();
        assert_eq!(a.indices(), &[1, 2]);
        assert!(a.is_suffix());
        assert_eq!(a.complement(), vec![0]);
        assert!(!ModeSet::new(vec![0, 2], 3).unwrap().is_suffix());
    }

    #[test]
    fn permute_rejects_non_permutation() {
        let x = seq(vec![2, 2]);
        assert!(permute_modes(&x, &[0, 0]).is_err());
        assert!(permute_modes(&x, &[0]).is_err());
    }
}
