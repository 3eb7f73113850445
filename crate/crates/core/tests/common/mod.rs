//! Reference implementations shared by the oracle and acceptance suites.
#![allow(dead_code)]

use kronfactor::tensor_core::unfold;
use kronfactor::{Matrix, Tensor, TensorSeries};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_tensor(r: &mut impl Rng, dims: &[usize]) -> Tensor {
    Tensor::from_fn(dims.to_vec(), |_| r.sample(StandardNormal)).unwrap()
}

/// All index tuples of `dims`, first index fastest.
pub fn all_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let n: usize = dims.iter().product();
    (0..n)
        .map(|mut lin| {
            dims.iter()
                .map(|&d| {
                    let i = lin % d;
                    lin /= d;
                    i
                })
                .collect()
        })
        .collect()
}

pub fn subsets(order: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << order)).map(|m| (0..order).filter(|k| m & (1 << k) != 0).collect()).collect()
}

pub fn all_dims(order: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..order {
        out = out
            .into_iter()
            .flat_map(|p: Vec<usize>| (1..=max).map(move |d| [p.clone(), vec![d]].concat()))
            .collect();
    }
    out
}

/// Entry `(surviving indices..., l)` with `l = Σ_{a∈A} i_a ∏_{a'<a, a'∈A} d_{a'}`.
pub fn reshape_oracle(x: &Tensor, a: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let dims = x.dims();
    let rest: Vec<usize> = (0..dims.len()).filter(|k| !a.contains(k)).collect();
    let mut out_dims: Vec<usize> = rest.iter().map(|&k| dims[k]).collect();
    out_dims.push(a.iter().map(|&k| dims[k]).product());
    let mut out = vec![f64::NAN; x.len()];
    for idx in all_indices(dims) {
        let mut l = 0;
        let mut stride = 1;
        for &k in a {
            l += idx[k] * stride;
            stride *= dims[k];
        }
        let mut out_idx: Vec<usize> = rest.iter().map(|&k| idx[k]).collect();
        out_idx.push(l);
        let mut off = 0;
        let mut s = 1;
        for (i, d) in out_idx.iter().zip(&out_dims) {
            off += i * s;
            s *= d;
        }
        out[off] = x.get(&idx);
    }
    (out_dims, out)
}

/// Cyclic Jacobi eigendecomposition; returns eigenpairs sorted by decreasing value.
pub fn jacobi(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m.get(i, j).powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m.get(k, p), m.get(k, q));
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let (mpk, mqk) = (m.get(p, k), m.get(q, k));
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    (values, vectors)
}

pub fn random_symmetric(r: &mut impl Rng, n: usize) -> Matrix {
    let b = Matrix::from_fn(n, n, |_, _| r.sample(StandardNormal));
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, b.get(i, j) + b.get(j, i));
        }
    }
    s
}

pub fn vec_matrix(y: &TensorSeries) -> Matrix {
    Matrix::new(y.frame_len(), y.len(), y.data().to_vec()).unwrap()
}

pub fn top_projector(s: &Matrix, r: usize) -> Matrix {
    let (_, v) = jacobi(s);
    let q = Matrix::from_fn(s.rows(), r, |i, j| v.get(i, j));
    q.matmul(&q.transpose()).unwrap()
}

pub fn mode_scatter_oracle(y: &TensorSeries, k: usize) -> Matrix {
    let d = y.dims()[k];
    let mut s = Matrix::zeros(d, d);
    for t in 0..y.len() {
        let m = unfold(&y.tensor(t), k).unwrap();
        let g = m.matmul(&m.transpose()).unwrap();
        for i in 0..d {
            for j in 0..d {
                s.set(i, j, s.get(i, j) + g.get(i, j));
            }
        }
    }
    s
}

