//! The two competing fits: the reshaped (merged-mode) factor model and the full
//! Tucker factor model for each divisor combination of the merged rank.
//!
//! Both fits take the merged modes to be a suffix `v..K` of the series' modes
//! (zero-based `split = v - 1`). Other mode sets are handled in
//! [`crate::testing`] by permuting modes first.

use crate::error::{Error, Result};
use crate::series::TensorSeries;
use crate::spectral::{mode_scatter, top_eigvecs, top_eigvecs_of_frames, EigBasis};
use crate::tensor_core::{check_dims, mode_product_into, Matrix, ModeSet};

/// Factor counts for the modes kept separate (`pre_ranks`, one per mode before
/// the split) and for the merged trailing mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankSpec {
    pre_ranks: Vec<usize>,
    merged_rank: usize,
}

/// A tuple `(π_1, ..., π_{K-v+1})` of ranks for the merged modes whose product
/// is the merged rank.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DivisorCombo(pub Vec<usize>);

#[derive(Debug, Clone)]
pub struct ReshapedFit {
    pub mode_set: ModeSet,
    pub q_pre: Vec<EigBasis>,
    pub q_merged: EigBasis,
    /// Common component of the reshaped series.
    pub common: TensorSeries,
    /// Residual of the reshaped series.
    pub residual: TensorSeries,
    /// Residual refolded to the original extents.
    pub residual_orig_shape: TensorSeries,
}

#[derive(Debug, Clone)]
pub struct FullFit {
    pub combo: DivisorCombo,
    pub q_pre: Vec<EigBasis>,
    pub q_post: Vec<EigBasis>,
    pub common: TensorSeries,
    pub residual: TensorSeries,
}

impl RankSpec {
    pub fn new(pre_ranks: Vec<usize>, merged_rank: usize) -> Result<Self> {
        if merged_rank == 0 || pre_ranks.contains(&0) {
            return Err(Error::Config("all ranks must be at least 1".into()));
        }
        Ok(Self { pre_ranks, merged_rank })
    }

    pub fn pre_ranks(&self) -> &[usize] {
        &self.pre_ranks
    }

    pub fn merged_rank(&self) -> usize {
        self.merged_rank
    }

    /// Zero-based index of the first merged mode.
    pub fn split(&self) -> usize {
        self.pre_ranks.len()
    }

    pub fn with_merged_rank(&self, merged_rank: usize) -> Result<Self> {
        Self::new(self.pre_ranks.clone(), merged_rank)
    }

    /// Checks the ranks against the extents of an order-`K` series.
    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        check_dims(dims)?;
        let v = self.split();
        if v >= dims.len() {
            return Err(Error::Config(format!(
                "{v} pre-merge ranks leave no mode to merge in an order-{} tensor",
                dims.len()
            )));
        }
        for (k, (&r, &d)) in self.pre_ranks.iter().zip(dims).enumerate() {
            if r > d {
                return Err(Error::Config(format!(
                    "rank {r} of mode {} exceeds its extent {d}",
                    k + 1
                )));
            }
        }
        let d_v: usize = dims[v..].iter().product();
        if self.merged_rank > d_v {
            return Err(Error::RankOutOfRange { rank: self.merged_rank, dim: d_v });
        }
        Ok(())
    }

    pub fn mode_set(&self, order: usize) -> Result<ModeSet> {
        ModeSet::suffix(self.split(), order)
    }
}

impl DivisorCombo {
    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    /// `2x2`-style label used in reports.
    pub fn label(&self) -> String {
        self.0.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("x")
    }
}

/// All ordered tuples of positive integers with product `merged_rank` and
/// `π_j ≤ post_dims[j]`, in lexicographic order.
pub fn divisor_combinations(merged_rank: usize, post_dims: &[usize]) -> Result<Vec<DivisorCombo>> {
    if merged_rank == 0 {
        return Err(Error::Config("merged rank must be at least 1".into()));
    }
    if post_dims.is_empty() {
        return Err(Error::NoDivisorCombination { rank: merged_rank, dims: vec![] });
    }
    fn rec(rest: usize, dims: &[usize], prefix: &mut Vec<usize>, out: &mut Vec<DivisorCombo>) {
        match dims {
            [] => {}
            [last] => {
                if rest <= *last {
                    prefix.push(rest);
                    out.push(DivisorCombo(prefix.clone()));
                    prefix.pop();
                }
            }
            [d, tail @ ..] => {
                for p in (1..=rest.min(*d)).filter(|p| rest.is_multiple_of(*p)) {
                    prefix.push(p);
                    rec(rest / p, tail, prefix, out);
                    prefix.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    rec(merged_rank, post_dims, &mut Vec::new(), &mut out);
    if out.is_empty() {
        return Err(Error::NoDivisorCombination { rank: merged_rank, dims: post_dims.to_vec() });
    }
    Ok(out)
}

fn check_series(y: &TensorSeries) -> Result<()> {
    if y.len() < 2 {
        return Err(Error::Empty(format!(
            "factor estimation needs at least 2 time points, got {}",
            y.len()
        )));
    }
    Ok(())
}

/// Applies `×_k (Q_k Q_k')` for every `(k, Q_k)` to each frame of `y`
/// (extents `dims`), compressing through `Q_k'` before expanding through `Q_k`.
pub(crate) fn project_series(y: &TensorSeries, bases: &[(usize, &Matrix)]) -> Result<TensorSeries> {
    let dims = y.dims().to_vec();
    let transposes: Vec<Matrix> = bases.iter().map(|(_, q)| q.transpose()).collect();
    let mut out = Vec::with_capacity(y.data().len());
    let mut cur = Vec::new();
    let mut next = Vec::new();
    for frame in y.frames() {
        let mut cur_dims = dims.clone();
        cur.clear();
        cur.extend_from_slice(frame);
        for ((k, _), qt) in bases.iter().zip(&transposes) {
            let mut nd = cur_dims.clone();
            nd[*k] = qt.rows();
            next.resize(nd.iter().product(), 0.0);
            mode_product_into(&cur, &cur_dims, qt, *k, &mut next);
            std::mem::swap(&mut cur, &mut next);
            cur_dims = nd;
        }
        for (k, q) in bases.iter().rev() {
            let mut nd = cur_dims.clone();
            nd[*k] = q.rows();
            next.resize(nd.iter().product(), 0.0);
            mode_product_into(&cur, &cur_dims, q, *k, &mut next);
            std::mem::swap(&mut cur, &mut next);
            cur_dims = nd;
        }
        out.extend_from_slice(&cur);
    }
    TensorSeries::new(dims, y.len(), out)
}

fn difference(y: &TensorSeries, c: &TensorSeries) -> Result<TensorSeries> {
    let data = y.data().iter().zip(c.data()).map(|(a, b)| a - b).collect();
    TensorSeries::new(y.dims().to_vec(), y.len(), data)
}

/// Fits the reshaped factor model: modes `split..K` merged into one trailing mode.
///
/// With the merged modes a suffix, the reshape is the identity on buffers, so
/// the reshaped series and its residual share the original linearization.
pub fn fit_reshaped(y: &TensorSeries, spec: &RankSpec) -> Result<ReshapedFit> {
    check_series(y)?;
    spec.validate(y.dims())?;
    let v = spec.split();
    let dims = y.dims();
    let mode_set = spec.mode_set(dims.len())?;
    let mut rdims = dims[..v].to_vec();
    rdims.push(dims[v..].iter().product());
    let reshaped = y.clone().with_dims(rdims)?;

    let q_pre = (0..v)
        .map(|j| top_eigvecs(&mode_scatter(&reshaped, j)?, spec.pre_ranks()[j]))
        .collect::<Result<Vec<_>>>()?;
    let q_merged = if v == 0 {
        top_eigvecs_of_frames(&reshaped, spec.merged_rank())?
    } else {
        top_eigvecs(&mode_scatter(&reshaped, v)?, spec.merged_rank())?
    };

    let mut bases: Vec<(usize, &Matrix)> = q_pre.iter().enumerate().map(|(j, q)| (j, q.vectors())).collect();
    bases.push((v, q_merged.vectors()));
    let common = project_series(&reshaped, &bases)?;
    let residual = difference(&reshaped, &common)?;
    let residual_orig_shape = residual.clone().with_dims(dims.to_vec())?;
    Ok(ReshapedFit { mode_set, q_pre, q_merged, common, residual, residual_orig_shape })
}

/// Loadings of the full Tucker fit, shared by every divisor combination:
/// mode scatters are computed once and their eigenvectors kept at the largest
/// rank any combination needs.
#[derive(Debug, Clone)]
pub struct FullFitCache {
    spec: RankSpec,
    dims: Vec<usize>,
    q_pre: Vec<EigBasis>,
    q_post: Vec<EigBasis>,
}

impl FullFitCache {
    pub fn new(y: &TensorSeries, spec: &RankSpec, combos: &[DivisorCombo]) -> Result<Self> {
        check_series(y)?;
        spec.validate(y.dims())?;
        let dims = y.dims().to_vec();
        let v = spec.split();
        let q_pre = (0..v)
            .map(|j| top_eigvecs(&mode_scatter(y, j)?, spec.pre_ranks()[j]))
            .collect::<Result<Vec<_>>>()?;
        let q_post = (v..dims.len())
            .map(|i| {
                let need = combos.iter().map(|c| c.0.get(i - v).copied().unwrap_or(1)).max().unwrap_or(1);
                top_eigvecs(&mode_scatter(y, i)?, need)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec: spec.clone(), dims, q_pre, q_post })
    }

    fn check_combo(&self, combo: &DivisorCombo) -> Result<()> {
        let v = self.spec.split();
        let post = &self.dims[v..];
        if combo.0.len() != post.len()
            || combo.0.iter().product::<usize>() != self.spec.merged_rank()
            || combo.0.iter().zip(post).any(|(p, d)| *p == 0 || p > d)
        {
            return Err(Error::Config(format!(
                "combination {} is not a divisor combination of {} within {post:?}",
                combo.label(),
                self.spec.merged_rank()
            )));
        }
        if combo.0.iter().zip(&self.q_post).any(|(p, q)| *p > q.rank()) {
            return Err(Error::Config(format!(
                "combination {} exceeds the cached ranks",
                combo.label()
            )));
        }
        Ok(())
    }

    fn post_bases(&self, combo: &DivisorCombo) -> Result<Vec<EigBasis>> {
        self.check_combo(combo)?;
        combo.0.iter().zip(&self.q_post).map(|(&p, q)| q.truncated(p)).collect()
    }

    /// Residual `Y - Y ×_{j<v} P_j ×_{i≥v} P_{m,i}` for one combination.
    pub fn residual(&self, y: &TensorSeries, combo: &DivisorCombo) -> Result<TensorSeries> {
        Ok(self.fit_parts(y, combo)?.2)
    }

    fn fit_parts(&self, y: &TensorSeries, combo: &DivisorCombo) -> Result<(Vec<EigBasis>, TensorSeries, TensorSeries)> {
        if y.dims() != self.dims.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "series extents {:?} differ from the fitted {:?}",
                y.dims(),
                self.dims
            )));
        }
        let q_post = self.post_bases(combo)?;
        let v = self.spec.split();
        let mut bases: Vec<(usize, &Matrix)> =
            self.q_pre.iter().enumerate().map(|(j, q)| (j, q.vectors())).collect();
        bases.extend(q_post.iter().enumerate().map(|(i, q)| (v + i, q.vectors())));
        let common = project_series(y, &bases)?;
        let residual = difference(y, &common)?;
        Ok((q_post, common, residual))
    }

    pub fn fit(&self, y: &TensorSeries, combo: &DivisorCombo) -> Result<FullFit> {
        let (q_post, common, residual) = self.fit_parts(y, combo)?;
        Ok(FullFit { combo: combo.clone(), q_pre: self.q_pre.clone(), q_post, common, residual })
    }
}

/// Fits the full Tucker factor model with the merged-mode ranks given by `combo`.
pub fn fit_full(y: &TensorSeries, spec: &RankSpec, combo: &DivisorCombo) -> Result<FullFit> {
    FullFitCache::new(y, spec, std::slice::from_ref(combo))?.fit(y, combo)
}
