//! The Kronecker product structure test and the mode-scanning procedure.
//!
//! For each time point the residuals of both fits are unfolded along the
//! smallest mode `k*` and squared entries are averaged down each column,
//! giving `x_{j,t}` (reshaped fit) and `y_{m,j,t}` (full fit, combination `m`).
//! The null of Kronecker structure is rejected when, for every combination,
//! the lower 5% quantile over `j` of the rates
//! `#{t : y_{m,j,t} ≥ q_{x,j}(α)} / T` exceeds `α`.

use crate::error::{Error, Result};
use crate::estimation::{divisor_combinations, fit_reshaped, DivisorCombo, FullFitCache, RankSpec};
use crate::series::TensorSeries;
use crate::tensor_core::{permute_modes, reshape, split_extents, Matrix, ModeSet};

/// Level of the lower quantile taken over `j` in the decision rule.
pub const J_QUANTILE: f64 = 0.05;

/// Statistics below this multiple of the data's mean square are rounding
/// noise and are set to exactly zero.
const ZERO_FLOOR: f64 = 1e-20;

/// Aggregated squared residuals of both fits.
#[derive(Debug, Clone, PartialEq)]
pub struct AggStats {
    /// Zero-based mode along which residuals are unfolded.
    pub k_star: usize,
    /// `x_{j,t}` as a `(d / d_{k*}) x T` matrix.
    pub x: Matrix,
    /// `y_{m,j,t}`, one matrix per combination.
    pub y: Vec<Matrix>,
    pub combos: Vec<DivisorCombo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub alpha: f64,
    pub reject: bool,
    /// Minimum over combinations of the exceedance rate at `j = 1`.
    pub alpha_hat: f64,
    /// Minimum over combinations of the lower 5% quantile over `j` of the rates.
    pub q_alpha_hat: f64,
    /// `1` when the null is retained.
    pub p_hat: u8,
    /// Exceedance rates, `per_combo[m][j]`.
    pub per_combo: Vec<Vec<f64>>,
    pub combos: Vec<DivisorCombo>,
    /// Zero-based mode of the original series used for aggregation.
    pub k_star: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub alpha: f64,
    /// Zero-based modes where the null was rejected.
    pub a_star_hat: Vec<usize>,
    pub per_mode: Vec<TestReport>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Smallest extent, ties going to the lowest mode.
pub fn smallest_mode(dims: &[usize]) -> usize {
    dims.iter()
        .enumerate()
        .min_by_key(|(k, d)| (**d, *k))
        .map(|(k, _)| k)
        .unwrap_or(0)
}

/// Entry `(j, t)`: mean over `i` of the squared `(i, j)` entry of the mode-`k*`
/// unfolding of frame `t`.
pub fn aggregate(residuals: &TensorSeries, k_star: usize) -> Result<Matrix> {
    let dims = residuals.dims();
    if k_star >= dims.len() {
        return Err(Error::ModeOutOfRange { mode: k_star, order: dims.len() });
    }
    let dk = dims[k_star];
    let (left, right) = split_extents(dims, k_star);
    let n_j = left * right;
    let t_len = residuals.len();
    let mut out = Matrix::zeros(n_j, t_len);
    let scale = 1.0 / dk as f64;
    for (t, frame) in residuals.frames().enumerate() {
        let col = out.col_mut(t);
        for r in 0..right {
            let dst = &mut col[left * r..left * (r + 1)];
            for i in 0..dk {
                let src = &frame[left * (i + dk * r)..left * (i + dk * r + 1)];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s * s;
                }
            }
        }
        col.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(out)
}

/// `inf { c : F(c) ≥ p }` for the empirical CDF `F` of `sample`: the
/// `⌈p n⌉`-th order statistic (at least the first).
pub fn lower_quantile(sample: &[f64], p: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty("quantile of an empty sample".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // tolerance absorbs representation error in p·n, e.g. (1 - 0.05)·100
    let k = ((p * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(sorted[k - 1])
}

/// `q_x(α) = inf { c : F_x(c) ≥ 1 - α }`.
pub fn ecdf_quantile(sample: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    lower_quantile(sample, 1.0 - alpha)
}

/// Fraction of entries `≥ threshold`.
pub fn exceedance(row: &[f64], threshold: f64) -> f64 {
    if row.is_empty() {
        return 0.0;
    }
    row.iter().filter(|&&v| v >= threshold).count() as f64 / row.len() as f64
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|j| (0..m.cols()).map(|t| m.get(j, t)).collect()).collect()
}

/// Applies the decision rule at level `alpha`.
///
/// When the reference quantile `q_{x,j}` is exactly zero (the reshaped fit
/// leaves no residual energy in column `j`), only strictly positive `y` count
/// as exceedances.
pub fn decide(stats: &AggStats, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    let n_j = stats.x.rows();
    if stats.y.is_empty() || stats.y.len() != stats.combos.len() {
        return Err(Error::ShapeMismatch("one y table is needed per combination".into()));
    }
    if stats.y.iter().any(|y| y.rows() != n_j || y.cols() != stats.x.cols()) {
        return Err(Error::ShapeMismatch("y tables must match the x table".into()));
    }
    let thresholds = rows_of(&stats.x)
        .iter()
        .map(|row| ecdf_quantile(row, alpha))
        .collect::<Result<Vec<_>>>()?;
    let per_combo: Vec<Vec<f64>> = stats
        .y
        .iter()
        .map(|y| {
            rows_of(y)
                .iter()
                .zip(&thresholds)
                .map(|(row, &q)| {
                    if q > 0.0 {
                        exceedance(row, q)
                    } else {
                        row.iter().filter(|&&v| v > 0.0).count() as f64 / row.len() as f64
                    }
                })
                .collect()
        })
        .collect();
    let q_per_combo = per_combo
        .iter()
        .map(|rates| lower_quantile(rates, J_QUANTILE))
        .collect::<Result<Vec<_>>>()?;
    let q_alpha_hat = q_per_combo.iter().copied().fold(f64::INFINITY, f64::min);
    let alpha_hat = per_combo.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
    let reject = q_alpha_hat > alpha;
    Ok(TestReport {
        alpha,
        reject,
        alpha_hat,
        q_alpha_hat,
        p_hat: u8::from(!reject),
        per_combo,
        combos: stats.combos.clone(),
        k_star: stats.k_star,
    })
}

fn floor_small(m: &mut Matrix, floor: f64) {
    m.data_mut().iter_mut().filter(|v| **v < floor).for_each(|v| *v = 0.0);
}

/// Fits both models on a series whose merged modes are the suffix given by
/// `spec` and aggregates residuals along `k_star`.
fn statistics_at(y: &TensorSeries, spec: &RankSpec, k_star: usize) -> Result<AggStats> {
    spec.validate(y.dims())?;
    let v = spec.split();
    let combos = divisor_combinations(spec.merged_rank(), &y.dims()[v..])?;
    let floor = ZERO_FLOOR * y.mean_square();

    let reshaped = fit_reshaped(y, spec)?;
    let mut x = aggregate(&reshaped.residual_orig_shape, k_star)?;
    floor_small(&mut x, floor);
    drop(reshaped);

    let cache = FullFitCache::new(y, spec, &combos)?;
    let ys = combos
        .iter()
        .map(|combo| {
            let mut agg = aggregate(&cache.residual(y, combo)?, k_star)?;
            floor_small(&mut agg, floor);
            Ok(agg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AggStats { k_star, x, y: ys, combos })
}

/// Test statistics for merged modes `split..K`, aggregated along the smallest mode.
pub fn kron_statistics(y: &TensorSeries, spec: &RankSpec) -> Result<AggStats> {
    statistics_at(y, spec, smallest_mode(y.dims()))
}

/// Full test pipeline for merged modes `split..K` at one level.
pub fn run_kron_test(y: &TensorSeries, spec: &RankSpec, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    decide(&kron_statistics(y, spec)?, alpha)
}

/// Tests the Kronecker structure along an arbitrary mode set at several levels.
///
/// `pre_ranks` are the ranks of the modes outside `mode_set`, ascending by
/// mode. Modes are permuted so that `mode_set` becomes a suffix; `k*` and the
/// reported combinations refer to the original modes (combinations list the
/// merged modes in ascending order).
pub fn run_kron_test_along(
    y: &TensorSeries,
    mode_set: &ModeSet,
    pre_ranks: &[usize],
    merged_rank: usize,
    alphas: &[f64],
) -> Result<Vec<TestReport>> {
    alphas.iter().try_for_each(|&a| check_alpha(a))?;
    if mode_set.order() != y.order() {
        return Err(Error::InvalidModeSet(format!(
            "mode set for order {} applied to order-{} series",
            mode_set.order(),
            y.order()
        )));
    }
    let spec = RankSpec::new(pre_ranks.to_vec(), merged_rank)?;
    if spec.split() != y.order() - mode_set.len() {
        return Err(Error::Config(format!(
            "expected {} pre-merge ranks, got {}",
            y.order() - mode_set.len(),
            spec.split()
        )));
    }
    let k_star = smallest_mode(y.dims());
    let stats = if mode_set.is_suffix() {
        statistics_at(y, &spec, k_star)?
    } else {
        let mut perm = mode_set.complement();
        perm.extend_from_slice(mode_set.indices());
        let permuted = y.map_frames(|f| permute_modes(f, &perm))?;
        let pos = perm.iter().position(|&p| p == k_star).expect("permutation covers every mode");
        let mut stats = statistics_at(&permuted, &spec, pos)?;
        stats.k_star = k_star;
        stats
    };
    alphas.iter().map(|&a| decide(&stats, a)).collect()
}

/// Reshapes every frame of a series along `a`.
pub fn reshape_series(y: &TensorSeries, a: &ModeSet) -> Result<TensorSeries> {
    if a.is_suffix() {
        let mut dims = y.dims()[..y.order() - a.len()].to_vec();
        dims.push(y.dims()[y.order() - a.len()..].iter().product());
        return y.clone().with_dims(dims);
    }
    y.map_frames(|f| reshape(f, a))
}

/// Scans every mode `k`: the order-2 series `Reshape(Y_t, [K] \ {k})` is tested
/// with both of its modes merged and merged rank `r_vec`; rejected modes form
/// the estimated set of modes lacking Kronecker structure.
pub fn practical_scan(y: &TensorSeries, r_vec: usize, alphas: &[f64]) -> Result<Vec<ScanReport>> {
    alphas.iter().try_for_each(|&a| check_alpha(a))?;
    let order = y.order();
    if order < 2 {
        return Err(Error::Config("the scan needs a tensor of order at least 2".into()));
    }
    let spec = RankSpec::new(vec![], r_vec)?;
    let mut per_alpha: Vec<Vec<TestReport>> = vec![Vec::with_capacity(order); alphas.len()];
    for k in 0..order {
        let rest = ModeSet::new((0..order).filter(|&m| m != k).collect(), order)?;
        let mat = reshape_series(y, &rest)?;
        let stats = kron_statistics(&mat, &spec)?;
        for (slot, &a) in per_alpha.iter_mut().zip(alphas) {
            slot.push(decide(&stats, a)?);
        }
    }
    Ok(per_alpha
        .into_iter()
        .zip(alphas)
        .map(|(per_mode, &alpha)| ScanReport {
            alpha,
            a_star_hat: per_mode.iter().enumerate().filter(|(_, r)| r.reject).map(|(k, _)| k).collect(),
            per_mode,
        })
        .collect())
}

/// Eigenvalue-ratio rank estimate: `argmax_{1 ≤ i ≤ max_r} λ_i / λ_{i+1}` over
/// descending eigenvalues. A zero denominator under a positive numerator wins outright.
pub fn estimate_rank_er(values: &[f64], max_r: usize) -> Result<usize> {
    if values.len() < 2 {
        return Err(Error::Degenerate("rank estimation needs at least two eigenvalues".into()));
    }
    if values.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("all eigenvalues are zero".into()));
    }
    let upper = max_r.min(values.len() - 1).max(1);
    let mut best = (1usize, f64::NEG_INFINITY);
    for i in 1..=upper {
        let (num, den) = (values[i - 1], values[i]);
        let ratio = if den > 0.0 {
            num / den
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            continue;
        };
        if ratio > best.1 {
            best = (i, ratio);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_hand_example() {
        let e = TensorSeries::new(vec![2, 2], 1, vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        let x = aggregate(&e, 0).unwrap();
        assert_eq!(x.data(), &[5.0, 10.0]);
    }

    #[test]
    fn aggregate_zero_and_ones() {
        let z = TensorSeries::zeros(vec![2, 3, 2], 4).unwrap();
        assert!(aggregate(&z, 1).unwrap().data().iter().all(|v| *v == 0.0));
        let o = TensorSeries::new(vec![2, 3, 2], 4, vec![1.0; 48]).unwrap();
        let a = aggregate(&o, 2).unwrap();
        assert_eq!((a.rows(), a.cols()), (6, 4));
        assert!(a.data().iter().all(|v| *v == 1.0));
        assert!(aggregate(&o, 3).is_err());
    }

    #[test]
    fn ecdf_quantile_examples() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(ecdf_quantile(&s, 0.05).unwrap(), 5.0);
        assert_eq!(ecdf_quantile(&s, 0.4).unwrap(), 3.0);
        assert!(ecdf_quantile(&[], 0.05).is_err());
        assert_eq!(ecdf_quantile(&s, 0.0), Err(Error::InvalidAlpha(0.0)));
    }

    #[test]
    fn exceedance_examples() {
        assert_eq!(exceedance(&[1.0, 2.0], 5.0), 0.0);
        assert_eq!(exceedance(&[3.0], 3.0), 1.0);
        assert_eq!(exceedance(&[1.0, 2.0, 3.0, 4.0], 2.5), 0.5);
    }

    fn table(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn decide_hand_worked_table() {
        // 3 j's, 4 t's, alpha = 0.25 so q_{x,j} is the 3rd order statistic.
        let x = table(&[&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0], &[10.0, 20.0, 30.0, 40.0]]);
        // q_x = (3, 3, 30)
        let y1 = table(&[&[3.0, 3.0, 0.0, 9.0], &[0.0, 0.0, 0.0, 3.5], &[31.0, 1.0, 1.0, 1.0]]);
        let y2 = table(&[&[5.0, 5.0, 5.0, 5.0], &[2.0, 4.0, 4.0, 4.0], &[30.0, 30.0, 0.0, 0.0]]);
        let stats = AggStats {
            k_star: 0,
            x,
            y: vec![y1, y2],
            combos: vec![DivisorCombo(vec![1, 2]), DivisorCombo(vec![2, 1])],
        };
        let r = decide(&stats, 0.25).unwrap();
        assert_eq!(r.per_combo[0], vec![0.75, 0.25, 0.25]);
        assert_eq!(r.per_combo[1], vec![1.0, 0.75, 0.5]);
        // lower 5% quantile over 3 rates is the minimum
        assert_eq!(r.q_alpha_hat, 0.25);
        assert_eq!(r.alpha_hat, 0.75);
        assert!(!r.reject);
        assert_eq!(r.p_hat, 1);
        // at alpha = 0.2 the threshold is the maximum, q_x = (4, 4, 40)
        let strict = decide(&stats, 0.2).unwrap();
        assert_eq!(strict.per_combo[0], vec![0.25, 0.0, 0.0]);
        assert_eq!(strict.per_combo[1], vec![1.0, 0.75, 0.0]);
        assert!(!strict.reject);

        let big = table(&[&[50.0; 4], &[50.0; 4], &[50.0, 50.0, 50.0, 0.0]]);
        let inflated = AggStats { y: vec![big.clone(), big], ..stats };
        let r = decide(&inflated, 0.25).unwrap();
        assert_eq!(r.q_alpha_hat, 0.75);
        assert!(r.reject);
        assert_eq!(r.p_hat, 0);
    }

    #[test]
    fn self_comparison_overshoots_by_one_order_statistic() {
        // with y == x every rate is (floor(alpha T) + 1) / T, which exceeds alpha
        for t_len in [20usize, 37, 100] {
            let x = Matrix::from_fn(3, t_len, |j, t| ((t * 7 + j * 3) % t_len) as f64 + 1.0);
            let stats = AggStats { k_star: 0, x: x.clone(), y: vec![x], combos: vec![DivisorCombo(vec![1])] };
            let r = decide(&stats, 0.05).unwrap();
            let rate = ((0.05 * t_len as f64).floor() + 1.0) / t_len as f64;
            assert!(r.per_combo[0].iter().all(|v| (*v - rate).abs() < 1e-15));
            assert!(rate <= 0.05 + 1.0 / t_len as f64);
            assert!(r.reject);
        }
    }

    #[test]
    fn decide_min_picks_zero_combo() {
        let x = Matrix::from_fn(4, 30, |j, t| 1.0 + ((j * 31 + t * 17) % 23) as f64);
        let zero = Matrix::zeros(4, 30);
        let inflated = Matrix::from_fn(4, 30, |j, t| 100.0 + (j + t) as f64);
        let stats = AggStats {
            k_star: 0,
            x,
            y: vec![inflated.clone(), zero, inflated],
            combos: vec![DivisorCombo(vec![1]), DivisorCombo(vec![2]), DivisorCombo(vec![3])],
        };
        let r = decide(&stats, 0.05).unwrap();
        assert_eq!(r.q_alpha_hat, 0.0);
        assert_eq!(r.alpha_hat, 0.0);
        assert!(!r.reject);
    }

    #[test]
    fn decide_rejects_mismatched_tables() {
        let stats = AggStats {
            k_star: 0,
            x: Matrix::zeros(2, 5),
            y: vec![Matrix::zeros(3, 5)],
            combos: vec![DivisorCombo(vec![1])],
        };
        assert!(decide(&stats, 0.05).is_err());
    }

    #[test]
    fn rank_er_examples() {
        assert_eq!(estimate_rank_er(&[10.0, 9.0, 1.0, 0.9], 3).unwrap(), 2);
        assert_eq!(estimate_rank_er(&[5.0, 0.01, 0.009], 2).unwrap(), 1);
        assert!(estimate_rank_er(&[0.0, 0.0], 1).is_err());
        assert!(estimate_rank_er(&[1.0], 1).is_err());
        assert_eq!(estimate_rank_er(&[3.0, 2.0, 0.0], 2).unwrap(), 2);
    }

    #[test]
    fn smallest_mode_ties_go_low() {
        assert_eq!(smallest_mode(&[15, 10, 10]), 1);
        assert_eq!(smallest_mode(&[5, 5]), 0);
    }
}
