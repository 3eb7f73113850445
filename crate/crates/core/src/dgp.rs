//! Simulation designs for Tucker factor models with and without Kronecker
//! structure along a mode set, and a seeded Monte Carlo harness.
//!
//! Every replication draws from its own ChaCha8 stream: the generator is
//! seeded with the base seed and switched to stream number `rep`, so results
//! do not depend on scheduling or on how many replications run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::TensorSeries;
use crate::tensor_core::{check_dims, multi_mode_product, reshape, unreshape, Matrix, ModeSet};
use crate::testing::{practical_scan, run_kron_test_along, ScanReport, TestReport};

/// Steps discarded before an AR path is recorded.
pub const BURN_IN: usize = 200;

pub const FACTOR_AR: (f64, f64) = (0.7, -0.3);
pub const NOISE_FACTOR_AR: (f64, f64) = (-0.5, 0.5);
pub const IDIO_AR: (f64, f64) = (0.4, 0.4);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Loadings of the merged modes are a Kronecker product.
    H0,
    /// The merged loading is an unstructured Gaussian matrix.
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Innovation {
    Normal,
    /// Student t with 3 degrees of freedom, scaled to unit variance.
    StudentT3,
}

/// What each Monte Carlo replication runs on the simulated series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Procedure {
    /// The test along `mode_set` with the true ranks.
    Test,
    /// The mode scan with the vectorised rank `∏ r_k`.
    Scan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub dims: Vec<usize>,
    /// Series length `T`.
    pub len: usize,
    pub ranks: Vec<usize>,
    pub mode_set: ModeSet,
    pub hypothesis: Hypothesis,
    /// Weak-factor exponents, `zeta[k][h]` for factor `h` of mode `k`.
    pub zeta: Vec<Vec<f64>>,
    /// Exponents for the columns of the unstructured merged loading (H1 only).
    pub zeta_merged: Vec<f64>,
    pub innovation: Innovation,
    pub noise_ranks: Vec<usize>,
    /// Probability that an entry of a noise loading is set to zero.
    pub sparsity: f64,
    pub seed: u64,
    /// Multiplier on the noise; 0 gives noiseless series.
    pub noise_scale: f64,
    pub procedure: Procedure,
    /// When nonempty, each replication tests with a merged rank drawn
    /// uniformly from this list instead of the true one.
    pub rv_choices: Vec<usize>,
}

impl DgpConfig {
    /// Pervasive two-factor design with two noise factors per mode.
    pub fn new(dims: Vec<usize>, len: usize, mode_set: ModeSet, hypothesis: Hypothesis) -> Result<Self> {
        let order = dims.len();
        let cfg = Self {
            ranks: vec![2; order],
            zeta: vec![vec![0.0; 2]; order],
            zeta_merged: vec![0.0; 1 << mode_set.len()],
            noise_ranks: vec![2; order],
            dims,
            len,
            mode_set,
            hypothesis,
            innovation: Innovation::Normal,
            sparsity: 0.95,
            seed: 0,
            noise_scale: 1.0,
            procedure: Procedure::Test,
            rv_choices: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// `r_V`, the product of the ranks of the modes in `mode_set`.
    pub fn merged_rank(&self) -> usize {
        self.mode_set.indices().iter().map(|&k| self.ranks[k]).product()
    }

    pub fn validate(&self) -> Result<()> {
        check_dims(&self.dims)?;
        let order = self.order();
        if self.len < 2 {
            return Err(Error::Config("series length must be at least 2".into()));
        }
        if self.mode_set.order() != order {
            return Err(Error::Config(format!("mode set is for order {}, dims have order {order}", self.mode_set.order())));
        }
        for (name, r) in [("ranks", &self.ranks), ("noise_ranks", &self.noise_ranks)] {
            if r.len() != order {
                return Err(Error::Config(format!("{name} needs {order} entries, got {}", r.len())));
            }
            if let Some(k) = (0..order).find(|&k| r[k] == 0 || r[k] > self.dims[k]) {
                return Err(Error::Config(format!("{name} entry {} for mode {} is outside 1..={}", r[k], k + 1, self.dims[k])));
            }
        }
        if self.zeta.len() != order || (0..order).any(|k| self.zeta[k].len() != self.ranks[k]) {
            return Err(Error::Config("zeta needs one exponent per factor of every mode".into()));
        }
        if self.hypothesis == Hypothesis::H1 && self.zeta_merged.len() != self.merged_rank() {
            return Err(Error::Config(format!("zeta_merged needs {} entries", self.merged_rank())));
        }
        let bad_zeta = self.zeta.iter().flatten().chain(&self.zeta_merged).any(|z| !(0.0..=0.5).contains(z));
        if bad_zeta {
            return Err(Error::Config("weak-factor exponents must lie in [0, 0.5]".into()));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::Config(format!("sparsity {} is not a probability", self.sparsity)));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::Config(format!("noise scale {} must be finite and non-negative", self.noise_scale)));
        }
        if self.procedure == Procedure::Scan && order < 2 {
            return Err(Error::Config("the scan needs order at least 2".into()));
        }
        if self.rv_choices.contains(&0) {
            return Err(Error::Config("merged rank choices must be positive".into()));
        }
        Ok(())
    }
}

fn innovation(rng: &mut ChaCha8Rng, kind: Innovation) -> f64 {
    match kind {
        Innovation::Normal => rng.sample(StandardNormal),
        Innovation::StudentT3 => {
            let t: f64 = rng.sample(StudentT::new(3.0).expect("3 degrees of freedom is valid"));
            t / 3f64.sqrt()
        }
    }
}

fn ar2_path(rng: &mut ChaCha8Rng, len: usize, (phi1, phi2): (f64, f64), kind: Innovation) -> Vec<f64> {
    let (mut y1, mut y2) = (0.0, 0.0);
    let mut out = Vec::with_capacity(len);
    for step in 0..BURN_IN + len {
        let y = phi1 * y1 + phi2 * y2 + innovation(rng, kind);
        y2 = y1;
        y1 = y;
        if step >= BURN_IN {
            out.push(y);
        }
    }
    out
}

pub fn is_stationary((phi1, phi2): (f64, f64)) -> bool {
    phi2 > -1.0 && phi2 < 1.0 - phi1.abs()
}

/// Stationary variance of an AR(2) with unit-variance innovations.
pub fn ar2_variance((phi1, phi2): (f64, f64)) -> Result<f64> {
    if !is_stationary((phi1, phi2)) {
        return Err(Error::NonStationary(phi1, phi2));
    }
    Ok((1.0 - phi2) / ((1.0 + phi2) * ((1.0 - phi2).powi(2) - phi1 * phi1)))
}

/// AR(2) path of length `len` after a burn-in, divided by the stationary
/// standard deviation so it has unit variance.
pub fn gen_ar2(rng: &mut ChaCha8Rng, len: usize, coefs: (f64, f64), kind: Innovation) -> Result<Vec<f64>> {
    let sd = ar2_variance(coefs)?.sqrt();
    let mut path = ar2_path(rng, len, coefs, kind);
    path.iter_mut().for_each(|v| *v /= sd);
    Ok(path)
}

/// Like [`gen_ar2`] but divides by the sample standard deviation around
/// zero, which also handles coefficients on the stationarity boundary.
pub fn gen_ar2_sample_scaled(rng: &mut ChaCha8Rng, len: usize, coefs: (f64, f64), kind: Innovation) -> Vec<f64> {
    let mut path = ar2_path(rng, len, coefs, kind);
    let sd = (path.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    if sd > 0.0 {
        path.iter_mut().for_each(|v| *v /= sd);
    }
    path
}

/// `n` independent unit-variance AR(2) series laid out as a tensor series.
fn ar2_series(rng: &mut ChaCha8Rng, dims: Vec<usize>, len: usize, coefs: (f64, f64), kind: Innovation) -> Result<TensorSeries> {
    let n: usize = dims.iter().product();
    let mut data = vec![0.0; n * len];
    for e in 0..n {
        let path = if is_stationary(coefs) {
            gen_ar2(rng, len, coefs, kind)?
        } else {
            gen_ar2_sample_scaled(rng, len, coefs, kind)
        };
        for (t, v) in path.into_iter().enumerate() {
            data[n * t + e] = v;
        }
    }
    TensorSeries::new(dims, len, data)
}

/// `U · diag(d^{-ζ_h})` with `U` standard Gaussian.
pub fn gen_loading(rng: &mut ChaCha8Rng, d: usize, zeta: &[f64]) -> Matrix {
    Matrix::from_fn(d, zeta.len(), |_, h| {
        let u: f64 = rng.sample(StandardNormal);
        u * (d as f64).powf(-zeta[h])
    })
}

/// Standard Gaussian entries, each set to zero with probability `zero_prob`.
pub fn gen_sparse_loading(rng: &mut ChaCha8Rng, d: usize, r: usize, zero_prob: f64) -> Matrix {
    Matrix::from_fn(d, r, |_, _| {
        let u: f64 = rng.sample(StandardNormal);
        if rng.random::<f64>() < zero_prob {
            0.0
        } else {
            u
        }
    })
}

/// All components of one simulated series.
#[derive(Debug, Clone)]
pub struct SimDraw {
    pub factors: TensorSeries,
    /// Per-mode loadings; under H1 those of merged modes are unused.
    pub loadings: Vec<Matrix>,
    /// The unstructured merged loading under H1.
    pub merged_loading: Option<Matrix>,
    pub common: TensorSeries,
    pub noise: TensorSeries,
}

impl SimDraw {
    pub fn series(&self) -> TensorSeries {
        let mut y = self.common.clone();
        y.data_mut().iter_mut().zip(self.noise.data()).for_each(|(a, b)| *a += b);
        y
    }
}

/// Draws loadings, factors and noise in a fixed order from `rng`.
pub fn draw(config: &DgpConfig, rng: &mut ChaCha8Rng) -> Result<SimDraw> {
    config.validate()?;
    let order = config.order();
    let dims = &config.dims;
    let loadings: Vec<Matrix> = (0..order).map(|k| gen_loading(rng, dims[k], &config.zeta[k])).collect();
    let merged_loading = match config.hypothesis {
        Hypothesis::H0 => None,
        Hypothesis::H1 => {
            let d_v = config.mode_set.indices().iter().map(|&k| dims[k]).product();
            Some(gen_loading(rng, d_v, &config.zeta_merged))
        }
    };
    let noise_loadings: Vec<Matrix> = (0..order)
        .map(|k| gen_sparse_loading(rng, dims[k], config.noise_ranks[k], config.sparsity))
        .collect();
    let sigma: Vec<f64> = (0..dims.iter().product::<usize>())
        .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
        .collect();

    let factors = ar2_series(rng, config.ranks.clone(), config.len, FACTOR_AR, config.innovation)?;
    let noise_factors = ar2_series(rng, config.noise_ranks.clone(), config.len, NOISE_FACTOR_AR, config.innovation)?;
    let idio = ar2_series(rng, dims.clone(), config.len, IDIO_AR, config.innovation)?;

    let all_modes: Vec<(usize, &Matrix)> = loadings.iter().enumerate().collect();
    let common = match &merged_loading {
        None => factors.map_frames(|f| multi_mode_product(f, &all_modes))?,
        Some(a_v) => {
            let a = &config.mode_set;
            let mut reshaped_modes: Vec<(usize, &Matrix)> =
                a.complement().iter().enumerate().map(|(i, &k)| (i, &loadings[k])).collect();
            reshaped_modes.push((reshaped_modes.len(), a_v));
            factors.map_frames(|f| {
                let c = multi_mode_product(&reshape(f, a)?, &reshaped_modes)?;
                unreshape(&c, dims, a)
            })?
        }
    };
    let noise_modes: Vec<(usize, &Matrix)> = noise_loadings.iter().enumerate().collect();
    let mut noise = noise_factors.map_frames(|f| multi_mode_product(f, &noise_modes))?;
    let n = sigma.len();
    for (i, (e, x)) in noise.data_mut().iter_mut().zip(idio.data()).enumerate() {
        *e = config.noise_scale * (*e + sigma[i % n] * x);
    }
    Ok(SimDraw { factors, loadings, merged_loading, common, noise })
}

/// Stream for replication `rep` of a design seeded with `seed`.
pub fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// One series from the design, using replication stream 0.
pub fn simulate(config: &DgpConfig) -> Result<TensorSeries> {
    Ok(draw(config, &mut rep_rng(config.seed, 0))?.series())
}

#[derive(Debug, Clone, PartialEq)]
pub enum RepOutcome {
    /// One report per level.
    Test(Vec<TestReport>),
    Scan(Vec<ScanReport>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub alpha: f64,
    /// Mean `α̂` (test designs only).
    pub mean_alpha_hat: Option<f64>,
    /// Mean `p̂` (test designs only).
    pub mean_p_hat: Option<f64>,
    /// Fraction of replications flagging each mode (scan designs only).
    pub mode_fraction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub reps: Vec<RepOutcome>,
    pub summary: Vec<SummaryRow>,
}

fn run_rep(config: &DgpConfig, rep: u64, alphas: &[f64]) -> Result<RepOutcome> {
    let mut rng = rep_rng(config.seed, rep);
    let y = draw(config, &mut rng)?.series();
    match config.procedure {
        Procedure::Test => {
            let merged_rank = if config.rv_choices.is_empty() {
                config.merged_rank()
            } else {
                config.rv_choices[rng.random_range(0..config.rv_choices.len())]
            };
            let pre: Vec<usize> = config.mode_set.complement().iter().map(|&k| config.ranks[k]).collect();
            Ok(RepOutcome::Test(run_kron_test_along(&y, &config.mode_set, &pre, merged_rank, alphas)?))
        }
        Procedure::Scan => {
            let r_vec = config.ranks.iter().product();
            Ok(RepOutcome::Scan(practical_scan(&y, r_vec, alphas)?))
        }
    }
}

/// Runs `reps` independent replications (in parallel) and averages the
/// per-replication metrics in replication order.
pub fn monte_carlo(config: &DgpConfig, reps: usize, alphas: &[f64]) -> Result<SimResult> {
    config.validate()?;
    if reps == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    if alphas.is_empty() {
        return Err(Error::Config("at least one level is required".into()));
    }
    if let Some(&a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::InvalidAlpha(a));
    }
    let outcomes = (0..reps as u64)
        .into_par_iter()
        .map(|rep| run_rep(config, rep, alphas))
        .collect::<Result<Vec<_>>>()?;
    let n = reps as f64;
    let summary = alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| match config.procedure {
            Procedure::Test => {
                let (mut a_sum, mut p_sum) = (0.0, 0.0);
                for out in &outcomes {
                    if let RepOutcome::Test(r) = out {
                        a_sum += r[i].alpha_hat;
                        p_sum += f64::from(r[i].p_hat);
                    }
                }
                SummaryRow { alpha, mean_alpha_hat: Some(a_sum / n), mean_p_hat: Some(p_sum / n), mode_fraction: None }
            }
            Procedure::Scan => {
                let mut counts = vec![0usize; config.order()];
                for out in &outcomes {
                    if let RepOutcome::Scan(r) = out {
                        r[i].a_star_hat.iter().for_each(|&k| counts[k] += 1);
                    }
                }
                let fractions = counts.iter().map(|&c| c as f64 / n).collect();
                SummaryRow { alpha, mean_alpha_hat: None, mean_p_hat: None, mode_fraction: Some(fractions) }
            }
        })
        .collect();
    Ok(SimResult { reps: outcomes, summary })
}

/// Stationary autocorrelation at lag 1.
pub fn ar2_rho1((phi1, phi2): (f64, f64)) -> f64 {
    phi1 / (1.0 - phi2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationarity_region() {
        assert!(is_stationary((0.7, -0.3)));
        assert!(is_stationary((0.4, 0.4)));
        assert!(!is_stationary((0.9, 0.2)));
        assert!(!is_stationary((-0.5, 0.5)));
        let mut rng = rep_rng(1, 0);
        assert_eq!(gen_ar2(&mut rng, 10, (0.9, 0.2), Innovation::Normal), Err(Error::NonStationary(0.9, 0.2)));
    }

    #[test]
    fn ar2_variance_white_noise() {
        assert_eq!(ar2_variance((0.0, 0.0)).unwrap(), 1.0);
        // AR(1) special case 1 / (1 - φ²)
        assert!((ar2_variance((0.5, 0.0)).unwrap() - 1.0 / 0.75).abs() < 1e-15);
    }

    #[test]
    fn sparse_loading_extremes() {
        let mut rng = rep_rng(3, 0);
        assert!(gen_sparse_loading(&mut rng, 20, 2, 1.0).data().iter().all(|v| *v == 0.0));
        assert!(gen_sparse_loading(&mut rng, 20, 2, 0.0).data().iter().all(|v| *v != 0.0));
    }

    #[test]
    fn config_validation() {
        let a = ModeSet::suffix(1, 3).unwrap();
        let mut cfg = DgpConfig::new(vec![5, 5, 5], 50, a, Hypothesis::H0).unwrap();
        assert_eq!(cfg.merged_rank(), 4);
        cfg.ranks[0] = 6;
        assert!(cfg.validate().is_err());
        cfg.ranks[0] = 2;
        cfg.zeta[1][0] = 0.7;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn draw_shapes_and_determinism() {
        let a = ModeSet::suffix(1, 3).unwrap();
        let cfg = DgpConfig::new(vec![4, 3, 5], 30, a, Hypothesis::H1).unwrap();
        let d1 = draw(&cfg, &mut rep_rng(9, 2)).unwrap();
        let d2 = draw(&cfg, &mut rep_rng(9, 2)).unwrap();
        assert_eq!(d1.common, d2.common);
        assert_eq!(d1.noise, d2.noise);
        assert_eq!(d1.common.dims(), &[4, 3, 5]);
        assert_eq!(d1.merged_loading.as_ref().unwrap().rows(), 15);
        let other = draw(&cfg, &mut rep_rng(9, 3)).unwrap();
        assert_ne!(d1.common, other.common);
    }
}
