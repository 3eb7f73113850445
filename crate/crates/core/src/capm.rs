//! Removal of a market return's linear effect from every series component.

use crate::error::{Error, Result};
use crate::series::TensorSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct CapmResult {
    /// Slope on the market for each component, in storage order.
    pub beta_hat: Vec<f64>,
    pub residuals: TensorSeries,
    pub market_mean: f64,
    /// Time average of each component.
    pub series_mean: Vec<f64>,
}

/// Least-squares slope of each component on the market with intercept;
/// residuals are `vec(X_t) - mean(vec X) - (r_t - mean r) β̂`.
pub fn capm_residuals(x: &TensorSeries, market: &[f64]) -> Result<CapmResult> {
    let len = x.len();
    if market.len() != len {
        return Err(Error::ShapeMismatch(format!(
            "market has {} returns but the series has {len} time points",
            market.len()
        )));
    }
    if len < 2 {
        return Err(Error::Degenerate("at least two time points are needed".into()));
    }
    let market_mean = market.iter().sum::<f64>() / len as f64;
    let dev: Vec<f64> = market.iter().map(|r| r - market_mean).collect();
    let ss: f64 = dev.iter().map(|d| d * d).sum();
    if ss == 0.0 {
        return Err(Error::Degenerate("market series is constant".into()));
    }
    let n = x.frame_len();
    let mut series_mean = vec![0.0; n];
    for frame in x.frames() {
        series_mean.iter_mut().zip(frame).for_each(|(m, v)| *m += v);
    }
    series_mean.iter_mut().for_each(|m| *m /= len as f64);
    let mut beta_hat = vec![0.0; n];
    for (frame, d) in x.frames().zip(&dev) {
        for ((b, v), m) in beta_hat.iter_mut().zip(frame).zip(&series_mean) {
            *b += d * (v - m);
        }
    }
    beta_hat.iter_mut().for_each(|b| *b /= ss);
    let mut residuals = x.clone();
    for (t, d) in dev.iter().enumerate() {
        let frame = residuals.frame_mut(t);
        for ((v, m), b) in frame.iter_mut().zip(&series_mean).zip(&beta_hat) {
            *v = *v - m - d * b;
        }
    }
    Ok(CapmResult { beta_hat, residuals, market_mean, series_mean })
}
