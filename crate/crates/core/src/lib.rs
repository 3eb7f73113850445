//! Hypothesis tests for Kronecker structure in the loadings of Tucker tensor
//! factor models.
//!
//! The crate provides the tensor reshape algebra ([`tensor_core`]), PCA-based
//! loading and residual estimation ([`estimation`]), the quantile-based
//! decision rule over all divisor combinations of the merged rank together
//! with the mode-scanning procedure ([`testing`]), simulation designs and a
//! Monte Carlo harness ([`dgp`]), and file formats plus market-effect removal
//! ([`io`], [`capm`]).

pub mod capm;
pub mod dgp;
pub mod error;
pub mod estimation;
pub mod io;
pub mod series;
pub mod spectral;
pub mod tensor_core;
pub mod testing;

pub use error::{Error, Result};
pub use series::TensorSeries;
pub use tensor_core::{Matrix, ModeSet, Tensor};
