//! Shared statistical machinery: tail fits with xmin selection, the Vuong
//! closeness test, polynomial regression and log-log slope fits.

mod optimize;
mod regression;
pub mod special;
mod tail;
mod vuong;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use optimize::{golden_max, nelder_mead, Minimum};
pub use regression::{fit_loglog_slope, fit_polynomial, LogLogFit, MIN_LOGLOG_POINTS};
pub use tail::{
    fit_tail, power_law_alpha, power_law_ks_distance, select_xmin, select_xmin_detailed,
    truncated_power_law_ln_norm, truncated_power_law_loglik, TailFamily, TailFit, TailModel,
    XminChoice, MIN_TAIL, MIN_XMIN_SAMPLE,
};
pub use vuong::{vuong_statistic, vuong_test, vuong_test_fits, VuongCorrection, VuongResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("too few points: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate sample")]
    DegenerateSample,
    #[error("non-positive value where a logarithm is taken")]
    NonPositiveValue,
    #[error("non-finite input")]
    NonFinite,
    #[error("fits do not share the same support")]
    MismatchedSupport,
    #[error("singular design matrix")]
    Singular,
    #[error("polynomial degree {0} is not supported")]
    UnsupportedDegree(usize),
    #[error("{family} fit did not converge")]
    NonConvergence { family: TailFamily },
}

/// Regression outcome with per-observation Gaussian log-likelihoods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<F> {
    /// Constant term first.
    pub coefficients: Vec<F>,
    pub p_values: Vec<F>,
    pub residuals: Vec<F>,
    pub pointwise_loglik: Vec<F>,
    /// Coefficients plus the noise variance.
    pub param_count: usize,
    pub aic: F,
}

impl<F: crate::Real> FitResult<F> {
    pub fn loglik(&self) -> F {
        self.pointwise_loglik.iter().copied().sum()
    }
}
