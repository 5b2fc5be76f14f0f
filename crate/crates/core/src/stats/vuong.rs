//! Vuong closeness test on pointwise log-likelihoods.

use serde::{Deserialize, Serialize};

use super::special::normal_sf;
use super::tail::{TailFamily, TailFit};
use super::{FitResult, StatsError};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VuongCorrection {
    /// Plain likelihood ratio.
    None,
    /// Likelihood ratio penalized by the parameter-count difference (AIC/2).
    Aic,
}

/// `statistic > 0` favors the first model; `p_value_one_sided` is
/// `P[Z > statistic]`, so a small p-value favors the first model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VuongResult<F> {
    pub statistic: F,
    pub p_value_one_sided: F,
    pub nested: bool,
    pub correction: VuongCorrection,
}

impl<F: Real> VuongResult<F> {
    /// Two-sided decision at level `alpha`: `Some(true)` favors the first
    /// model, `Some(false)` the second, `None` is undecidable.
    pub fn decide(&self, alpha: F) -> Option<bool> {
        let p = self.p_value_one_sided;
        let half = alpha / F::of(2.0);
        if p < half {
            Some(true)
        } else if p > F::one() - half {
            Some(false)
        } else {
            None
        }
    }
}

/// Normalized mean log-likelihood difference `√n · mean(d) / sd(d)` with
/// `d_i = a_i - b_i`, minus `penalty` on the summed ratio.
pub fn vuong_statistic<F: Real>(a: &[F], b: &[F], penalty: F) -> Result<F, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::MismatchedSupport);
    }
    let n = a.len();
    if n == 0 {
        return Err(StatsError::TooFewPoints { needed: 1, got: 0 });
    }
    let nf = F::of_usize(n);
    let d: Vec<F> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let total: F = d.iter().copied().sum();
    let mean = total / nf;
    let var = d.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>() / nf;
    let numerator = total - penalty;
    let sd = var.sqrt();
    // Identical models have zero variance; an exact tie is a zero statistic.
    if sd <= F::epsilon() * (F::one() + mean.abs()) {
        return Ok(if numerator.abs() <= F::epsilon() * (F::one() + total.abs()) {
            F::zero()
        } else if numerator > F::zero() {
            F::infinity()
        } else {
            F::neg_infinity()
        });
    }
    Ok(numerator / (nf.sqrt() * sd))
}

fn result<F: Real>(statistic: F, nested: bool, correction: VuongCorrection) -> VuongResult<F> {
    VuongResult {
        statistic,
        p_value_one_sided: F::of(normal_sf(statistic.f64())),
        nested,
        correction,
    }
}

/// Uncorrected Vuong test between two tail fits sharing `xmin` and `n_tail`.
pub fn vuong_test<F: Real>(a: &TailFit<F>, b: &TailFit<F>) -> Result<VuongResult<F>, StatsError> {
    if a.xmin != b.xmin || a.n_tail != b.n_tail {
        return Err(StatsError::MismatchedSupport);
    }
    let nested = matches!(
        (a.family(), b.family()),
        (TailFamily::PowerLaw, TailFamily::TruncatedPowerLaw)
            | (TailFamily::TruncatedPowerLaw, TailFamily::PowerLaw)
    );
    let stat = vuong_statistic(&a.pointwise_loglik, &b.pointwise_loglik, F::zero())?;
    Ok(result(stat, nested, VuongCorrection::None))
}

/// Vuong test between two regression fits on the same observations.
pub fn vuong_test_fits<F: Real>(
    a: &FitResult<F>,
    b: &FitResult<F>,
    correction: VuongCorrection,
) -> Result<VuongResult<F>, StatsError> {
    let penalty = match correction {
        VuongCorrection::None => F::zero(),
        VuongCorrection::Aic => F::of_usize(a.param_count) - F::of_usize(b.param_count),
    };
    let stat = vuong_statistic(&a.pointwise_loglik, &b.pointwise_loglik, penalty)?;
    Ok(result(stat, true, correction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::tail::{fit_tail, TailFamily};

    #[test]
    fn identical_fits_give_zero_and_half() {
        let x: Vec<f64> = (1..=100).map(|i| 1.0 + f64::from(i) * 0.37).collect();
        let a = fit_tail(&x, TailFamily::PowerLaw, 1.0).unwrap();
        let r = vuong_test(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value_one_sided, 0.5);
        assert!(!r.nested);
    }

    #[test]
    fn statistic_is_antisymmetric() {
        let x: Vec<f64> = (1..=300).map(|i| (f64::from(i) * 0.731).exp().fract() * 10.0 + 1.0).collect();
        let a = fit_tail(&x, TailFamily::PowerLaw, 1.0).unwrap();
        let b = fit_tail(&x, TailFamily::Exponential, 1.0).unwrap();
        let ab = vuong_test(&a, &b).unwrap();
        let ba = vuong_test(&b, &a).unwrap();
        assert!((ab.statistic + ba.statistic).abs() < 1e-12);
        assert!((ab.p_value_one_sided + ba.p_value_one_sided - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_support_rejected() {
        let x: Vec<f64> = (1..=100).map(f64::from).collect();
        let a = fit_tail(&x, TailFamily::PowerLaw, 1.0).unwrap();
        let b = fit_tail(&x, TailFamily::PowerLaw, 2.0).unwrap();
        assert_eq!(vuong_test(&a, &b), Err(StatsError::MismatchedSupport));
    }

    #[test]
    fn nested_pair_flagged() {
        let x: Vec<f64> = (1..=200).map(|i| 1.0 + (f64::from(i) * 0.5).powf(1.3)).collect();
        let a = fit_tail(&x, TailFamily::PowerLaw, 1.5).unwrap();
        let b = fit_tail(&x, TailFamily::TruncatedPowerLaw, 1.5).unwrap();
        assert!(vuong_test(&a, &b).unwrap().nested);
    }

    #[test]
    fn decide_two_sided() {
        let r = result(3.0f64, false, VuongCorrection::None);
        assert_eq!(r.decide(0.05), Some(true));
        let r = result(-3.0f64, false, VuongCorrection::None);
        assert_eq!(r.decide(0.05), Some(false));
        let r = result(1.0f64, false, VuongCorrection::None);
        assert_eq!(r.decide(0.05), None);
    }
}
