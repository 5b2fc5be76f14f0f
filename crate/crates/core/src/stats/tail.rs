//! Continuous tail fits conditional on `x >= xmin`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::optimize::{golden_max, nelder_mead};
use super::special::{ln_normal_sf, ln_upper_gamma};
use super::StatsError;
use crate::Real;

/// Fewest tail points any fit accepts.
pub const MIN_TAIL: usize = 10;
/// Fewest sample points `select_xmin` accepts.
pub const MIN_XMIN_SAMPLE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailFamily {
    PowerLaw,
    LogNormal,
    Exponential,
    TruncatedPowerLaw,
}

impl TailFamily {
    pub const ALL: [TailFamily; 4] = [
        TailFamily::PowerLaw,
        TailFamily::LogNormal,
        TailFamily::Exponential,
        TailFamily::TruncatedPowerLaw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TailFamily::PowerLaw => "powerlaw",
            TailFamily::LogNormal => "lognormal",
            TailFamily::Exponential => "exponential",
            TailFamily::TruncatedPowerLaw => "truncated_powerlaw",
        }
    }
}

impl fmt::Display for TailFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailModel<F> {
    PowerLaw { alpha: F },
    LogNormal { mu: F, sigma: F },
    Exponential { lambda: F },
    TruncatedPowerLaw { alpha: F, lambda: F },
}

impl<F: Real> TailModel<F> {
    pub fn family(&self) -> TailFamily {
        match self {
            TailModel::PowerLaw { .. } => TailFamily::PowerLaw,
            TailModel::LogNormal { .. } => TailFamily::LogNormal,
            TailModel::Exponential { .. } => TailFamily::Exponential,
            TailModel::TruncatedPowerLaw { .. } => TailFamily::TruncatedPowerLaw,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            TailModel::PowerLaw { .. } | TailModel::Exponential { .. } => 1,
            TailModel::LogNormal { .. } | TailModel::TruncatedPowerLaw { .. } => 2,
        }
    }

    pub fn params(&self) -> Vec<F> {
        match *self {
            TailModel::PowerLaw { alpha } => vec![alpha],
            TailModel::LogNormal { mu, sigma } => vec![mu, sigma],
            TailModel::Exponential { lambda } => vec![lambda],
            TailModel::TruncatedPowerLaw { alpha, lambda } => vec![alpha, lambda],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit<F> {
    pub model: TailModel<F>,
    pub xmin: F,
    pub n_tail: usize,
    pub pointwise_loglik: Vec<F>,
    pub aic: F,
}

impl<F: Real> TailFit<F> {
    fn new(model: TailModel<F>, xmin: F, pointwise_loglik: Vec<F>) -> Self {
        let ll: F = pointwise_loglik.iter().copied().sum();
        let k = F::of_usize(model.param_count());
        TailFit {
            model,
            xmin,
            n_tail: pointwise_loglik.len(),
            aic: F::of(2.0) * k - F::of(2.0) * ll,
            pointwise_loglik,
        }
    }

    pub fn family(&self) -> TailFamily {
        self.model.family()
    }

    pub fn loglik(&self) -> F {
        self.pointwise_loglik.iter().copied().sum()
    }
}

fn tail_of<F: Real>(sample: &[F], xmin: F) -> Vec<F> {
    sample.iter().copied().filter(|&x| x >= xmin).collect()
}

/// Maximum-likelihood fit of `family` to the points of `sample` at or above `xmin`.
pub fn fit_tail<F: Real>(sample: &[F], family: TailFamily, xmin: F) -> Result<TailFit<F>, StatsError> {
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let tail = tail_of(sample, xmin);
    if tail.len() < MIN_TAIL {
        return Err(StatsError::TooFewPoints {
            needed: MIN_TAIL,
            got: tail.len(),
        });
    }
    if xmin <= F::zero() && family != TailFamily::Exponential {
        return Err(StatsError::NonPositiveValue);
    }
    match family {
        TailFamily::PowerLaw => fit_power_law(&tail, xmin),
        TailFamily::Exponential => fit_exponential(&tail, xmin),
        TailFamily::LogNormal => fit_lognormal(&tail, xmin),
        TailFamily::TruncatedPowerLaw => fit_truncated_power_law(&tail, xmin),
    }
}

/// Closed-form power-law exponent `1 + n / Σ ln(x / xmin)`.
pub fn power_law_alpha<F: Real>(tail: &[F], xmin: F) -> Result<F, StatsError> {
    let s: F = tail.iter().map(|&x| (x / xmin).ln()).sum();
    if s <= F::zero() {
        return Err(StatsError::DegenerateSample);
    }
    Ok(F::one() + F::of_usize(tail.len()) / s)
}

fn power_law_pointwise<F: Real>(tail: &[F], xmin: F, alpha: F) -> Vec<F> {
    let norm = ((alpha - F::one()) / xmin).ln();
    tail.iter().map(|&x| norm - alpha * (x / xmin).ln()).collect()
}

fn fit_power_law<F: Real>(tail: &[F], xmin: F) -> Result<TailFit<F>, StatsError> {
    let alpha = power_law_alpha(tail, xmin)?;
    let ll = power_law_pointwise(tail, xmin, alpha);
    Ok(TailFit::new(TailModel::PowerLaw { alpha }, xmin, ll))
}

fn fit_exponential<F: Real>(tail: &[F], xmin: F) -> Result<TailFit<F>, StatsError> {
    let n = F::of_usize(tail.len());
    let excess = tail.iter().map(|&x| x - xmin).sum::<F>() / n;
    if excess <= F::zero() {
        return Err(StatsError::DegenerateSample);
    }
    let lambda = F::one() / excess;
    let ll = tail.iter().map(|&x| lambda.ln() - lambda * (x - xmin)).collect();
    Ok(TailFit::new(TailModel::Exponential { lambda }, xmin, ll))
}

fn fit_lognormal<F: Real>(tail: &[F], xmin: F) -> Result<TailFit<F>, StatsError> {
    let logs: Vec<f64> = tail.iter().map(|x| x.f64().ln()).collect();
    let n = logs.len() as f64;
    let s1: f64 = logs.iter().sum();
    let s2: f64 = logs.iter().map(|l| l * l).sum();
    let ln_xmin = xmin.f64().ln();
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(1e-12);
    if var <= 1e-12 {
        return Err(StatsError::DegenerateSample);
    }
    let neg_ll = |p: &[f64]| -> f64 {
        let (mu, sigma) = (p[0], p[1].exp());
        let quad = (s2 - 2.0 * mu * s1 + n * mu * mu) / (2.0 * sigma * sigma);
        let norm = ln_normal_sf((ln_xmin - mu) / sigma);
        s1 + n * sigma.ln() + n * 0.918_938_533_204_672_8 + quad + n * norm
    };
    let sd = var.sqrt();
    let m = nelder_mead(neg_ll, &[mean, sd.ln()], &[0.5 * sd, 0.3], 1e-15, 20_000);
    let (mu, sigma) = (m.point[0], m.point[1].exp());
    let norm = ln_normal_sf((ln_xmin - mu) / sigma);
    let ll = logs
        .iter()
        .map(|&l| {
            let z = (l - mu) / sigma;
            F::of(-l - sigma.ln() - 0.918_938_533_204_672_8 - 0.5 * z * z - norm)
        })
        .collect();
    Ok(TailFit::new(
        TailModel::LogNormal {
            mu: F::of(mu),
            sigma: F::of(sigma),
        },
        xmin,
        ll,
    ))
}

/// `ln ∫_xmin^∞ x^(-alpha) e^(-lambda x) dx`; `-inf`-safe for the pure power
/// law (`lambda = 0`), infinite when the density is not normalizable.
pub fn truncated_power_law_ln_norm(alpha: f64, lambda: f64, xmin: f64) -> f64 {
    if lambda <= 0.0 {
        if alpha > 1.0 {
            (1.0 - alpha) * xmin.ln() - (alpha - 1.0).ln()
        } else {
            f64::INFINITY
        }
    } else {
        (alpha - 1.0) * lambda.ln() + ln_upper_gamma(1.0 - alpha, lambda * xmin)
    }
}

/// Total truncated power-law log-likelihood of `tail`.
pub fn truncated_power_law_loglik<F: Real>(tail: &[F], xmin: F, alpha: F, lambda: F) -> F {
    let s1: f64 = tail.iter().map(|x| x.f64().ln()).sum();
    let s2: f64 = tail.iter().map(|x| x.f64()).sum();
    let n = tail.len() as f64;
    let (a, l) = (alpha.f64(), lambda.f64());
    F::of(-a * s1 - l * s2 - n * truncated_power_law_ln_norm(a, l, xmin.f64()))
}

fn fit_truncated_power_law<F: Real>(tail: &[F], xmin: F) -> Result<TailFit<F>, StatsError> {
    let x0 = xmin.f64();
    let n = tail.len() as f64;
    let s1: f64 = tail.iter().map(|x| x.f64().ln()).sum();
    let s2: f64 = tail.iter().map(|x| x.f64()).sum();
    let excess = s2 / n - x0;
    if excess <= 0.0 {
        return Err(StatsError::DegenerateSample);
    }
    let alpha_pl = power_law_alpha(tail, xmin)?.f64();

    // Work in the dimensionless cutoff c = lambda * xmin.
    let loglik = |alpha: f64, c: f64| -> f64 {
        let lambda = c / x0;
        let v = -alpha * s1 - lambda * s2 - n * truncated_power_law_ln_norm(alpha, lambda, x0);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let (alpha_lo, alpha_hi) = (-5.0, (3.0 * alpha_pl).max(10.0));
    let c_hi = 50.0 * x0 / excess;
    let profile = |c: f64| golden_max(|a| loglik(a, c), alpha_lo, alpha_hi, 1e-11);
    let (c, _) = golden_max(|c| profile(c).1, 0.0, c_hi, 1e-12 * c_hi.max(1.0));
    let (alpha, best) = profile(c);

    let at_bound = |v: f64, lo: f64, hi: f64| (v - lo).abs() < 1e-6 || (hi - v).abs() < 1e-6;
    if !best.is_finite() || at_bound(alpha, alpha_lo, alpha_hi) || (c_hi - c).abs() < 1e-9 * c_hi {
        return Err(StatsError::NonConvergence {
            family: TailFamily::TruncatedPowerLaw,
        });
    }
    // A boundary optimum at c = 0 is the pure power law; report it exactly.
    let (alpha, lambda) = if c == 0.0 || loglik(alpha_pl, 0.0) >= best {
        (alpha_pl, 0.0)
    } else {
        (alpha, c / x0)
    };
    let ln_norm = truncated_power_law_ln_norm(alpha, lambda, x0);
    let ll = tail
        .iter()
        .map(|x| {
            let x = x.f64();
            F::of(-alpha * x.ln() - lambda * x - ln_norm)
        })
        .collect();
    Ok(TailFit::new(
        TailModel::TruncatedPowerLaw {
            alpha: F::of(alpha),
            lambda: F::of(lambda),
        },
        xmin,
        ll,
    ))
}

/// Kolmogorov-Smirnov distance between the sorted tail and its power-law fit.
pub fn power_law_ks_distance<F: Real>(sorted_tail: &[F], xmin: F, alpha: F) -> F {
    let logs: Vec<F> = sorted_tail.iter().map(|x| x.ln()).collect();
    ks_distance_bounded(&logs, xmin.ln(), alpha, F::infinity())
}

/// KS distance on log-values, giving up as soon as the running maximum
/// exceeds `bound`.
fn ks_distance_bounded<F: Real>(sorted_logs: &[F], ln_xmin: F, alpha: F, bound: F) -> F {
    let n = F::of_usize(sorted_logs.len());
    let expo = F::one() - alpha;
    let mut d = F::zero();
    for (i, &lx) in sorted_logs.iter().enumerate() {
        let model = F::one() - (expo * (lx - ln_xmin)).exp();
        let lo = F::of_usize(i) / n;
        let hi = F::of_usize(i + 1) / n;
        d = d.max((model - lo).abs()).max((hi - model).abs());
        if d >= bound {
            return d;
        }
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XminChoice<F> {
    pub xmin: F,
    pub ks_distance: F,
    pub alpha: F,
    pub n_tail: usize,
}

/// Picks the power-law starting point minimizing the KS distance over the
/// unique sample values (keeping at least [`MIN_TAIL`] points in the tail).
pub fn select_xmin<F: Real>(sample: &[F]) -> Result<F, StatsError> {
    select_xmin_detailed(sample).map(|c| c.xmin)
}

pub fn select_xmin_detailed<F: Real>(sample: &[F]) -> Result<XminChoice<F>, StatsError> {
    if sample.len() < MIN_XMIN_SAMPLE {
        return Err(StatsError::TooFewPoints {
            needed: MIN_XMIN_SAMPLE,
            got: sample.len(),
        });
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    if sample.iter().any(|&x| x <= F::zero()) {
        return Err(StatsError::NonPositiveValue);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let logs: Vec<F> = sorted.iter().map(|x| x.ln()).collect();
    // suffix[i] = Σ_{j >= i} ln x_j
    let mut suffix = vec![F::zero(); n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + logs[i];
    }

    let mut best: Option<XminChoice<F>> = None;
    let mut i = 0;
    while i < n {
        let xmin = sorted[i];
        let n_tail = n - i;
        if n_tail < MIN_TAIL {
            break;
        }
        let s = suffix[i] - F::of_usize(n_tail) * xmin.ln();
        if sorted[n - 1] > xmin && s > F::zero() {
            let alpha = F::one() + F::of_usize(n_tail) / s;
            let bound = best.map_or(F::infinity(), |b| b.ks_distance);
            let d = ks_distance_bounded(&logs[i..], logs[i], alpha, bound);
            if d < bound {
                best = Some(XminChoice {
                    xmin,
                    ks_distance: d,
                    alpha,
                    n_tail,
                });
            }
        }
        while i < n && sorted[i] == xmin {
            i += 1;
        }
    }
    best.ok_or(StatsError::DegenerateSample)
}
