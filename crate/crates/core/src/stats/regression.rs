//! Least-squares fits: low-degree polynomials and log-log power laws.

use serde::{Deserialize, Serialize};

use super::special::student_t_two_sided;
use super::{FitResult, StatsError};
use crate::Real;

/// Ordinary least squares of `ys` on `1, x, .., x^degree` (degree 1 or 2)
/// with Gaussian pointwise log-likelihoods and AIC. `x` is centered and
/// scaled internally; coefficients are reported in the original basis,
/// constant term first.
pub fn fit_polynomial<F: Real>(xs: &[F], ys: &[F], degree: usize) -> Result<FitResult<F>, StatsError> {
    if !(1..=2).contains(&degree) {
        return Err(StatsError::UnsupportedDegree(degree));
    }
    if xs.len() != ys.len() {
        return Err(StatsError::MismatchedSupport);
    }
    let n = xs.len();
    if n < degree + 2 {
        return Err(StatsError::TooFewPoints {
            needed: degree + 2,
            got: n,
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let x: Vec<f64> = xs.iter().map(|v| v.f64()).collect();
    let y: Vec<f64> = ys.iter().map(|v| v.f64()).collect();
    let nf = n as f64;
    let center = x.iter().sum::<f64>() / nf;
    let scale = (x.iter().map(|v| (v - center).powi(2)).sum::<f64>() / nf).sqrt();
    if scale == 0.0 {
        return Err(StatsError::Singular);
    }
    let k = degree + 1;
    let design: Vec<Vec<f64>> = x
        .iter()
        .map(|v| {
            let u = (v - center) / scale;
            (0..k).map(|j| u.powi(j as i32)).collect()
        })
        .collect();
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for (row, &yi) in design.iter().zip(&y) {
        for a in 0..k {
            xty[a] += row[a] * yi;
            for b in 0..k {
                xtx[a][b] += row[a] * row[b];
            }
        }
    }
    let inverse = invert(&xtx).ok_or(StatsError::Singular)?;
    let beta: Vec<f64> = (0..k)
        .map(|a| (0..k).map(|b| inverse[a][b] * xty[b]).sum())
        .collect();

    let residuals: Vec<f64> = design
        .iter()
        .zip(&y)
        .map(|(row, yi)| yi - row.iter().zip(&beta).map(|(r, b)| r * b).sum::<f64>())
        .collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let rms_y = (y.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();
    // Exact fits would give an infinite likelihood; floor sigma far below any
    // meaningful noise level.
    let sigma_floor = (rms_y * f64::EPSILON.sqrt() * 0.01).max(f64::MIN_POSITIVE);
    let var = (rss / nf).max(sigma_floor * sigma_floor);
    let half_ln = 0.5 * (2.0 * std::f64::consts::PI * var).ln();
    let pointwise: Vec<F> = residuals
        .iter()
        .map(|r| F::of(-half_ln - r * r / (2.0 * var)))
        .collect();

    // Back to the original basis: u = (x - c) / s.
    let (c, s) = (center, scale);
    let coefficients = match degree {
        1 => vec![beta[0] - beta[1] * c / s, beta[1] / s],
        _ => vec![
            beta[0] - beta[1] * c / s + beta[2] * c * c / (s * s),
            beta[1] / s - 2.0 * beta[2] * c / (s * s),
            beta[2] / (s * s),
        ],
    };
    // Coefficient t-tests in the scaled basis; only the leading (highest
    // degree) p-value is basis independent.
    let dof = nf - k as f64;
    let s2 = if dof > 0.0 { rss / dof } else { f64::NAN };
    let p_values = (0..k)
        .map(|j| {
            let se = (s2 * inverse[j][j]).sqrt();
            let t = if se > 0.0 {
                beta[j] / se
            } else if beta[j] == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            F::of(student_t_two_sided(t, dof))
        })
        .collect();

    let ll: f64 = pointwise.iter().map(|v| v.f64()).sum();
    let param_count = k + 1;
    Ok(FitResult {
        coefficients: coefficients.into_iter().map(F::of).collect(),
        p_values,
        residuals: residuals.into_iter().map(F::of).collect(),
        pointwise_loglik: pointwise,
        param_count,
        aic: F::of(2.0 * param_count as f64 - 2.0 * ll),
    })
}

fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let k = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let norm = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for col in 0..k {
        let pivot = (col..k).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() <= 1e-12 * norm {
            return None;
        }
        a.swap(col, pivot);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for row in 0..k {
            if row != col {
                let f = a[row][col];
                if f != 0.0 {
                    for j in 0..2 * k {
                        a[row][j] -= f * a[col][j];
                    }
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[k..].to_vec()).collect())
}

/// Power-law fit `value = prefactor · tau^(2H)` in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit<F> {
    pub prefactor: F,
    pub slope: F,
    pub hurst: F,
    /// Two-sided t-test p-value of the slope.
    pub p_value: F,
    pub n_used: usize,
}

/// Fewest points `fit_loglog_slope` accepts (before the largest-tau point is dropped).
pub const MIN_LOGLOG_POINTS: usize = 5;

/// OLS of `ln(values)` on `ln(taus)` after removing the point with the
/// largest `tau`.
pub fn fit_loglog_slope<F: Real>(taus: &[F], values: &[F]) -> Result<LogLogFit<F>, StatsError> {
    if taus.len() != values.len() {
        return Err(StatsError::MismatchedSupport);
    }
    if taus.len() < MIN_LOGLOG_POINTS {
        return Err(StatsError::TooFewPoints {
            needed: MIN_LOGLOG_POINTS,
            got: taus.len(),
        });
    }
    if taus.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    if taus.iter().chain(values).any(|&v| v <= F::zero()) {
        return Err(StatsError::NonPositiveValue);
    }
    let drop = (0..taus.len())
        .max_by(|&i, &j| taus[i].partial_cmp(&taus[j]).unwrap())
        .unwrap();
    let pts: Vec<(f64, f64)> = taus
        .iter()
        .zip(values)
        .enumerate()
        .filter(|(i, _)| *i != drop)
        .map(|(_, (t, v))| (t.f64().ln(), v.f64().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StatsError::Singular);
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let dof = n - 2.0;
    let se = (rss / dof / sxx).sqrt();
    // Residuals at rounding level count as an exact fit.
    let exact = rss <= 1e-24 * (1.0 + pts.iter().map(|p| p.1 * p.1).sum::<f64>());
    let p_value = if slope.abs() < 1e-14 && exact {
        1.0
    } else if exact {
        0.0
    } else {
        student_t_two_sided(slope / se, dof)
    };
    Ok(LogLogFit {
        prefactor: F::of(intercept.exp()),
        slope: F::of(slope),
        hurst: F::of(slope / 2.0),
        p_value: F::of(p_value),
        n_used: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let fit = fit_polynomial(&xs, &ys, 1).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
        assert_eq!(fit.param_count, 3);
    }

    #[test]
    fn exact_parabola() {
        let xs: Vec<f64> = (0..30).map(|i| f64::from(i) * 0.5 + 100.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 * x * x - 2.0 * x + 7.0).collect();
        let fit = fit_polynomial(&xs, &ys, 2).unwrap();
        for (got, want) in fit.coefficients.iter().zip([7.0, -2.0, 0.3]) {
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0) * 1e3, "{got} vs {want}");
        }
        let rel = |got: f64, want: f64| ((got - want) / want).abs();
        assert!(rel(fit.coefficients[2], 0.3) < 1e-9);
    }

    #[test]
    fn aic_definition() {
        let xs: Vec<f64> = (0..50).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x + (x * 1.7).sin()).collect();
        let fit = fit_polynomial(&xs, &ys, 2).unwrap();
        let ll: f64 = fit.pointwise_loglik.iter().sum();
        assert!((fit.aic - (2.0 * 4.0 - 2.0 * ll)).abs() < 1e-9);
    }

    #[test]
    fn collinear_design_is_singular() {
        let xs = vec![3.0f64; 10];
        let ys: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(fit_polynomial(&xs, &ys, 1).unwrap_err(), StatsError::Singular);
        let xs: Vec<f64> = (0..10).map(|i| f64::from(i % 2)).collect();
        assert_eq!(fit_polynomial(&xs, &ys, 2).unwrap_err(), StatsError::Singular);
        assert!(matches!(
            fit_polynomial(&xs[..3], &ys[..3], 2),
            Err(StatsError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn loglog_exact_power_laws() {
        let taus: Vec<f64> = (1..=30).map(|k| f64::from(k) - 0.5).collect();
        for (exponent, hurst) in [(0.9, 0.45), (0.46, 0.23), (1.0, 0.5)] {
            let values: Vec<f64> = taus.iter().map(|t| 3.0 * t.powf(exponent)).collect();
            let fit = fit_loglog_slope(&taus, &values).unwrap();
            assert!((fit.hurst - hurst).abs() < 1e-9);
            assert!((fit.prefactor - 3.0).abs() < 1e-9);
            assert!(fit.p_value < 1e-12);
            assert_eq!(fit.n_used, 29);
        }
    }

    #[test]
    fn loglog_constant_values() {
        let taus: Vec<f64> = (1..=10).map(f64::from).collect();
        let fit = fit_loglog_slope(&taus, &[2.0; 10]).unwrap();
        assert_eq!(fit.hurst, 0.0);
        assert_eq!(fit.p_value, 1.0);
        // noisy constants: no significant slope
        let values: Vec<f64> = (0..10).map(|i| 2.0 + 0.01 * ((i * 7919) % 13) as f64 / 13.0).collect();
        let fit = fit_loglog_slope(&taus, &values).unwrap();
        assert!(fit.hurst.abs() < 0.01);
        assert!(fit.p_value > 0.05);
    }

    #[test]
    fn loglog_rejects_non_positive() {
        let taus: Vec<f64> = (1..=6).map(f64::from).collect();
        let mut values = vec![1.0; 6];
        values[2] = 0.0;
        assert_eq!(fit_loglog_slope(&taus, &values), Err(StatsError::NonPositiveValue));
        assert!(matches!(
            fit_loglog_slope(&taus[..4], &values[..4]),
            Err(StatsError::TooFewPoints { .. })
        ));
    }
}
