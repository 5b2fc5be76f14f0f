//! Derivative-free optimizers used by the numerical tail fits.

use crate::Real;

/// Maximizes a unimodal function on `[lo, hi]` by golden-section search.
/// Returns `(argmax, max)`.
pub fn golden_max<F: Real>(mut f: impl FnMut(F) -> F, lo: F, hi: F, x_tol: F) -> (F, F) {
    let inv_phi = F::of(0.618_033_988_749_894_8);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= x_tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // The endpoints are candidates too: the optimum may sit on the boundary.
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct Minimum<F> {
    pub point: Vec<F>,
    pub value: F,
    pub converged: bool,
}

/// Nelder-Mead simplex minimization from `start` with initial step `step`.
pub fn nelder_mead<F: Real>(
    mut f: impl FnMut(&[F]) -> F,
    start: &[F],
    step: &[F],
    f_tol: F,
    max_iter: usize,
) -> Minimum<F> {
    let n = start.len();
    let half = F::of(0.5);
    let two = F::of(2.0);
    let mut simplex: Vec<Vec<F>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] = p[i] + step[i];
        simplex.push(p);
    }
    let mut values: Vec<F> = simplex.iter().map(|p| sanitize(f(p))).collect();
    let mut converged = false;

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = (values[n] - values[0]).abs();
        if spread <= f_tol * (F::one() + values[0].abs()) {
            converged = true;
            break;
        }

        let centroid: Vec<F> = (0..n)
            .map(|k| simplex[..n].iter().map(|p| p[k]).sum::<F>() / F::of_usize(n))
            .collect();
        let along = |t: F| -> Vec<F> {
            (0..n)
                .map(|k| centroid[k] + t * (simplex[n][k] - centroid[k]))
                .collect()
        };

        let reflected = along(-F::one());
        let fr = sanitize(f(&reflected));
        if fr < values[0] {
            let expanded = along(-two);
            let fe = sanitize(f(&expanded));
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let p = along(-half);
            let v = sanitize(f(&p));
            (p, v)
        } else {
            let p = along(half);
            let v = sanitize(f(&p));
            (p, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            let p: Vec<F> = (0..n)
                .map(|k| simplex[0][k] + half * (simplex[i][k] - simplex[0][k]))
                .collect();
            values[i] = sanitize(f(&p));
            simplex[i] = p;
        }
    }

    let best = (0..=n)
        .min_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap())
        .unwrap();
    Minimum {
        point: simplex[best].clone(),
        value: values[best],
        converged,
    }
}

fn sanitize<F: Real>(v: F) -> F {
    if v.is_nan() {
        F::infinity()
    } else {
        v
    }
}
