//! Scalar root finding, one-dimensional maximization, simplex minimization
//! and a few stabilized reductions shared by the estimators.

use crate::error::{Error, Result};

/// Brent root-finding settings.
#[derive(Clone, Copy, Debug)]
pub struct BrentOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BrentOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200 }
    }
}

/// Brent's method on `[lo, hi]`. Requires a sign change across the bracket.
pub fn brent_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, opts: BrentOptions) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Domain(format!("non-finite function value on bracket [{lo}, {hi}]")));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoRoot { lo, hi });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..opts.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * opts.tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::Domain(format!("non-finite function value at {b}")));
        }
    }
    Err(Error::NoConvergence(format!("brent root on [{lo}, {hi}] after {} iterations", opts.max_iter)))
}

/// Golden-section search for the maximizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // the loop is bounded by the bracket shrinking geometrically
    for _ in 0..400 {
        if (b - a).abs() <= tol {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    0.5 * (a + b)
}

/// Nelder-Mead settings.
#[derive(Clone, Copy, Debug)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_evals: usize,
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { initial_step: 0.1, f_tol: 1e-13, x_tol: 1e-10, max_evals: 20_000, restarts: 3 }
    }
}

/// Outcome of a simplex minimization.
#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder-Mead minimization of `f` from `x0`, restarting from the best vertex
/// `opts.restarts` times to escape premature collapse of the simplex.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let mut best = x0.to_vec();
    let mut best_f = f(x0);
    let mut evals = 1;
    let mut converged = false;
    for _ in 0..=opts.restarts {
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for i in 0..n {
            let mut v = best.clone();
            v[i] += opts.initial_step * (1.0 + v[i].abs()).min(10.0);
            simplex.push(v);
        }
        let mut fv: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        evals += n;
        converged = false;
        while evals < opts.max_evals {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            fv = order.iter().map(|&i| fv[i]).collect();
            let spread = (fv[n] - fv[0]).abs();
            let size = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(simplex[0].iter()).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= opts.f_tol * (1.0 + fv[0].abs()) && size <= opts.x_tol {
                converged = true;
                break;
            }
            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(simplex[n].iter()).map(|(c, w)| c + t * (c - w)).collect()
            };
            let xr = along(1.0);
            let fr = f(&xr);
            evals += 1;
            if fr < fv[0] {
                let xe = along(2.0);
                let fe = f(&xe);
                evals += 1;
                if fe < fr {
                    simplex[n] = xe;
                    fv[n] = fe;
                } else {
                    simplex[n] = xr;
                    fv[n] = fr;
                }
            } else if fr < fv[n - 1] {
                simplex[n] = xr;
                fv[n] = fr;
            } else {
                let (xc, fc) = if fr < fv[n] {
                    let xc = along(0.5);
                    let fc = f(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-0.5);
                    let fc = f(&xc);
                    (xc, fc)
                };
                evals += 1;
                if fc < fv[n].min(fr) {
                    simplex[n] = xc;
                    fv[n] = fc;
                } else {
                    for i in 1..=n {
                        let shrunk: Vec<f64> =
                            simplex[0].iter().zip(simplex[i].iter()).map(|(b, v)| b + 0.5 * (v - b)).collect();
                        fv[i] = f(&shrunk);
                        simplex[i] = shrunk;
                    }
                    evals += n;
                }
            }
        }
        let (ib, fb) = fv.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        if fb <= best_f {
            best_f = fb;
            best = simplex[ib].clone();
        }
        if evals >= opts.max_evals {
            break;
        }
    }
    Minimum { x: best, value: best_f, evals, converged }
}

/// `log(sum(exp(xs)))` with max-shift; `-inf` for empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log(mean(exp(xs)))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with `n - 1` denominator.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Linear-interpolation quantile (type 7) of unsorted data.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let n = v.len();
    if n == 1 {
        return v[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
