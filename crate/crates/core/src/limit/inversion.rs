//! Damped Newton solvers for functional inverses and Stieltjes inversion.

use num_complex::Complex64;

use super::field::AnalyticField;
use crate::error::{check_off_axis, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100 }
    }
}

/// Solve `F(z) = 0` from `start`, where `eval` returns `(F, F')`.
///
/// Each Newton step is halved until the iterate is `admissible` and the
/// residual does not grow. Converged when `|F| <= tol * scale`.
pub fn damped_newton<E, A>(
    eval: E,
    admissible: A,
    start: Complex64,
    scale: f64,
    opts: NewtonOptions,
) -> Result<Complex64>
where
    E: Fn(Complex64) -> Result<(Complex64, Complex64)>,
    A: Fn(Complex64) -> bool,
{
    let tol = opts.tol * scale.max(1.0);
    let mut z = start;
    let (mut f, mut df) = eval(z)?;
    for iter in 0..opts.max_iter {
        if f.norm() <= tol {
            return Ok(z);
        }
        let step = f / df;
        if !step.is_finite() {
            return Err(Error::NewtonFailure { last: z, residual: f.norm(), iterations: iter });
        }
        let mut lambda = 1.0;
        let accepted = loop {
            let cand = z - lambda * step;
            if admissible(cand) {
                if let Ok((fc, dfc)) = eval(cand) {
                    if fc.is_finite() && (fc.norm() < f.norm() || fc.norm() <= tol) {
                        break Some((cand, fc, dfc));
                    }
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                break None;
            }
        };
        match accepted {
            Some((cand, fc, dfc)) => {
                let moved = (cand - z).norm();
                z = cand;
                f = fc;
                df = dfc;
                if moved <= 1e-15 * z.norm().max(1.0) && f.norm() > tol {
                    // Stalled at rounding level without meeting the tolerance.
                    return Err(Error::NewtonFailure { last: z, residual: f.norm(), iterations: iter + 1 });
                }
            }
            None => {
                return Err(Error::NewtonFailure { last: z, residual: f.norm(), iterations: iter + 1 });
            }
        }
    }
    if f.norm() <= tol {
        Ok(z)
    } else {
        Err(Error::NewtonFailure { last: z, residual: f.norm(), iterations: opts.max_iter })
    }
}

/// Functional inverse `m^{-1}(u)` of a Stieltjes transform.
///
/// Newton from `-1/u` (the large-`z` asymptotics); on failure, continuation
/// along `s u`, `s` growing from `1e-3` to `1`, each stage seeded by the
/// previous solution.
pub fn stieltjes_inverse<F: AnalyticField + ?Sized>(m: &F, u: Complex64) -> Result<Complex64> {
    check_off_axis(u)?;
    let opts = NewtonOptions::default();
    let solve = |target: Complex64, start: Complex64| {
        damped_newton(
            |z| {
                let j = m.jet(z)?;
                Ok((j.value - target, j.d1))
            },
            |z| z.im * target.im > 0.0,
            start,
            target.norm(),
            opts,
        )
    };
    if let Ok(z) = solve(u, -u.inv()) {
        return Ok(z);
    }
    let mut s = 1e-3;
    let mut z = solve(u * s, -(u * s).inv())?;
    let mut ds = 0.05;
    while s < 1.0 {
        let next = (s + ds).min(1.0);
        match solve(u * next, z) {
            Ok(zn) => {
                z = zn;
                s = next;
                ds = (ds * 1.5).min(0.25);
            }
            Err(e) => {
                ds *= 0.5;
                if ds < 1e-8 {
                    return Err(e);
                }
            }
        }
    }
    Ok(z)
}

/// Smoothed density `Im m(x + i eta) / pi`.
pub fn stieltjes_inversion<F: AnalyticField + ?Sized>(m: &F, x: f64, eta: f64) -> Result<f64> {
    Ok(m.value(Complex64::new(x, eta))?.im / std::f64::consts::PI)
}

/// Default smoothing `10 / grid_len` for a grid on an interval of unit scale.
pub fn default_eta(grid_len: usize) -> f64 {
    10.0 / grid_len as f64
}
