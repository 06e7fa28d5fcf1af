//! The family `nu_t` with quantized R-transform `t e^z`.
//!
//! Bulk density on `[(1 - sqrt t)^2, (1 + sqrt t)^2]` is
//! `arccot((x + t - 1) / sqrt(4xt - (x + t - 1)^2)) / pi`; for `t <= 1`
//! there is an additional plateau of height one on `[0, (1 - sqrt t)^2)`.
//! Quadrature uses `x = 1 + t - 2 sqrt(t) cos(phi)`, under which the bulk
//! integrand is smooth on `[0, pi]`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::field::{AnalyticField, Jet};
use super::quadrature::{composite_nodes, DEFAULT_NODES};
use crate::error::{check_off_axis, Error, Result};

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("nu_t needs t > 0, got {t}")))
    }
}

/// Support edges `((1 - sqrt t)^2, (1 + sqrt t)^2)` of the bulk.
pub fn nu_t_edges(t: f64) -> (f64, f64) {
    let r = t.sqrt();
    ((1.0 - r).powi(2), (1.0 + r).powi(2))
}

/// Length of the unit-density plateau `[0, (1 - sqrt t)^2)`, zero for `t > 1`.
pub fn nu_t_plateau(t: f64) -> f64 {
    if t <= 1.0 {
        (1.0 - t.sqrt()).powi(2)
    } else {
        0.0
    }
}

pub fn nu_t_density(x: f64, t: f64) -> f64 {
    let (lo, hi) = nu_t_edges(t);
    if x > hi || x < 0.0 {
        return 0.0;
    }
    if x < lo {
        return if t <= 1.0 { 1.0 } else { 0.0 };
    }
    let c = x + t - 1.0;
    let disc = (4.0 * x * t - c * c).max(0.0);
    // arccot(c / s) with values in (0, pi).
    disc.sqrt().atan2(c) / PI
}

/// `nu_t` with its Stieltjes transform by quadrature.
#[derive(Debug, Clone)]
pub struct NuField {
    t: f64,
    /// Bulk nodes `(x, weight * density)`.
    nodes: Vec<(f64, f64)>,
}

impl NuField {
    pub fn new(t: f64) -> Result<Self> {
        Self::with_nodes(t, DEFAULT_NODES)
    }

    pub fn with_nodes(t: f64, nodes: usize) -> Result<Self> {
        check_t(t)?;
        let r = t.sqrt();
        let nodes = composite_nodes(0.0, PI, nodes)
            .into_iter()
            .map(|(phi, w)| {
                let (s, c) = phi.sin_cos();
                let x = 1.0 + t - 2.0 * r * c;
                // density via the same angle: 4xt - (x + t - 1)^2 = 4 t sin^2 phi.
                let dens = (2.0 * r * s).atan2(2.0 * t - 2.0 * r * c) / PI;
                (x, w * dens * 2.0 * r * s)
            })
            .collect();
        Ok(Self { t, nodes })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Total mass from plateau plus bulk quadrature.
    pub fn mass(&self) -> f64 {
        nu_t_plateau(self.t) + self.nodes.iter().map(|(_, w)| w).sum::<f64>()
    }
}

impl AnalyticField for NuField {
    fn jet(&self, z: Complex64) -> Result<Jet> {
        check_off_axis(z)?;
        let zero = Complex64::new(0.0, 0.0);
        let mut j = Jet { value: zero, d1: zero, d2: zero, d3: zero };
        let l = nu_t_plateau(self.t);
        if l > 0.0 {
            // int_0^l dx / (x - z) and its z-derivatives in closed form.
            let (ra, rb) = (z.inv(), (z - l).inv());
            j.value = (l - z).ln() - (-z).ln();
            j.d1 = rb - ra;
            j.d2 = ra * ra - rb * rb;
            j.d3 = 2.0 * (rb * rb * rb - ra * ra * ra);
        }
        for &(x, w) in &self.nodes {
            let r = (x - z).inv();
            let r2 = r * r;
            j.value += w * r;
            j.d1 += w * r2;
            j.d2 += 2.0 * w * r2 * r;
            j.d3 += 6.0 * w * r2 * r2;
        }
        Ok(j)
    }
}

/// `|z e^{2m} + (1 - t - z) e^m + t|` with `m` the quadrature transform of `nu_t`.
pub fn nu_t_stieltjes_check(z: Complex64, t: f64) -> Result<f64> {
    let m = NuField::new(t)?.value(z)?;
    Ok(nu_quadratic_residual(z, t, m))
}

pub fn nu_quadratic_residual(z: Complex64, t: f64, m: Complex64) -> f64 {
    let e = m.exp();
    (z * e * e + (1.0 - t - z) * e + t).norm()
}
