//! Characteristic lines `z_t(z) = z + t exp(-m_0(z))` of the complex
//! Burgers equation and the limit transform `m_t(z_t(z)) = m_0(z)`.

use num_complex::Complex64;

use super::field::{AnalyticField, Jet};
use super::inversion::{damped_newton, NewtonOptions};
use super::measure::MeasureRep;
use crate::error::{check_off_axis, Error, Result};

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time must be nonnegative, got {t}")))
    }
}

/// `-Im z / Im exp(-m_0(z))`, or `+inf` when that ratio is not positive
/// (the line never reaches the axis).
pub fn lifetime<F: AnalyticField + ?Sized>(z: Complex64, m0: &F) -> Result<f64> {
    let e = (-m0.value(z)?).exp();
    let ratio = -z.im / e.im;
    Ok(if ratio > 0.0 { ratio } else { f64::INFINITY })
}

pub fn characteristic_forward<F: AnalyticField + ?Sized>(z: Complex64, t: f64, m0: &F) -> Result<Complex64> {
    check_off_axis(z)?;
    check_time(t)?;
    let m = m0.value(z)?;
    let e = (-m).exp();
    let life = {
        let r = -z.im / e.im;
        if r > 0.0 { r } else { f64::INFINITY }
    };
    if t >= life {
        return Err(Error::LifetimeExceeded { z, t, lifetime: life });
    }
    Ok(z + t * e)
}

/// `z` lies in `Omega_t`: `int dQ(mu_0)(x) / |x - z|^2 < 1/t`, evaluated as
/// `Im(1 - exp(-m_0(z))) / Im z`.
pub fn in_omega<F: AnalyticField + ?Sized>(z: Complex64, t: f64, m0: &F) -> Result<bool> {
    check_off_axis(z)?;
    if t == 0.0 {
        return Ok(true);
    }
    let q = 1.0 - (-m0.value(z)?).exp();
    Ok(q.im / z.im < 1.0 / t)
}

/// Membership in `Omega_t` given the Markov–Krein image `Q(mu_0)` directly.
pub fn omega_membership(z: Complex64, t: f64, q_mu0: &MeasureRep) -> Result<bool> {
    check_off_axis(z)?;
    if t == 0.0 {
        return Ok(true);
    }
    let m = q_mu0.stieltjes_jet(z)?.value;
    Ok(m.im / z.im < 1.0 / t)
}

fn solve_at<F: AnalyticField + ?Sized>(w: Complex64, t: f64, m0: &F, start: Complex64) -> Result<Complex64> {
    let z = damped_newton(
        |z| {
            let j = m0.jet(z)?;
            let e = (-j.value).exp();
            Ok((z + t * e - w, 1.0 - t * j.d1 * e))
        },
        |z| z.im * w.im > 0.0 && in_omega(z, t, m0).unwrap_or(false),
        start,
        w.norm(),
        NewtonOptions::default(),
    )?;
    Ok(z)
}

/// The unique `z` in `Omega_t` with `z_t(z) = w`.
///
/// Damped Newton from `z = w`; if that fails, continuation in time from
/// `s = 0` (where the answer is `w`) up to `t`.
pub fn characteristic_inverse<F: AnalyticField + ?Sized>(w: Complex64, t: f64, m0: &F) -> Result<Complex64> {
    check_off_axis(w)?;
    check_time(t)?;
    if t == 0.0 {
        return Ok(w);
    }
    if let Ok(z) = solve_at(w, t, m0, w) {
        return Ok(z);
    }
    let mut s = 0.0;
    let mut z = w;
    let mut ds = t / 8.0;
    while s < t {
        let next = (s + ds).min(t);
        match solve_at(w, next, m0, z) {
            Ok(zn) => {
                z = zn;
                s = next;
                ds *= 1.5;
            }
            Err(e) => {
                ds *= 0.5;
                if ds < t * 1e-10 {
                    return Err(e);
                }
            }
        }
    }
    Ok(z)
}

/// Derivatives of `z_t` in `z` together with the jet of `m_0`, all at `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicJet {
    pub z: Complex64,
    pub t: f64,
    pub m0: Jet,
    /// `exp(-m_0(z))`, the constant velocity of the line.
    pub e: Complex64,
    /// `z_t(z)`.
    pub zt: Complex64,
    /// `1 - t m_0' e`.
    pub d1: Complex64,
    pub d2: Complex64,
    pub d3: Complex64,
}

impl CharacteristicJet {
    pub fn new(z: Complex64, t: f64, m0: Jet) -> Self {
        let e = (-m0.value).exp();
        let (a1, a2, a3) = (m0.d1, m0.d2, m0.d3);
        Self {
            z,
            t,
            m0,
            e,
            zt: z + t * e,
            d1: 1.0 - t * a1 * e,
            d2: -t * e * (a2 - a1 * a1),
            d3: -t * e * (a3 - 3.0 * a1 * a2 + a1 * a1 * a1),
        }
    }

    /// Jet of `m_t` at `z_t(z)` by differentiating `m_t(z_t(z)) = m_0(z)`.
    pub fn limit_jet(&self) -> Jet {
        let (a1, a2, a3) = (self.m0.d1, self.m0.d2, self.m0.d3);
        let d = self.d1;
        let b1 = a1 / d;
        let b2 = (a2 - self.t * self.e * a1 * a1 * a1) / (d * d * d);
        let b3 = (a3 - 3.0 * b2 * d * self.d2 - b1 * self.d3) / (d * d * d);
        Jet { value: self.m0.value, d1: b1, d2: b2, d3: b3 }
    }

    /// `(d/dt m_t)(z_t(z))`.
    pub fn time_derivative(&self) -> Complex64 {
        -self.m0.d1 * self.e / self.d1
    }

    /// `(d/dt d^2/dz^2 m_t)(z_t(z)) = d^3/dz^3 exp(-m_t)` at `z_t(z)`.
    pub fn time_derivative_d2(&self) -> Complex64 {
        self.limit_jet().exp_neg().d3
    }
}

pub fn characteristic_jet<F: AnalyticField + ?Sized>(z: Complex64, t: f64, m0: &F) -> Result<CharacteristicJet> {
    check_off_axis(z)?;
    check_time(t)?;
    Ok(CharacteristicJet::new(z, t, m0.jet(z)?))
}

/// `m_t` as an analytic field in `w`, evaluated through the inverse
/// characteristic.
pub struct LimitField<F> {
    m0: F,
    t: f64,
}

impl<F: AnalyticField> LimitField<F> {
    pub fn new(m0: F, t: f64) -> Result<Self> {
        check_time(t)?;
        Ok(Self { m0, t })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn initial(&self) -> &F {
        &self.m0
    }

    /// Preimage `z` of `w` and the characteristic jet there.
    pub fn characteristic_at(&self, w: Complex64) -> Result<CharacteristicJet> {
        let z = characteristic_inverse(w, self.t, &self.m0)?;
        characteristic_jet(z, self.t, &self.m0)
    }
}

impl<F: AnalyticField> AnalyticField for LimitField<F> {
    fn jet(&self, w: Complex64) -> Result<Jet> {
        Ok(self.characteristic_at(w)?.limit_jet())
    }
}

/// `m_t(w) = m_0(z_t^{-1}(w))`.
pub fn limit_stieltjes<F: AnalyticField + ?Sized>(w: Complex64, t: f64, m0: &F) -> Result<Complex64> {
    let z = characteristic_inverse(w, t, m0)?;
    m0.value(z)
}
