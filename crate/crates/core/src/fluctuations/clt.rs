//! Limiting mean and covariance of `g_t(z_t(z)) = n (m^n_t - m_t)(z_t(z))`.
//!
//! With `E = exp(-m_0(z))`, `a_k = m_0^{(k)}(z)` and `D_t(z) = 1 - t a_1 E`:
//!
//! ```text
//! mu(t, z)          = g_0 / D_t + (1/2 - 1/(2 theta)) t (a_1^2 - a_2) E / D_t^2
//! sigma(s,z,t,z')   = 1 / (theta D_s(z) D_t(z')) * B_{s^t}(z, z')
//! B_u(z, z')        = 1/(z - z')^2 - D_u(z) D_u(z') / (z - z' + u (E - E'))^2
//! ```
//!
//! `B_u` is symmetric, so near the diagonal it is replaced by its limit
//! evaluated at the midpoint.

use num_complex::Complex64;

use crate::error::Result;
use crate::limit::{characteristic_forward, characteristic_jet, AnalyticField, CharacteristicJet, Jet};

/// Below this separation the covariance uses the diagonal formula.
///
/// The off-diagonal form loses about `eps / |z - z'|^3` to cancellation in
/// `z_u(z) - z_u(z')`, the midpoint diagonal is off by `O(|z - z'|^2)`; both
/// are near `1e-7` relative here.
pub const DIAGONAL_SWITCH: f64 = 1e-3;

/// `g_0` for the packed start: the left-endpoint Riemann sum correction
/// `-(1/2) (1/z + 1/(1 - z))` of the uniform law on `[0, 1]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PackedG0;

impl AnalyticField for PackedG0 {
    fn jet(&self, z: Complex64) -> Result<Jet> {
        crate::error::check_off_axis(z)?;
        let a = z.inv();
        let b = (1.0 - z).inv();
        Ok(Jet {
            value: -0.5 * (a + b),
            d1: -0.5 * (b * b - a * a),
            d2: -(a * a * a + b * b * b),
            d3: -3.0 * (b * b * b * b - a * a * a * a),
        })
    }
}

fn correction(theta: f64) -> f64 {
    0.5 - 0.5 / theta
}

/// Mean from the explicit derivatives of `m_0`.
pub fn mean_from_jet(t: f64, m0: &Jet, g0: Complex64, theta: f64) -> Complex64 {
    let e = (-m0.value).exp();
    let d = 1.0 - t * m0.d1 * e;
    g0 / d + correction(theta) * t * (m0.d1 * m0.d1 - m0.d2) * e / (d * d)
}

/// Mean written along the characteristic: `g_0 / z_t' + c z_t'' / z_t'^2`.
pub fn mean_from_characteristic(cj: &CharacteristicJet, g0: Complex64, theta: f64) -> Complex64 {
    g0 / cj.d1 + correction(theta) * cj.d2 / (cj.d1 * cj.d1)
}

/// `mu(t, z)`; errors if the characteristic from `z` dies before `t`.
pub fn clt_mean<F, G>(t: f64, z: Complex64, m0: &F, g0: &G, theta: f64) -> Result<Complex64>
where
    F: AnalyticField + ?Sized,
    G: AnalyticField + ?Sized,
{
    characteristic_forward(z, t, m0)?;
    Ok(mean_from_jet(t, &m0.jet(z)?, g0.value(z)?, theta))
}

pub fn clt_mean_characteristic<F, G>(t: f64, z: Complex64, m0: &F, g0: &G, theta: f64) -> Result<Complex64>
where
    F: AnalyticField + ?Sized,
    G: AnalyticField + ?Sized,
{
    characteristic_forward(z, t, m0)?;
    Ok(mean_from_characteristic(&characteristic_jet(z, t, m0)?, g0.value(z)?, theta))
}

/// A base point with its `m_0` jet, reused across many covariance entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub z: Complex64,
    pub jet: Jet,
    pub e: Complex64,
}

impl Anchor {
    pub fn new<F: AnalyticField + ?Sized>(z: Complex64, m0: &F) -> Result<Self> {
        let jet = m0.jet(z)?;
        Ok(Self { z, jet, e: (-jet.value).exp() })
    }

    pub fn from_jet(z: Complex64, jet: Jet) -> Self {
        Self { z, jet, e: (-jet.value).exp() }
    }

    /// `D_t = 1 - t m_0' exp(-m_0)`.
    pub fn d(&self, t: f64) -> Complex64 {
        1.0 - t * self.jet.d1 * self.e
    }

    pub fn conj(&self) -> Self {
        Self { z: self.z.conj(), jet: self.jet.conj(), e: self.e.conj() }
    }
}

/// `sigma(s, z, t, z)` as printed, with third derivatives of `m_0`.
pub fn sigma_diagonal(s: f64, t: f64, a: &Anchor, theta: f64) -> Complex64 {
    let (u, v) = (s.min(t), s.max(t));
    let (a1, a2, a3) = (a.jet.d1, a.jet.d2, a.jet.d3);
    let du = a.d(u);
    let denom = 12.0 * theta * du * du * du * a.d(v);
    let first = u * a.e * (2.0 * a1 * a1 * a1 - 6.0 * a1 * a2 + 2.0 * a3);
    let second = u * u * a.e * a.e * (a1 * a1 * a1 * a1 + 3.0 * a2 * a2 - 2.0 * a1 * a3);
    (first + second) / denom
}

/// `sigma(s, z, t, z')` from the explicit derivatives of `m_0`.
pub fn sigma_from_anchors(s: f64, a: &Anchor, t: f64, b: &Anchor, theta: f64) -> Complex64 {
    let bracket = if (a.z - b.z).norm() < DIAGONAL_SWITCH {
        bracket_diagonal(s, a, t, b, theta)
    } else {
        bracket_off_diagonal(s.min(t), a, b)
    };
    bracket / (theta * a.d(s) * b.d(t))
}

fn bracket_off_diagonal(u: f64, a: &Anchor, b: &Anchor) -> Complex64 {
    let delta = a.z - b.z;
    let shifted = delta + u * (a.e - b.e);
    1.0 / (delta * delta) - a.d(u) * b.d(u) / (shifted * shifted)
}

/// `B_u` at the midpoint, recovered from the printed diagonal formula.
fn bracket_diagonal(s: f64, a: &Anchor, t: f64, b: &Anchor, theta: f64) -> Complex64 {
    let mid = midpoint(a, b);
    sigma_diagonal(s, t, &mid, theta) * theta * mid.d(s) * mid.d(t)
}

fn midpoint(a: &Anchor, b: &Anchor) -> Anchor {
    // Averaging the two jets is accurate to second order in the separation.
    let (x, y) = (&a.jet, &b.jet);
    let jet = Jet {
        value: 0.5 * (x.value + y.value),
        d1: 0.5 * (x.d1 + y.d1),
        d2: 0.5 * (x.d2 + y.d2),
        d3: 0.5 * (x.d3 + y.d3),
    };
    Anchor::from_jet(0.5 * (a.z + b.z), jet)
}

/// The same covariance through `z_u(z) - z_u(z')` and `z_u'`.
pub fn sigma_characteristic(s: f64, a: &Anchor, t: f64, b: &Anchor, theta: f64) -> Complex64 {
    let u = s.min(t);
    let (ca, cb) = (CharacteristicJet::new(a.z, u, a.jet), CharacteristicJet::new(b.z, u, b.jet));
    let (sa, tb) = (CharacteristicJet::new(a.z, s, a.jet), CharacteristicJet::new(b.z, t, b.jet));
    let delta = a.z - b.z;
    let gap = ca.zt - cb.zt;
    (1.0 / (delta * delta) - ca.d1 * cb.d1 / (gap * gap)) / (theta * sa.d1 * tb.d1)
}

/// `sigma(s, z, t, z') = cov[g_s(z_s(z)), g_t(z_t(z'))]`. The Hermitian
/// covariance with `conj g_t(z_t(z'))` is `clt_cov(s, z, t, conj z')`.
pub fn clt_cov<F: AnalyticField + ?Sized>(
    s: f64,
    z: Complex64,
    t: f64,
    zp: Complex64,
    m0: &F,
    theta: f64,
) -> Result<Complex64> {
    let horizon = s.max(t);
    characteristic_forward(z, horizon, m0)?;
    characteristic_forward(zp, horizon, m0)?;
    Ok(sigma_from_anchors(s, &Anchor::new(z, m0)?, t, &Anchor::new(zp, m0)?, theta))
}

pub fn clt_cov_characteristic<F: AnalyticField + ?Sized>(
    s: f64,
    z: Complex64,
    t: f64,
    zp: Complex64,
    m0: &F,
    theta: f64,
) -> Result<Complex64> {
    let horizon = s.max(t);
    characteristic_forward(z, horizon, m0)?;
    characteristic_forward(zp, horizon, m0)?;
    Ok(sigma_characteristic(s, &Anchor::new(z, m0)?, t, &Anchor::new(zp, m0)?, theta))
}

/// `g^n_t(w) = n (m^n_t(w) - m_t(w))` at each probe.
pub fn g_field<F: AnalyticField + ?Sized>(
    config: &crate::ParticleConfig,
    m_limit: &F,
    probes: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = config.n() as f64;
    probes
        .iter()
        .map(|&w| Ok(n * (config.empirical_stieltjes(w)? - m_limit.value(w)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::field::derivative_mismatch;
    use crate::limit::{in_omega, stieltjes_of, MeasureRep};
    use crate::ParticleConfig;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn uniform() -> crate::limit::StieltjesTransform {
        stieltjes_of(&MeasureRep::uniform(0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn packed_g0_is_the_riemann_correction() {
        let z = c(1.0, 1.0);
        let target = PackedG0.value(z).unwrap();
        let m0 = uniform().value(z).unwrap();
        let g = |n: usize| {
            let cfg = ParticleConfig::packed(n, 1.0).unwrap();
            n as f64 * (cfg.empirical_stieltjes(z).unwrap() - m0)
        };
        let (g1, g2) = (g(10_000), g(100_000));
        assert!((g1 - target).norm() < 1e-3);
        // The remainder is O(1/n): Richardson extrapolation lands much closer.
        let rich = (10.0 * g2 - g1) / 9.0;
        assert!((rich - target).norm() < 1e-8, "{}", (rich - target).norm());
        assert!(derivative_mismatch(&PackedG0, z, 1e-4).unwrap() < 1e-7);
    }

    #[test]
    fn g_field_conjugate_symmetry() {
        let cfg = ParticleConfig::new(0.5, vec![5, 3, 3, 1, 0]).unwrap();
        let m = uniform();
        let z = c(0.7, 0.4);
        let g = g_field(&cfg, &m, &[z, z.conj()]).unwrap();
        assert!((g[1] - g[0].conj()).norm() < 1e-13);
    }

    #[test]
    fn mean_special_cases() {
        let m = uniform();
        let z = c(1.0, 1.0);
        let g0 = PackedG0.value(z).unwrap();
        assert!((clt_mean(0.0, z, &m, &PackedG0, 0.5).unwrap() - g0).norm() < 1e-15);
        let cj = characteristic_jet(z, 0.4, &m).unwrap();
        let mu = clt_mean(0.4, z, &m, &PackedG0, 1.0).unwrap();
        assert!((mu - g0 / cj.d1).norm() < 1e-14);
        let a = clt_mean(0.5, z, &m, &PackedG0, 0.5).unwrap();
        let b = clt_mean_characteristic(0.5, z, &m, &PackedG0, 0.5).unwrap();
        assert!((a - b).norm() < 1e-10 * a.norm());
        assert!(matches!(
            clt_mean(5.0, c(0.5, 0.05), &m, &PackedG0, 1.0),
            Err(crate::Error::LifetimeExceeded { .. })
        ));
    }

    #[test]
    fn covariance_vanishes_from_time_zero() {
        let m = uniform();
        let s = clt_cov(0.0, c(1.0, 1.0), 0.5, c(0.3, -0.8), &m, 2.0).unwrap();
        assert_eq!(s, c(0.0, 0.0));
    }

    #[test]
    fn diagonal_is_the_limit() {
        let m = uniform();
        let z = c(0.5, 0.9);
        for (s, t) in [(0.3, 0.3), (0.25, 0.5), (0.5, 0.2)] {
            let a = Anchor::new(z, &m).unwrap();
            let diag = sigma_diagonal(s, t, &a, 0.7);
            let err = |eps: f64| {
                let b = Anchor::new(z + eps, &m).unwrap();
                // Keep clear of the switch so the off-diagonal branch is used.
                assert!(eps >= DIAGONAL_SWITCH);
                ((sigma_from_anchors(s, &a, t, &b, 0.7) - diag) / diag).norm()
            };
            let (e3, e2) = (err(1e-3), err(1e-2));
            // Moving one argument gives a first-order error.
            assert!(e3 < 1e-2 && (e2 / e3 - 10.0).abs() < 1.0, "s={s} t={t}: {e2} {e3}");
            // A symmetric split cancels it when s = t.
            if s == t {
                let (lo, hi) = (Anchor::new(z - 5e-4, &m).unwrap(), Anchor::new(z + 5e-4, &m).unwrap());
                let sym = ((sigma_from_anchors(s, &lo, t, &hi, 0.7) - diag) / diag).norm();
                assert!(sym < 1e-4, "{sym}");
            }
            // Both branches agree where they meet.
            let b = Anchor::new(z + DIAGONAL_SWITCH, &m).unwrap();
            let off = bracket_off_diagonal(s.min(t), &a, &b);
            let on = bracket_diagonal(s, &a, t, &b, 0.7);
            assert!(((off - on) / on).norm() < 1e-5, "{}", ((off - on) / on).norm());
        }
    }

    proptest! {
        #[test]
        fn cross_forms_and_symmetries(
            zr in -1.0f64..2.0, zi in 0.6f64..2.0, wr in -1.0f64..2.0, wi in 0.6f64..2.0,
            flip in any::<bool>(), s in 0.0f64..0.5, t in 0.0f64..0.5, theta in 0.3f64..3.0,
        ) {
            let m = uniform();
            let z = c(zr, zi);
            let zp = if flip { c(wr, -wi) } else { c(wr, wi) };
            prop_assume!((z - zp).norm() > 0.05);
            let horizon = s.max(t);
            prop_assume!(in_omega(z, horizon, &m).unwrap() && in_omega(zp, horizon, &m).unwrap());
            let a = clt_cov(s, z, t, zp, &m, theta).unwrap();
            let b = clt_cov_characteristic(s, z, t, zp, &m, theta).unwrap();
            prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0));
            let swapped = clt_cov(t, zp, s, z, &m, theta).unwrap();
            prop_assert!((a - swapped).norm() <= 1e-12 * a.norm().max(1.0));
            let conj = clt_cov(s, z.conj(), t, zp.conj(), &m, theta).unwrap();
            prop_assert!((conj - a.conj()).norm() <= 1e-12 * a.norm().max(1.0));
            let ma = clt_mean(t, z, &m, &PackedG0, theta).unwrap();
            let mb = clt_mean_characteristic(t, z, &m, &PackedG0, theta).unwrap();
            prop_assert!((ma - mb).norm() <= 1e-10 * ma.norm().max(1.0));
        }
    }
}
