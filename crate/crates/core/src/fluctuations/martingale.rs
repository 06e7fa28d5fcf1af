//! The martingale part of `m^n_t(z_t)` and its quadratic variation.
//!
//! Along `z_s = z + s E`, `E = exp(-m_0(z))`,
//!
//! ```text
//! m^n_t(z_t) = m^n_0(z) + int_0^t d_z m^n_s(z_s) E ds
//!            + theta n int_0^t (P_s(z_s) - P_s(z_s - 1/(theta n))) ds + M^n_t(z)
//! P_s(w)     = prod_j (1 + (1/n) / (w - x_j(s)/(theta n)))
//! ```
//!
//! with `[M, M]_t` the sum of squared jumps of `m^n_s(z_s)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_off_axis, Error, Result};
use crate::limit::quadrature::{composite, legendre_rule};
use crate::limit::{AnalyticField, CharacteristicJet};
use crate::particles::ParticleConfig;
use crate::walker::{nekrasov_product, Trajectory};

/// Panels for the time integral of the theoretical curve.
const QV_PANELS: usize = 8;

/// `(1/n) / (x/(theta n) - w)` for the atom at `x`.
fn kernel(config: &ParticleConfig, x: f64, w: Complex64) -> Complex64 {
    let n = config.n() as f64;
    (n * (x / (config.theta() * n) - w)).inv()
}

/// Change of `m^n(w)` when particle `i` of `before` moves right by one.
pub fn jump_increment(before: &ParticleConfig, i: usize, w: Complex64) -> Complex64 {
    let x = before.position(i);
    kernel(before, x + 1.0, w) - kernel(before, x, w)
}

/// Empirical quadratic variations at the checkpoints (scaled by `n^2`),
/// with the limits they should approach.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QvCurve {
    pub times: Vec<f64>,
    /// `n^2 sum (Delta m)^2`.
    pub empirical: Vec<Complex64>,
    /// `n^2 sum |Delta m|^2`.
    pub empirical_abs: Vec<f64>,
    pub theory: Vec<Complex64>,
    pub theory_abs: Vec<f64>,
}

fn check_checkpoints(times: &[f64], horizon: f64) -> Result<()> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&t| t < 0.0 || t > horizon) {
        return Err(Error::InvalidArgument(format!("checkpoints must be sorted within [0, {horizon}]")));
    }
    Ok(())
}

/// Empirical and theoretical quadratic variation of `n M^n(z)`.
pub fn martingale_qv<F: AnalyticField + ?Sized>(
    trajectory: &Trajectory,
    z: Complex64,
    m0: &F,
    checkpoints: &[f64],
) -> Result<QvCurve> {
    check_off_axis(z)?;
    check_checkpoints(checkpoints, trajectory.horizon)?;
    let n = trajectory.initial.n() as f64;
    let e = (-m0.value(z)?).exp();
    let mut empirical = Vec::with_capacity(checkpoints.len());
    let mut empirical_abs = Vec::with_capacity(checkpoints.len());
    let mut sq = Complex64::new(0.0, 0.0);
    let mut abs = 0.0;
    let mut k = 0;
    let mut cfg = trajectory.initial.clone();
    for ev in &trajectory.events {
        while k < checkpoints.len() && checkpoints[k] < ev.time {
            empirical.push(n * n * sq);
            empirical_abs.push(n * n * abs);
            k += 1;
        }
        let d = jump_increment(&cfg, ev.particle, z + ev.time * e);
        sq += d * d;
        abs += d.norm_sqr();
        cfg.increment(ev.particle);
    }
    while k < checkpoints.len() {
        empirical.push(n * n * sq);
        empirical_abs.push(n * n * abs);
        k += 1;
    }
    let theta = trajectory.initial.theta();
    let theory = checkpoints.iter().map(|&t| qv_theory(z, t, m0, theta)).collect::<Result<Vec<_>>>()?;
    let theory_abs = checkpoints
        .iter()
        .map(|&t| qv_theory_hermitian(z, t, m0, theta))
        .collect::<Result<Vec<_>>>()?;
    Ok(QvCurve { times: checkpoints.to_vec(), empirical, empirical_abs, theory, theory_abs })
}

/// `<W, W>_t = -(1/(6 theta)) int_0^t (d_s d_z^2 m_s)(z_s) ds`.
pub fn qv_theory<F: AnalyticField + ?Sized>(z: Complex64, t: f64, m0: &F, theta: f64) -> Result<Complex64> {
    if t == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    crate::limit::characteristic_forward(z, t, m0)?;
    let jet = m0.jet(z)?;
    let integral: Complex64 = composite(0.0, t, QV_PANELS, 16)
        .into_iter()
        .map(|(s, w)| w * CharacteristicJet::new(z, s, jet).time_derivative_d2())
        .sum();
    Ok(-integral / (6.0 * theta))
}

/// `<W(z), W(z')>_t`, the off-diagonal bracket rate integrated in time.
pub fn qv_theory_pair<F: AnalyticField + ?Sized>(
    z: Complex64,
    zp: Complex64,
    t: f64,
    m0: &F,
    theta: f64,
) -> Result<Complex64> {
    if t == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    crate::limit::characteristic_forward(z, t, m0)?;
    crate::limit::characteristic_forward(zp, t, m0)?;
    let (ja, jb) = (m0.jet(z)?, m0.jet(zp)?);
    let (ea, eb) = ((-ja.value).exp(), (-jb.value).exp());
    let integral: Complex64 = composite(0.0, t, QV_PANELS, 16)
        .into_iter()
        .map(|(s, w)| {
            let (ca, cb) = (CharacteristicJet::new(z, s, ja), CharacteristicJet::new(zp, s, jb));
            let gap = ca.zt - cb.zt;
            let rate = (ca.time_derivative() + cb.time_derivative()) / (gap * gap) - 2.0 * (ea - eb) / (gap * gap * gap);
            w * rate
        })
        .sum();
    Ok(-integral / theta)
}

/// `<W, conj W>_t`.
pub fn qv_theory_hermitian<F: AnalyticField + ?Sized>(z: Complex64, t: f64, m0: &F, theta: f64) -> Result<f64> {
    Ok(qv_theory_pair(z, z.conj(), t, m0, theta)?.re)
}

/// `n M^n_t(z)` at each checkpoint, reconstructed from the jump log.
///
/// Between jumps the drift is integrated with three-point Gauss–Legendre
/// on each inter-event interval.
pub fn martingale_path<F: AnalyticField + ?Sized>(
    trajectory: &Trajectory,
    z: Complex64,
    m0: &F,
    checkpoints: &[f64],
) -> Result<Vec<Complex64>> {
    check_off_axis(z)?;
    check_checkpoints(checkpoints, trajectory.horizon)?;
    let n = trajectory.initial.n() as f64;
    let theta = trajectory.initial.theta();
    let e = (-m0.value(z)?).exp();
    let shift = 1.0 / (theta * n);
    let rule = legendre_rule(3);
    // Expected rate of change of m^n(w) from jumps, by the product identity.
    let drift = |cfg: &ParticleConfig, s: f64| -> Complex64 {
        let w = z + s * e;
        theta * n * (nekrasov_product(cfg, w) - nekrasov_product(cfg, w - shift))
    };
    let integrate = |cfg: &ParticleConfig, a: f64, b: f64| -> Complex64 {
        if b <= a {
            return Complex64::new(0.0, 0.0);
        }
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        rule.iter().map(|&(x, w)| half * w * drift(cfg, mid + half * x)).sum()
    };

    let mut cfg = trajectory.initial.clone();
    let mut jumps = Complex64::new(0.0, 0.0);
    let mut compensator = Complex64::new(0.0, 0.0);
    let mut clock = 0.0;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut events = trajectory.events.iter().peekable();
    for &t in checkpoints {
        while let Some(ev) = events.peek() {
            if ev.time > t {
                break;
            }
            compensator += integrate(&cfg, clock, ev.time);
            jumps += jump_increment(&cfg, ev.particle, z + ev.time * e);
            cfg.increment(ev.particle);
            clock = ev.time;
            events.next();
        }
        compensator += integrate(&cfg, clock, t);
        clock = t;
        // Between jumps m^n_s(z_s) moves only by transport along z_s, which
        // is the first drift term exactly; the martingale is what remains
        // of the jump sum after its compensator.
        out.push(n * (jumps - compensator));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::{stieltjes_of, MeasureRep};
    use crate::rng::substream;
    use crate::walker::simulate;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn increment_matches_recomputation() {
        let before = ParticleConfig::new(0.5, vec![4, 2, 2, 0]).unwrap();
        let w = c(0.9, 0.6);
        let mut after = before.clone();
        after.increment(1);
        let direct = after.empirical_stieltjes(w).unwrap() - before.empirical_stieltjes(w).unwrap();
        assert!((jump_increment(&before, 1, w) - direct).norm() < 1e-12);
    }

    #[test]
    fn time_zero_is_zero() {
        let m = stieltjes_of(&MeasureRep::uniform(0.0, 1.0).unwrap()).unwrap();
        let init = ParticleConfig::packed(10, 0.5).unwrap();
        let (traj, _) = simulate(&init, 0.2, &[], &mut substream(1, "qv", 0)).unwrap();
        let qv = martingale_qv(&traj, c(1.0, 1.0), &m, &[0.0, 0.2]).unwrap();
        assert_eq!(qv.empirical[0], c(0.0, 0.0));
        assert_eq!(qv.theory[0], c(0.0, 0.0));
        assert!(qv.empirical[1].norm() > 0.0);
        let path = martingale_path(&traj, c(1.0, 1.0), &m, &[0.0]).unwrap();
        assert_eq!(path[0], c(0.0, 0.0));
    }

    #[test]
    fn streaming_sum_matches_replay() {
        let m = stieltjes_of(&MeasureRep::uniform(0.0, 1.0).unwrap()).unwrap();
        let init = ParticleConfig::packed(8, 1.0).unwrap();
        let (traj, _) = simulate(&init, 0.3, &[], &mut substream(2, "qv", 0)).unwrap();
        let z = c(0.4, 0.8);
        let e = (-m.value(z).unwrap()).exp();
        let mut prev = init.clone();
        let mut sq = c(0.0, 0.0);
        for (ev, after) in traj.replay() {
            let w = z + ev.time * e;
            let d = after.empirical_stieltjes(w).unwrap() - prev.empirical_stieltjes(w).unwrap();
            sq += d * d;
            prev = after;
        }
        let qv = martingale_qv(&traj, z, &m, &[0.3]).unwrap();
        assert!((qv.empirical[0] - 64.0 * sq).norm() < 1e-12 * qv.empirical[0].norm().max(1.0));
    }

    #[test]
    fn theory_is_the_diagonal_limit_of_the_pair_rate() {
        let m = stieltjes_of(&MeasureRep::uniform(0.0, 1.0).unwrap()).unwrap();
        let z = c(1.0, 1.0);
        let diag = qv_theory(z, 0.5, &m, 0.5).unwrap();
        let eps = c(5e-4, 2e-4);
        let pair = qv_theory_pair(z - eps, z + eps, 0.5, &m, 0.5).unwrap();
        assert!(((pair - diag) / diag).norm() < 1e-5, "{pair} vs {diag}");
        let pair2 = qv_theory_pair(z + eps, z - eps, 0.5, &m, 0.5).unwrap();
        assert!((pair - pair2).norm() < 1e-9 * pair.norm());
        assert!(qv_theory_hermitian(z, 0.5, &m, 0.5).unwrap() > 0.0);
    }
}
