//! β-Dyson Brownian motion with unit drift,
//!
//! ```text
//! dy_i = sqrt(2/(beta n)) dB_i + (1/n) sum_{j != i} dt / (y_i - y_j) + dt,
//! ```
//!
//! its hydrodynamic limit, and the comparison with the walk through the
//! Markov–Krein map.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{check_off_axis, Error, Result};
use crate::limit::inversion::{damped_newton, NewtonOptions};
use crate::limit::quantized::markov_krein_q;
use crate::limit::{
    characteristic_forward, limit_stieltjes, stieltjes_of, AnalyticField, MarkovKreinTransform, MeasureRep,
};
use crate::parallel::Exec;
use crate::particles::ParticleConfig;
use crate::rng::substream;
use crate::stats::complex_mean_se;
use crate::walker::WalkerState;

/// Smallest step before the integrator gives up.
pub const MIN_STEP: f64 = 1e-12;
/// Consecutive accepted steps after which a shrunken step is restored.
pub const RESTORE_AFTER: u32 = 10;

/// Positions `y_1 > ... > y_n` on the Weyl chamber.
#[derive(Debug, Clone, PartialEq)]
pub struct DBMState {
    y: Vec<f64>,
    beta: f64,
    t: f64,
    dt: f64,
    base_dt: f64,
    streak: u32,
}

fn ordered(y: &[f64]) -> bool {
    y.windows(2).all(|w| w[0] > w[1])
}

impl DBMState {
    pub fn new(y: Vec<f64>, beta: f64, dt: f64) -> Result<Self> {
        if y.is_empty() || !ordered(&y) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("DBM positions must be finite and strictly decreasing".into()));
        }
        if !(beta > 0.0 && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("need beta > 0 and dt > 0, got {beta}, {dt}")));
        }
        Ok(Self { y, beta, t: 0.0, dt, base_dt: dt, streak: 0 })
    }

    pub fn positions(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Current (possibly shrunken) step size.
    pub fn step_size(&self) -> f64 {
        self.dt
    }

    /// `(1/n) sum_i 1/(y_i - w)`.
    pub fn stieltjes(&self, w: Complex64) -> Result<Complex64> {
        check_off_axis(w)?;
        let s: Complex64 = self.y.iter().map(|&y| (y - w).inv()).sum();
        Ok(s / self.n() as f64)
    }

    fn drift(&self) -> Vec<f64> {
        let n = self.n();
        let mut d = vec![1.0; n];
        for i in 0..n {
            for j in i + 1..n {
                let f = 1.0 / (n as f64 * (self.y[i] - self.y[j]));
                d[i] += f;
                d[j] -= f;
            }
        }
        d
    }

    /// One Euler–Maruyama step of length at most `cap`, halving on any
    /// ordering violation.
    fn step_capped<R: Rng + ?Sized>(&mut self, cap: f64, rng: &mut R) -> Result<f64> {
        let drift = self.drift();
        let noise = (2.0 / (self.beta * self.n() as f64)).sqrt();
        loop {
            let h = self.dt.min(cap);
            let sh = h.sqrt();
            let cand: Vec<f64> = self
                .y
                .iter()
                .zip(&drift)
                .map(|(&y, &d)| {
                    let xi: f64 = rng.sample(StandardNormal);
                    y + noise * sh * xi + h * d
                })
                .collect();
            if ordered(&cand) {
                self.y = cand;
                self.t += h;
                if self.dt < self.base_dt {
                    self.streak += 1;
                    if self.streak >= RESTORE_AFTER {
                        self.dt = self.base_dt;
                        self.streak = 0;
                    }
                }
                return Ok(h);
            }
            self.dt *= 0.5;
            self.streak = 0;
            if self.dt < MIN_STEP {
                return Err(Error::StepUnderflow { t: self.t, dt: self.dt });
            }
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.step_capped(f64::INFINITY, rng).map(|_| ())
    }

    /// Integrate up to exactly time `t`.
    pub fn advance_to<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) -> Result<()> {
        while self.t < t {
            let left = t - self.t;
            let h = self.step_capped(left, rng)?;
            if h >= left {
                self.t = t;
            }
        }
        Ok(())
    }
}

/// One accepted step.
pub fn dbm_step<R: Rng + ?Sized>(mut state: DBMState, rng: &mut R) -> Result<DBMState> {
    state.step(rng)?;
    Ok(state)
}

/// `z~_t(z) = z + t - t m~_0(z)`.
pub fn dbm_characteristic<F: AnalyticField + ?Sized>(z: Complex64, t: f64, mtilde0: &F) -> Result<Complex64> {
    Ok(z + t - t * mtilde0.value(z)?)
}

fn in_domain<F: AnalyticField + ?Sized>(z: Complex64, t: f64, mtilde0: &F) -> bool {
    // Im m(z) / Im z = int dmu / |x - z|^2.
    z.im != 0.0 && mtilde0.value(z).map(|m| m.im / z.im < 1.0 / t).unwrap_or(false)
}

fn dbm_solve_at<F: AnalyticField + ?Sized>(w: Complex64, t: f64, m: &F, start: Complex64) -> Result<Complex64> {
    damped_newton(
        |z| {
            let j = m.jet(z)?;
            Ok((z + t - t * j.value - w, 1.0 - t * j.d1))
        },
        |z| z.im * w.im > 0.0 && in_domain(z, t, m),
        start,
        w.norm(),
        NewtonOptions::default(),
    )
}

/// The `z` with `z~_t(z) = w`, by damped Newton from `w`, falling back to
/// continuation in time.
pub fn dbm_characteristic_inverse<F: AnalyticField + ?Sized>(w: Complex64, t: f64, mtilde0: &F) -> Result<Complex64> {
    check_off_axis(w)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(w);
    }
    if let Ok(z) = dbm_solve_at(w, t, mtilde0, w) {
        return Ok(z);
    }
    let (mut s, mut z, mut ds) = (0.0, w, t / 8.0);
    while s < t {
        let next = (s + ds).min(t);
        match dbm_solve_at(w, next, mtilde0, z) {
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

/// `m~_t(w) = m~_0(z)` with `z~_t(z) = w`.
pub fn dbm_limit_stieltjes<F: AnalyticField + ?Sized>(w: Complex64, t: f64, mtilde0: &F) -> Result<Complex64> {
    mtilde0.value(dbm_characteristic_inverse(w, t, mtilde0)?)
}

/// Semicircle law with the given centre and variance.
pub fn semicircle(centre: f64, variance: f64, points: usize) -> Result<MeasureRep> {
    if variance <= 0.0 {
        return Err(Error::InvalidArgument(format!("variance must be positive, got {variance}")));
    }
    let r = 2.0 * variance.sqrt();
    MeasureRep::from_density(
        |x| (r * r - (x - centre).powi(2)).max(0.0).sqrt() / (2.0 * std::f64::consts::PI * variance),
        centre - r,
        centre + r,
        points,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramReport {
    pub t: f64,
    pub probes: Vec<Complex64>,
    /// `max |z~_t(z) - z_t(z)|` with `m~_0 = 1 - e^{-m_0}`.
    pub identity_residual: f64,
    /// `max |m~_t(w) - (1 - e^{-m_t(w)})|`.
    pub transform_residual: f64,
}

/// Deterministic legs of the diagram for `mu_0` at time `t`.
pub fn commuting_diagram_check(mu0: &MeasureRep, t: f64, probes: &[Complex64]) -> Result<DiagramReport> {
    if mu0.max_density() > 1.0 + 1e-12 {
        return Err(Error::InvalidConfig(format!("density {} exceeds 1", mu0.max_density())));
    }
    let m0 = stieltjes_of(mu0)?;
    let q = MarkovKreinTransform { inner: m0.clone() };
    let mut identity = 0.0f64;
    let mut transform = 0.0f64;
    for &z in probes {
        identity = identity.max((dbm_characteristic(z, t, &q)? - characteristic_forward(z, t, &m0)?).norm());
        let walk = 1.0 - (-limit_stieltjes(z, t, &m0)?).exp();
        transform = transform.max((dbm_limit_stieltjes(z, t, &q)? - walk).norm());
    }
    Ok(DiagramReport { t, probes: probes.to_vec(), identity_residual: identity, transform_residual: transform })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McLegReport {
    pub n: usize,
    pub theta: f64,
    pub beta: f64,
    pub dt: f64,
    pub t: f64,
    pub runs: usize,
    pub w: Complex64,
    /// Run average of `m~^n_t(w)`.
    pub dbm: Complex64,
    pub dbm_se: f64,
    /// Run average of `1 - e^{-m^n_t(w)}`.
    pub walker: Complex64,
    pub walker_se: f64,
    pub gap: f64,
}

/// Atoms per particle in the discretized Markov–Krein image used to seed
/// the diffusion.
const MK_OVERSAMPLE: usize = 10;

/// DBM started from the quantiles of `Q(mu_0)` against the walk started
/// from the quantiles of `mu_0`, both run to time `t`, with `beta = 2 theta`.
#[allow(clippy::too_many_arguments)]
pub fn diagram_mc_leg(
    mu0: &MeasureRep,
    n: usize,
    theta: f64,
    t: f64,
    dt: f64,
    w: Complex64,
    runs: usize,
    seed: u64,
    exec: Exec,
) -> Result<McLegReport> {
    check_off_axis(w)?;
    if runs < 2 {
        return Err(Error::InvalidArgument("need at least two runs".into()));
    }
    let beta = 2.0 * theta;
    let q = markov_krein_q(mu0, MK_OVERSAMPLE * n)?;
    let y0 = q.quantiles(n);
    let init_dbm = DBMState::new(y0, beta, dt)?;
    let init_walk = ParticleConfig::from_rescaled_locations(theta, &mu0.quantiles(n))?;

    let dbm = exec
        .map_runs(runs, |r| -> Result<Complex64> {
            let mut rng = substream(seed, "dbm", r as u64);
            let mut s = init_dbm.clone();
            s.advance_to(t, &mut rng)?;
            s.stieltjes(w)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let walk = exec
        .map_runs(runs, |r| -> Result<Complex64> {
            let mut rng = substream(seed, "dbm-walker", r as u64);
            let mut s = WalkerState::new(init_walk.clone());
            s.advance_to(t, &mut rng)?;
            Ok(1.0 - (-s.config().empirical_stieltjes(w)?).exp())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (dm, dse) = complex_mean_se(&dbm);
    let (wm, wse) = complex_mean_se(&walk);
    Ok(McLegReport {
        n,
        theta,
        beta,
        dt,
        t,
        runs,
        w,
        dbm: dm,
        dbm_se: dse,
        walker: wm,
        walker_se: wse,
        gap: (dm - wm).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::{FnField, Jet};
    use crate::stats::mean_se;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Stieltjes transform of the point mass at 1.
    fn dirac_one() -> FnField<impl Fn(Complex64) -> Result<Jet> + Send + Sync> {
        FnField(|z: Complex64| {
            let u = (1.0 - z).inv();
            Ok(Jet { value: u, d1: u * u, d2: 2.0 * u * u * u, d3: 6.0 * u * u * u * u })
        })
    }

    #[test]
    fn rejects_unordered_start() {
        assert!(DBMState::new(vec![0.0, 1.0], 1.0, 1e-3).is_err());
        assert!(DBMState::new(vec![1.0, 1.0], 1.0, 1e-3).is_err());
        assert!(DBMState::new(vec![1.0, 0.0], 0.0, 1e-3).is_err());
    }

    #[test]
    fn single_particle_is_drifted_brownian_motion() {
        let beta = 2.0;
        let ys: Vec<f64> = (0..10_000)
            .map(|r| {
                let mut s = DBMState::new(vec![0.0], beta, 0.05).unwrap();
                s.advance_to(1.0, &mut substream(1, "dbm-test", r)).unwrap();
                assert!((s.time() - 1.0).abs() < 1e-12);
                s.positions()[0]
            })
            .collect();
        let (mean, se) = mean_se(&ys);
        assert!((mean - 1.0).abs() < 4.0 * se, "{mean} ± {se}");
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (ys.len() - 1) as f64;
        let var_se = var * (2.0 / (ys.len() - 1) as f64).sqrt();
        assert!((var - 2.0 / beta).abs() < 4.0 * var_se, "{var} ± {var_se}");
    }

    #[test]
    fn pair_centre_of_mass_drifts_at_unit_speed() {
        let cms: Vec<f64> = (0..4000)
            .map(|r| {
                let mut s = DBMState::new(vec![0.5, -0.5], 1.0, 0.01).unwrap();
                s.advance_to(1.0, &mut substream(2, "dbm-test", r)).unwrap();
                0.5 * (s.positions()[0] + s.positions()[1])
            })
            .collect();
        let (mean, se) = mean_se(&cms);
        assert!((mean - 1.0).abs() < 4.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn ordering_survives_a_long_run() {
        let y: Vec<f64> = (0..50).map(|i| 1.0 - i as f64 / 50.0).collect();
        let mut s = DBMState::new(y, 1.0, 1e-4).unwrap();
        let mut rng = substream(3, "dbm-test", 0);
        for _ in 0..100_000 {
            s.step(&mut rng).unwrap();
            assert!(ordered(s.positions()));
        }
    }

    #[test]
    fn limit_satisfies_its_characteristic_relation() {
        let m = dirac_one();
        let w = c(1.2, 0.8);
        assert_eq!(dbm_limit_stieltjes(w, 0.0, &m).unwrap(), m.value(w).unwrap());
        for &z in &[c(1.0, 1.0), c(0.3, -0.9), c(2.5, 0.6)] {
            let t = 0.5;
            let zt = dbm_characteristic(z, t, &m).unwrap();
            let r = (dbm_limit_stieltjes(zt, t, &m).unwrap() - m.value(z).unwrap()).norm();
            assert!(r < 1e-10, "{z}: {r}");
        }
    }

    #[test]
    fn dirac_flow_is_a_growing_semicircle() {
        // From the point mass at 1 the time-t law is the semicircle centred
        // at 1 + t with variance t; start the diffusion there at t0.
        let (t0, t, n) = (0.1, 0.5, 200);
        let y0 = semicircle(1.0 + t0, t0, 4001).unwrap().quantiles(n);
        let w = c(1.5, 0.8);
        let exact = dbm_limit_stieltjes(w, t, &dirac_one()).unwrap();
        let closed = {
            // Root of t m^2 + (w - 1 - t) m + 1 = 0 with Im m > 0.
            let b = w - 1.0 - t;
            let disc = (b * b - 4.0 * t).sqrt();
            let r = (-b + disc) / (2.0 * t);
            if r.im > 0.0 { r } else { (-b - disc) / (2.0 * t) }
        };
        assert!((exact - closed).norm() < 1e-10, "{exact} vs {closed}");
        let samples: Vec<Complex64> = (0..4)
            .map(|r| {
                let mut s = DBMState::new(y0.clone(), 1.0, 1e-3).unwrap();
                s.advance_to(t - t0, &mut substream(4, "dbm-test", r)).unwrap();
                s.stieltjes(w).unwrap()
            })
            .collect();
        let mean = samples.iter().sum::<Complex64>() / samples.len() as f64;
        assert!((mean - exact).norm() < 5.0 / n as f64, "{mean} vs {exact}");
    }

    #[test]
    fn deterministic_legs_of_the_diagram() {
        let mu0 = MeasureRep::uniform(0.0, 1.0).unwrap();
        let probes: Vec<Complex64> = (0..20)
            .map(|k| {
                let a = k as f64 * std::f64::consts::PI / 10.0;
                c(0.5 + 1.2 * a.cos(), 0.6 * a.sin().signum() * (0.5 + a.sin().abs()))
            })
            .collect();
        let rep = commuting_diagram_check(&mu0, 0.5, &probes).unwrap();
        assert!(rep.identity_residual < 1e-12, "{}", rep.identity_residual);
        assert!(rep.transform_residual < 1e-8, "{}", rep.transform_residual);
        let dense = MeasureRep::uniform(0.0, 0.5).unwrap();
        assert!(commuting_diagram_check(&dense, 0.5, &probes).is_err());
    }
}
