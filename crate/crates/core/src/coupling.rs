//! Monotone coupling of two walks with the same `n` and `theta`, and the
//! extreme-particle scan used to size the fluctuation contour.
//!
//! At particle `i` the pair makes a joint jump at rate `theta n min(w^x_i, w^y_i)`
//! and single jumps at rates `theta n [w^x_i - w^y_i]_+` (x only) and
//! `theta n [w^y_i - w^x_i]_+` (y only).

use num_complex::Complex64;
use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::parallel::Exec;
use crate::particles::ParticleConfig;
use crate::rng::substream;
use crate::stats::{covariance_jackknife, mean_se};
use crate::walker::{jump_weights, update_weights_incremental, WalkerState};

/// Full weight recomputation every `REFRESH_PER_PARTICLE * n` moves.
const REFRESH_PER_PARTICLE: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Move {
    X,
    Y,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoupledEvent {
    pub time: f64,
    pub particle: usize,
    pub kind: Move,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    x: ParticleConfig,
    y: ParticleConfig,
    wx: Vec<f64>,
    wy: Vec<f64>,
    clock: f64,
    events: u64,
    since_refresh: u64,
}

impl CoupledState {
    pub fn new(x: ParticleConfig, y: ParticleConfig) -> Result<Self> {
        if x.n() != y.n() || x.theta() != y.theta() {
            return Err(Error::InvalidConfig("coupled walks need the same n and theta".into()));
        }
        let (wx, wy) = (jump_weights(&x), jump_weights(&y));
        Ok(Self { x, y, wx, wy, clock: 0.0, events: 0, since_refresh: 0 })
    }

    pub fn x(&self) -> &ParticleConfig {
        &self.x
    }

    pub fn y(&self) -> &ParticleConfig {
        &self.y
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Accepted (non-null) events so far.
    pub fn events(&self) -> u64 {
        self.events
    }

    /// `2 theta n^2`, which bounds `theta n sum_i max(w^x_i, w^y_i)`.
    pub fn envelope_rate(&self) -> f64 {
        let n = self.x.n() as f64;
        2.0 * self.x.theta() * n * n
    }

    /// `theta n sum_i max(w^x_i, w^y_i)`.
    pub fn total_rate(&self) -> f64 {
        let n = self.x.n() as f64;
        self.x.theta() * n * self.wx.iter().zip(&self.wy).map(|(a, b)| a.max(*b)).sum::<f64>()
    }

    /// Which move a uniform `u` in `[0, 2n)` selects, `None` for a null event.
    fn select(&self, u: f64) -> Option<(usize, Move)> {
        let mut acc = 0.0;
        for (i, (&a, &b)) in self.wx.iter().zip(&self.wy).enumerate() {
            for (rate, kind) in [(a.min(b), Move::Joint), ((a - b).max(0.0), Move::X), ((b - a).max(0.0), Move::Y)] {
                if rate > 0.0 {
                    acc += rate;
                    if u < acc {
                        return Some((i, kind));
                    }
                }
            }
        }
        None
    }

    fn apply(&mut self, i: usize, kind: Move) {
        if kind != Move::Y {
            self.x.increment(i);
            update_weights_incremental(&mut self.wx, &self.x, i);
        }
        if kind != Move::X {
            self.y.increment(i);
            update_weights_incremental(&mut self.wy, &self.y, i);
        }
        self.events += 1;
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_PER_PARTICLE * self.x.n() as u64 {
            self.wx = jump_weights(&self.x);
            self.wy = jump_weights(&self.y);
            self.since_refresh = 0;
        }
    }

    /// Next proposal of the envelope clock; `None` when it passes `horizon`.
    fn propose<R: Rng + ?Sized>(&mut self, horizon: f64, rng: &mut R) -> Option<Option<CoupledEvent>> {
        let e: f64 = rng.sample(Exp1);
        let next = self.clock + e / self.envelope_rate();
        if next > horizon {
            self.clock = self.clock.max(horizon);
            return None;
        }
        self.clock = next;
        let u = rng.random::<f64>() * 2.0 * self.x.n() as f64;
        Some(self.select(u).map(|(i, kind)| {
            self.apply(i, kind);
            CoupledEvent { time: next, particle: i, kind }
        }))
    }

    /// Run to `t`, calling `on_event` after each accepted move.
    pub fn advance_with<R, F>(&mut self, t: f64, rng: &mut R, mut on_event: F) -> Result<()>
    where
        R: Rng + ?Sized,
        F: FnMut(&CoupledEvent, &CoupledState) -> Result<()>,
    {
        while let Some(ev) = self.propose(t, rng) {
            if let Some(ev) = ev {
                on_event(&ev, self)?;
            }
        }
        Ok(())
    }
}

/// Advance to the next accepted move (null proposals are skipped).
pub fn coupled_step<R: Rng + ?Sized>(mut state: CoupledState, rng: &mut R) -> (CoupledState, CoupledEvent) {
    loop {
        if let Some(Some(ev)) = state.propose(f64::INFINITY, rng) {
            return (state, ev);
        }
    }
}

fn dominated(x: &ParticleConfig, y: &ParticleConfig, i: usize) -> bool {
    x.lambda()[i] <= y.lambda()[i]
}

/// Summary shared by the domination test and the extreme-particle scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReport {
    pub violations: u64,
    pub runs: usize,
    /// Largest `x_1(t)/n` of the upper walk over all runs.
    pub max_x1_over_n: f64,
    /// `1.2 * max_x1_over_n`.
    pub suggested_c: f64,
}

/// Headroom applied to the scanned maximum.
pub const C_HEADROOM: f64 = 1.2;

/// Run the coupling from `(x0, y0)` to `t` and check `x_i <= y_i` after
/// every move. A violation aborts with the offending event.
pub fn domination_test(
    x0: &ParticleConfig,
    y0: &ParticleConfig,
    t: f64,
    runs: usize,
    seed: u64,
    exec: Exec,
) -> Result<CouplingReport> {
    let init = CoupledState::new(x0.clone(), y0.clone())?;
    if let Some(i) = (0..x0.n()).find(|&i| !dominated(x0, y0, i)) {
        return Err(Error::InvalidConfig(format!("initial data not dominated at coordinate {i}")));
    }
    let maxima = exec.map_runs(runs, |r| -> Result<f64> {
        let mut rng = substream(seed, "coupling", r as u64);
        let mut s = init.clone();
        s.advance_with(t, &mut rng, |ev, st| {
            if dominated(&st.x, &st.y, ev.particle) {
                Ok(())
            } else {
                Err(Error::DominationViolation { event: st.events, time: ev.time, index: ev.particle })
            }
        })?;
        Ok(s.y.position(0) / s.y.n() as f64)
    });
    let mut max = f64::NEG_INFINITY;
    for m in maxima {
        max = max.max(m?);
    }
    Ok(CouplingReport { violations: 0, runs, max_x1_over_n: max, suggested_c: C_HEADROOM * max })
}

/// Per-run `x_1(t)/n` for the solo walk from `config0`.
pub fn extreme_particle_paths(config0: &ParticleConfig, times: &[f64], runs: usize, seed: u64, exec: Exec) -> Result<Vec<Vec<f64>>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("scan times must be sorted and nonnegative".into()));
    }
    let n = config0.n() as f64;
    exec.map_runs(runs, |r| -> Result<Vec<f64>> {
        let mut rng = substream(seed, "scan", r as u64);
        let mut s = WalkerState::new(config0.clone());
        times
            .iter()
            .map(|&t| {
                s.advance_to(t, &mut rng)?;
                Ok(s.config().position(0) / n)
            })
            .collect()
    })
    .into_iter()
    .collect()
}

/// Maximum of `x_1(t)/n` over `runs` solo walks.
pub fn extreme_particle_scan(config0: &ParticleConfig, t: f64, runs: usize, seed: u64, exec: Exec) -> Result<CouplingReport> {
    let paths = extreme_particle_paths(config0, &[t], runs, seed, exec)?;
    let max = paths.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(CouplingReport { violations: 0, runs, max_x1_over_n: max, suggested_c: C_HEADROOM * max })
}

/// Jump-count statistics of the coupled `x` marginal against the solo walk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalReport {
    pub runs: usize,
    pub coupled_mean: f64,
    pub coupled_mean_se: f64,
    pub solo_mean: f64,
    pub solo_mean_se: f64,
    pub coupled_var: f64,
    pub coupled_var_se: f64,
    pub solo_var: f64,
    pub solo_var_se: f64,
}

impl MarginalReport {
    /// `|difference| / combined SE` for the means and the variances.
    pub fn zscores(&self) -> (f64, f64) {
        (
            (self.coupled_mean - self.solo_mean).abs() / self.coupled_mean_se.hypot(self.solo_mean_se),
            (self.coupled_var - self.solo_var).abs() / self.coupled_var_se.hypot(self.solo_var_se),
        )
    }
}

fn count_stats(counts: &[f64]) -> (f64, f64, f64, f64) {
    let (m, se) = mean_se(counts);
    let c: Vec<Complex64> = counts.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let (v, vse) = covariance_jackknife(&c, &c);
    (m, se, v.re, vse)
}

/// Number of jumps of `x` up to `t`, coupled to `y0` and on its own.
pub fn coupled_marginal_check(
    x0: &ParticleConfig,
    y0: &ParticleConfig,
    t: f64,
    runs: usize,
    seed: u64,
    exec: Exec,
) -> Result<MarginalReport> {
    let init = CoupledState::new(x0.clone(), y0.clone())?;
    let start = x0.boxes() as f64;
    let coupled = exec
        .map_runs(runs, |r| -> Result<f64> {
            let mut rng = substream(seed, "coupling-marginal", r as u64);
            let mut s = init.clone();
            s.advance_with(t, &mut rng, |_, _| Ok(()))?;
            Ok(s.x.boxes() as f64 - start)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let solo = exec
        .map_runs(runs, |r| -> Result<f64> {
            let mut rng = substream(seed, "coupling-solo", r as u64);
            let mut s = WalkerState::new(x0.clone());
            s.advance_to(t, &mut rng)?;
            Ok(s.config().boxes() as f64 - start)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (cm, cse, cv, cvse) = count_stats(&coupled);
    let (sm, sse, sv, svse) = count_stats(&solo);
    Ok(MarginalReport {
        runs,
        coupled_mean: cm,
        coupled_mean_se: cse,
        solo_mean: sm,
        solo_mean_se: sse,
        coupled_var: cv,
        coupled_var_se: cvse,
        solo_var: sv,
        solo_var_se: svse,
    })
}
