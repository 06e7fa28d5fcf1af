//! Exact event-driven simulation of the beta-nonintersecting Poisson walk.
//!
//! Particle `i` jumps right by one at rate `theta * n * w_i` with
//! `w_i = prod_{j != i} (x_i - x_j + theta) / (x_i - x_j)`. The weights sum
//! to exactly `n`, so the total rate is the constant `theta n^2`: the
//! sampler draws an exponential clock and then a categorical index, with no
//! thinning.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{check_off_axis, Error, Result};
use crate::particles::{JumpEvent, ParticleConfig};

/// Full refresh of the weight cache every `REFRESH_PER_PARTICLE * n` events.
pub const REFRESH_PER_PARTICLE: usize = 1000;

/// Tolerated drift of `sum w` from `n` at a refresh before aborting.
pub const WEIGHT_DRIFT_LIMIT: f64 = 1e-6;

fn weight_of(config: &ParticleConfig, i: usize) -> f64 {
    if config.is_blocked(i) {
        return 0.0;
    }
    let theta = config.theta();
    let mut w = 1.0;
    for j in 0..config.n() {
        if j != i {
            let d = config.gap(i, j);
            w *= (d + theta) / d;
        }
    }
    w
}

/// `w_i` for every particle, with blocked particles set to exactly zero.
pub fn jump_weights(config: &ParticleConfig) -> Vec<f64> {
    (0..config.n()).map(|i| weight_of(config, i)).collect()
}

/// `prod_j (1 + (1/n) / (z - x_j/(theta n)))`.
pub fn nekrasov_product(config: &ParticleConfig, z: Complex64) -> Complex64 {
    let n = config.n() as f64;
    (0..config.n())
        .map(|j| 1.0 + (n * (z - config.rescaled_position(j))).inv())
        .product()
}

/// Residual of `sum_i w_i (1/n) / (x_i/(theta n) - z) = 1 - prod_j (1 + (1/n) / (z - x_j/(theta n)))`.
pub fn nekrasov_residual(config: &ParticleConfig, weights: &[f64], z: Complex64) -> Result<f64> {
    check_off_axis(z)?;
    let n = config.n() as f64;
    let lhs: Complex64 = weights
        .iter()
        .enumerate()
        .map(|(i, w)| *w / (n * (config.rescaled_position(i) - z)))
        .sum();
    Ok((lhs - (1.0 - nekrasov_product(config, z))).norm())
}

/// Bring `weights` (valid before the jump) in line with `config`, the
/// configuration after particle `i` moved right by one.
///
/// Only `w_i` and `w_{i+1}` can change blocking status; both are recomputed
/// from scratch. Every other weight picks up one rational factor.
pub fn update_weights_incremental(weights: &mut [f64], config: &ParticleConfig, i: usize) {
    let theta = config.theta();
    for (j, w) in weights.iter_mut().enumerate() {
        if j == i || j == i + 1 || *w == 0.0 {
            continue;
        }
        // d = x_j - x_i before the jump.
        let d = config.gap(j, i) + 1.0;
        *w *= ((d - 1.0 + theta) * d) / ((d - 1.0) * (d + theta));
    }
    weights[i] = weight_of(config, i);
    if i + 1 < weights.len() {
        weights[i + 1] = weight_of(config, i + 1);
    }
}

#[derive(Debug, Clone)]
pub struct WalkerState {
    config: ParticleConfig,
    clock: f64,
    weights: Vec<f64>,
    jumps: u64,
    since_refresh: usize,
    refresh_interval: usize,
}

impl WalkerState {
    pub fn new(config: ParticleConfig) -> Self {
        let weights = jump_weights(&config);
        let refresh_interval = REFRESH_PER_PARTICLE * config.n();
        Self {
            config,
            clock: 0.0,
            weights,
            jumps: 0,
            since_refresh: 0,
            refresh_interval,
        }
    }

    pub fn with_refresh_interval(mut self, events: usize) -> Self {
        self.refresh_interval = events.max(1);
        self
    }

    pub fn config(&self) -> &ParticleConfig {
        &self.config
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of jumps so far, `N_t`.
    pub fn jumps(&self) -> u64 {
        self.jumps
    }

    pub fn total_rate(&self) -> f64 {
        let n = self.config.n() as f64;
        self.config.theta() * n * n
    }

    /// Categorical draw with probabilities `w_i / n` from a uniform `u` in `[0, 1)`.
    pub fn select_particle(&self, u: f64) -> usize {
        let target = u * self.config.n() as f64;
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last_positive = i;
                if target < acc {
                    return i;
                }
            }
        }
        // Rounding left `target` just past the accumulated sum.
        last_positive
    }

    pub(crate) fn apply_jump(&mut self, i: usize) -> Result<()> {
        self.config.increment(i);
        self.jumps += 1;
        self.since_refresh += 1;
        if self.since_refresh >= self.refresh_interval {
            self.refresh()?;
        } else {
            update_weights_incremental(&mut self.weights, &self.config, i);
        }
        Ok(())
    }

    /// Replace the cache by a full recompute and check the rate-sum identity.
    pub fn refresh(&mut self) -> Result<()> {
        self.weights = jump_weights(&self.config);
        self.since_refresh = 0;
        let sum: f64 = self.weights.iter().sum();
        let n = self.config.n();
        if (sum - n as f64).abs() > WEIGHT_DRIFT_LIMIT {
            return Err(Error::WeightDrift { sum, n });
        }
        Ok(())
    }

    fn waiting_time<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = rng.sample(Exp1);
        e / self.total_rate()
    }

    /// One event: exponential waiting time, then a weighted particle.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<JumpEvent> {
        self.clock += self.waiting_time(rng);
        let i = self.select_particle(rng.random());
        self.apply_jump(i)?;
        Ok(JumpEvent { time: self.clock, particle: i })
    }

    /// Run until the clock reads `t`, calling `on_jump(event, state_after)`
    /// for each jump. The overshooting waiting time is discarded, which is
    /// exact because the total rate is constant.
    pub fn advance_with<R, F>(&mut self, t: f64, rng: &mut R, mut on_jump: F) -> Result<()>
    where
        R: Rng + ?Sized,
        F: FnMut(&JumpEvent, &ParticleConfig),
    {
        loop {
            let next = self.clock + self.waiting_time(rng);
            if next > t {
                self.clock = self.clock.max(t);
                return Ok(());
            }
            self.clock = next;
            let i = self.select_particle(rng.random());
            self.apply_jump(i)?;
            on_jump(&JumpEvent { time: next, particle: i }, &self.config);
        }
    }

    pub fn advance_to<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) -> Result<()> {
        self.advance_with(t, rng, |_, _| {})
    }
}

/// Full jump log of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub initial: ParticleConfig,
    pub horizon: f64,
    pub events: Vec<JumpEvent>,
    pub last: ParticleConfig,
}

impl Trajectory {
    /// Configuration right after each event, in order.
    pub fn replay(&self) -> impl Iterator<Item = (JumpEvent, ParticleConfig)> + '_ {
        let mut cfg = self.initial.clone();
        self.events.iter().map(move |e| {
            cfg.increment(e.particle);
            (*e, cfg.clone())
        })
    }

    /// CSV `event_index,time,particle,lambda_of_particle` with one-based
    /// particle labels and the row length after the jump.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["event_index", "time", "particle", "lambda_of_particle"])?;
        let mut lambda = self.initial.lambda().to_vec();
        for (k, e) in self.events.iter().enumerate() {
            lambda[e.particle] += 1;
            w.write_record(&[
                k.to_string(),
                format!("{:.17e}", e.time),
                (e.particle + 1).to_string(),
                lambda[e.particle].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Request to record the empirical Stieltjes transform at `probe` at `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationRequest {
    pub time: f64,
    pub probe: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub time: f64,
    pub probe: Complex64,
    pub m: Complex64,
    pub jumps: u64,
}

pub fn write_observations_csv<W: Write>(obs: &[Observation], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "probe_re", "probe_im", "m_re", "m_im"])?;
    for o in obs {
        w.write_record(&[
            format!("{:.17e}", o.time),
            format!("{:.17e}", o.probe.re),
            format!("{:.17e}", o.probe.im),
            format!("{:.17e}", o.m.re),
            format!("{:.17e}", o.m.im),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Simulate up to `horizon`, logging every jump and answering the
/// observation requests. An observation at time `t` sees every jump at
/// times `<= t` (right-continuous paths).
pub fn simulate<R: Rng + ?Sized>(
    config0: &ParticleConfig,
    horizon: f64,
    requests: &[ObservationRequest],
    rng: &mut R,
) -> Result<(Trajectory, Vec<Observation>)> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    for r in requests {
        check_off_axis(r.probe)?;
        if !(r.time >= 0.0 && r.time <= horizon) {
            return Err(Error::InvalidArgument(format!(
                "observation time {} outside [0, {horizon}]",
                r.time
            )));
        }
    }
    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.sort_by(|&a, &b| requests[a].time.total_cmp(&requests[b].time));

    let mut state = WalkerState::new(config0.clone());
    let mut events = Vec::new();
    let mut observations = vec![None; requests.len()];
    let mut next_req = 0;

    let observe = |state: &WalkerState, k: usize| Observation {
        time: requests[k].time,
        probe: requests[k].probe,
        m: state.config().stieltjes_unchecked(requests[k].probe),
        jumps: state.jumps(),
    };

    loop {
        let next = state.clock + state.waiting_time(rng);
        while next_req < order.len() && requests[order[next_req]].time < next.min(horizon + f64::MIN_POSITIVE)
        {
            let k = order[next_req];
            observations[k] = Some(observe(&state, k));
            next_req += 1;
        }
        if next > horizon {
            break;
        }
        state.clock = next;
        let i = state.select_particle(rng.random());
        state.apply_jump(i)?;
        events.push(JumpEvent { time: next, particle: i });
    }
    while next_req < order.len() {
        let k = order[next_req];
        observations[k] = Some(observe(&state, k));
        next_req += 1;
    }
    let trajectory = Trajectory {
        initial: config0.clone(),
        horizon,
        events,
        last: state.config().clone(),
    };
    Ok((trajectory, observations.into_iter().map(|o| o.expect("all requests answered")).collect()))
}
