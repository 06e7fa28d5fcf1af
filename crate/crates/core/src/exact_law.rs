//! Fixed-time law of the walk started from the empty diagram.
//!
//! The closed form is
//! `P_t(lambda) = e^{-theta t n^2} (theta t n)^{|lambda|}
//!   prod_box (theta n + a' - theta l') / ((a + theta l + theta)(a + theta l + 1))`
//! with arm `a`, leg `l`, co-arm `a'` and co-leg `l'` of each box. An
//! independent oracle exponentiates the truncated generator matrix.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{DiscreteCDF, Poisson};

use crate::error::{Error, Result};
use crate::parallel::Exec;
use crate::particles::ParticleConfig;
use crate::rng::substream;
use crate::walker::{jump_weights, WalkerState};

/// Largest Poisson tail of the total jump count accepted by the check.
pub const MAX_TRUNCATION_TAIL: f64 = 1e-4;

/// Products switch to log space above this many boxes.
const LOG_SPACE_BOXES: u64 = 30;

/// A partition with positive, nonincreasing rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct YoungDiagram {
    rows: Vec<u64>,
}

/// One box `(i, j)` (one-based row and column) with its hook data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxData {
    pub row: u64,
    pub col: u64,
    pub arm: u64,
    pub leg: u64,
    pub coarm: u64,
    pub coleg: u64,
}

impl YoungDiagram {
    /// Build from a nonincreasing list; trailing zeros are dropped.
    pub fn new(mut rows: Vec<u64>) -> Result<Self> {
        if rows.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(format!("rows must be nonincreasing: {rows:?}")));
        }
        while rows.last() == Some(&0) {
            rows.pop();
        }
        Ok(Self { rows })
    }

    pub fn empty() -> Self {
        Self { rows: Vec::new() }
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// `|lambda|`.
    pub fn size(&self) -> u64 {
        self.rows.iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let width = self.rows.first().copied().unwrap_or(0);
        let cols = (1..=width)
            .map(|j| self.rows.iter().filter(|&&r| r >= j).count() as u64)
            .collect();
        Self { rows: cols }
    }

    pub fn boxes(&self) -> Vec<BoxData> {
        let t = self.transpose();
        let mut out = Vec::with_capacity(self.size() as usize);
        for (i0, &len) in self.rows.iter().enumerate() {
            let i = i0 as u64 + 1;
            for j in 1..=len {
                out.push(BoxData {
                    row: i,
                    col: j,
                    arm: len - j,
                    leg: t.rows[j as usize - 1] - i,
                    coarm: j - 1,
                    coleg: i - 1,
                });
            }
        }
        out
    }

    /// Row lengths padded with zeros to `n` entries.
    pub fn to_lambda(&self, n: usize) -> Vec<u64> {
        let mut l = self.rows.clone();
        l.resize(n.max(l.len()), 0);
        l
    }
}

/// Probability of `diagram` at time `t` from the empty start.
pub fn charlier_density(diagram: &YoungDiagram, n: usize, theta: f64, t: f64) -> Result<f64> {
    if diagram.num_rows() > n {
        return Err(Error::InvalidArgument(format!(
            "diagram has {} rows but only {n} particles",
            diagram.num_rows()
        )));
    }
    if !(t > 0.0 && theta > 0.0) {
        return Err(Error::InvalidArgument("need t > 0 and theta > 0".into()));
    }
    let nf = n as f64;
    let factor = |b: &BoxData| {
        let (a, l) = (b.arm as f64, b.leg as f64);
        (theta * nf + b.coarm as f64 - theta * b.coleg as f64) / ((a + theta * l + theta) * (a + theta * l + 1.0))
    };
    let size = diagram.size();
    let boxes = diagram.boxes();
    if size > LOG_SPACE_BOXES {
        let log = -theta * t * nf * nf
            + size as f64 * (theta * t * nf).ln()
            + boxes.iter().map(|b| factor(b).ln()).sum::<f64>();
        Ok(log.exp())
    } else {
        let prod: f64 = boxes.iter().map(factor).product();
        Ok((-theta * t * nf * nf).exp() * (theta * t * nf).powi(size as i32) * prod)
    }
}

/// All diagrams with at most `n` rows and at most `max_boxes` boxes,
/// by increasing size, reverse-lexicographic within a size.
pub fn enumerate_diagrams(n: usize, max_boxes: u64) -> Vec<YoungDiagram> {
    fn rec(remaining: u64, max_part: u64, rows_left: usize, prefix: &mut Vec<u64>, out: &mut Vec<YoungDiagram>) {
        if remaining == 0 {
            out.push(YoungDiagram { rows: prefix.clone() });
            return;
        }
        if rows_left == 0 {
            return;
        }
        for part in (1..=max_part.min(remaining)).rev() {
            prefix.push(part);
            rec(remaining - part, part, rows_left - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for size in 0..=max_boxes {
        rec(size, size, n, &mut Vec::new(), &mut out);
    }
    out
}

/// `P(N > max_boxes)` for `N ~ Poisson(theta n^2 t)`.
pub fn truncation_tail(n: usize, theta: f64, t: f64, max_boxes: u64) -> f64 {
    let rate = theta * (n * n) as f64 * t;
    match Poisson::new(rate) {
        Ok(p) => (1.0 - p.cdf(max_boxes)).max(0.0),
        Err(_) => 0.0,
    }
}

fn required_boxes(n: usize, theta: f64, t: f64) -> usize {
    (0u64..).find(|&k| truncation_tail(n, theta, t, k) < MAX_TRUNCATION_TAIL).unwrap() as usize
}

/// Law at time `t` on `enumerate_diagrams(n, max_boxes)`, from
/// `p(t) = p(0) exp(t G)` with `G` the generator restricted to the
/// enumerated diagrams. Jumps leaving the set are absorbed.
pub fn master_equation_law(n: usize, theta: f64, t: f64, max_boxes: u64) -> Result<Vec<f64>> {
    let states = enumerate_diagrams(n, max_boxes);
    let index: HashMap<Vec<u64>, usize> = states.iter().enumerate().map(|(k, d)| (d.to_lambda(n), k)).collect();
    let dim = states.len();
    let mut g = DMatrix::<f64>::zeros(dim, dim);
    for (k, d) in states.iter().enumerate() {
        let cfg = ParticleConfig::new(theta, d.to_lambda(n))?;
        let w = jump_weights(&cfg);
        for (i, wi) in w.iter().enumerate() {
            if *wi == 0.0 {
                continue;
            }
            let rate = theta * n as f64 * wi;
            g[(k, k)] -= rate;
            let mut target = d.to_lambda(n);
            target[i] += 1;
            if let Some(&dst) = index.get(&target) {
                g[(k, dst)] += rate;
            }
        }
    }
    let p = (g * t).exp();
    // Row 0 is the empty diagram.
    Ok(p.row(0).iter().cloned().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateRow {
    pub lambda: Vec<u64>,
    pub p_exact: f64,
    pub p_empirical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactCheckReport {
    pub tv_distance: f64,
    pub truncation_tail: f64,
    pub runs: usize,
    /// Empirical mass outside the enumerated set.
    pub overflow: f64,
    pub per_state: Vec<StateRow>,
}

impl ExactCheckReport {
    /// Observed counts and exact probabilities per enumerated state.
    pub fn counts_and_probabilities(&self) -> (Vec<f64>, Vec<f64>) {
        let counts = self.per_state.iter().map(|r| (r.p_empirical * self.runs as f64).round()).collect();
        let probs = self.per_state.iter().map(|r| r.p_exact).collect();
        (counts, probs)
    }
}

/// Simulate `runs` walks from the empty diagram to time `t` and compare
/// the endpoint histogram with the closed form.
pub fn exact_marginal_check(
    n: usize,
    theta: f64,
    t: f64,
    max_boxes: u64,
    runs: usize,
    seed: u64,
    exec: Exec,
) -> Result<ExactCheckReport> {
    let tail = truncation_tail(n, theta, t, max_boxes);
    if tail > MAX_TRUNCATION_TAIL {
        return Err(Error::TruncationTail { tail, required: required_boxes(n, theta, t) });
    }
    let start = ParticleConfig::packed(n, theta)?;
    let finals = exec.map_runs(runs, |r| -> Result<Vec<u64>> {
        let mut rng = substream(seed, "exact-law", r as u64);
        let mut s = WalkerState::new(start.clone());
        s.advance_to(t, &mut rng)?;
        Ok(s.config().lambda().to_vec())
    });
    let mut hist: HashMap<Vec<u64>, usize> = HashMap::new();
    for f in finals {
        *hist.entry(f?).or_default() += 1;
    }
    let mut per_state = Vec::new();
    let mut inside = 0usize;
    let mut tv = 0.0;
    let mut exact_mass = 0.0;
    for d in enumerate_diagrams(n, max_boxes) {
        let lambda = d.to_lambda(n);
        let count = hist.get(&lambda).copied().unwrap_or(0);
        inside += count;
        let p_exact = charlier_density(&d, n, theta, t)?;
        let p_empirical = count as f64 / runs as f64;
        exact_mass += p_exact;
        tv += (p_exact - p_empirical).abs();
        per_state.push(StateRow { lambda, p_exact, p_empirical });
    }
    let overflow = (runs - inside) as f64 / runs as f64;
    tv += ((1.0 - exact_mass).max(0.0) - overflow).abs();
    Ok(ExactCheckReport { tv_distance: 0.5 * tv, truncation_tail: tail, runs, overflow, per_state })
}
