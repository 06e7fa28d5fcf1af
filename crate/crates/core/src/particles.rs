//! Exact particle configurations on the shifted lattice.
//!
//! A configuration is stored as an integer Young diagram `lambda` together
//! with `theta`; the positions `x_i = lambda_i + (n - 1 - i) * theta`
//! (zero-based `i`) are recomputed on demand so that blocking is always an
//! exact integer comparison.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_off_axis, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleConfig {
    theta: f64,
    lambda: Vec<u64>,
}

impl ParticleConfig {
    pub fn new(theta: f64, lambda: Vec<u64>) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidConfig(format!("theta must be positive, got {theta}")));
        }
        if lambda.is_empty() {
            return Err(Error::InvalidConfig("at least one particle is required".into()));
        }
        if let Some(i) = (1..lambda.len()).find(|&i| lambda[i] > lambda[i - 1]) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be nonincreasing: lambda[{}] = {} < lambda[{}] = {}",
                i - 1,
                lambda[i - 1],
                i,
                lambda[i]
            )));
        }
        Ok(Self { theta, lambda })
    }

    /// Densely packed configuration `lambda = 0`, i.e. `x_i = (n - 1 - i) theta`.
    pub fn packed(n: usize, theta: f64) -> Result<Self> {
        Self::new(theta, vec![0; n])
    }

    /// Lattice configuration closest to the rescaled locations `targets`
    /// (nonincreasing, in units of `theta * n`), rounded row by row and
    /// clamped so the diagram stays valid.
    pub fn from_rescaled_locations(theta: f64, targets: &[f64]) -> Result<Self> {
        let n = targets.len();
        let scale = theta * n as f64;
        let mut lambda = vec![0u64; n];
        for i in (0..n).rev() {
            let raw = targets[i] * scale - (n - 1 - i) as f64 * theta;
            let mut li = if raw.is_finite() && raw > 0.0 { raw.round() as u64 } else { 0 };
            if i + 1 < n {
                li = li.max(lambda[i + 1]);
            }
            lambda[i] = li;
        }
        Self::new(theta, lambda)
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> &[u64] {
        &self.lambda
    }

    /// Total number of boxes `|lambda|`.
    pub fn boxes(&self) -> u64 {
        self.lambda.iter().sum()
    }

    /// Position `x_i` (zero-based).
    #[inline]
    pub fn position(&self, i: usize) -> f64 {
        self.lambda[i] as f64 + (self.n() - 1 - i) as f64 * self.theta
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.position(i)).collect()
    }

    /// `x_i / (theta n)`, the atom location in the empirical measure.
    #[inline]
    pub fn rescaled_position(&self, i: usize) -> f64 {
        self.position(i) / (self.theta * self.n() as f64)
    }

    /// Difference `x_i - x_j` formed from the integer gap and the integer
    /// multiplier of `theta`.
    #[inline]
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        let dl = self.lambda[i] as i64 - self.lambda[j] as i64;
        dl as f64 + (j as i64 - i as i64) as f64 * self.theta
    }

    /// Particle `i` cannot jump because the one above it sits exactly `theta` away.
    #[inline]
    pub fn is_blocked(&self, i: usize) -> bool {
        i > 0 && self.lambda[i] == self.lambda[i - 1]
    }

    pub(crate) fn increment(&mut self, i: usize) {
        debug_assert!(!self.is_blocked(i), "blocked particle {i} cannot jump");
        self.lambda[i] += 1;
    }

    pub fn empirical_measure(&self) -> EmpiricalMeasure {
        let w = 1.0 / self.n() as f64;
        EmpiricalMeasure {
            atoms: (0..self.n()).map(|i| (self.rescaled_position(i), w)).collect(),
        }
    }

    /// `(1/n) sum_i 1 / (x_i/(theta n) - z)`.
    pub fn empirical_stieltjes(&self, z: Complex64) -> Result<Complex64> {
        check_off_axis(z)?;
        Ok(self.stieltjes_unchecked(z))
    }

    #[inline]
    pub(crate) fn stieltjes_unchecked(&self, z: Complex64) -> Complex64 {
        let n = self.n();
        let scale = 1.0 / (self.theta * n as f64);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            acc += (Complex64::new(self.position(i) * scale, 0.0) - z).inv();
        }
        acc / n as f64
    }

    /// `(1/n) sum_i ln(x_i/(theta n) - z)`, principal branch per atom.
    pub fn empirical_log_potential(&self, z: Complex64) -> Result<Complex64> {
        check_off_axis(z)?;
        let n = self.n();
        let sum: Complex64 = (0..n)
            .map(|i| (Complex64::new(self.rescaled_position(i), 0.0) - z).ln())
            .sum();
        Ok(sum / n as f64)
    }
}

/// Uniform atoms at the rescaled positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    /// `(location, weight)`, locations nonincreasing.
    pub atoms: Vec<(f64, f64)>,
}

impl EmpiricalMeasure {
    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        check_off_axis(z)?;
        Ok(self
            .atoms
            .iter()
            .map(|&(x, w)| w * (Complex64::new(x, 0.0) - z).inv())
            .sum())
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }
}

/// Evaluation sites kept a fixed distance away from the real axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexProbeGrid {
    points: Vec<Complex64>,
    eta_min: f64,
}

impl ComplexProbeGrid {
    pub fn new(points: Vec<Complex64>, eta_min: f64) -> Result<Self> {
        if !(eta_min > 0.0) {
            return Err(Error::InvalidArgument("eta_min must be positive".into()));
        }
        if let Some(z) = points.iter().find(|z| !(z.im.abs() >= eta_min)) {
            return Err(Error::InvalidArgument(format!(
                "probe {z} is closer than {eta_min} to the real axis"
            )));
        }
        Ok(Self { points, eta_min })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn eta_min(&self) -> f64 {
        self.eta_min
    }
}

/// One jump: `particle` (zero-based) moved right by one at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub particle: usize,
}

/// Initial data as read from JSON: `{"n": 3, "theta": 1.0, "lambda": [2, 1, 0] | "packed"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub n: usize,
    pub theta: f64,
    pub lambda: LambdaSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Explicit(Vec<u64>),
    Keyword(LambdaKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaKeyword {
    Packed,
}

impl InitialData {
    pub fn is_packed(&self) -> bool {
        match &self.lambda {
            LambdaSpec::Keyword(LambdaKeyword::Packed) => true,
            LambdaSpec::Explicit(l) => l.iter().all(|&v| v == 0),
        }
    }

    pub fn to_config(&self) -> Result<ParticleConfig> {
        match &self.lambda {
            LambdaSpec::Keyword(LambdaKeyword::Packed) => ParticleConfig::packed(self.n, self.theta),
            LambdaSpec::Explicit(l) => {
                if l.len() != self.n {
                    return Err(Error::InvalidConfig(format!(
                        "lambda has {} entries but n = {}",
                        l.len(),
                        self.n
                    )));
                }
                ParticleConfig::new(self.theta, l.clone())
            }
        }
    }
}
