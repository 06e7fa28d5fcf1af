//! Exact simulation, hydrodynamic limit and Gaussian fluctuations of
//! beta-nonintersecting Poisson random walks.
//!
//! Particles live at `x_i = lambda_i + (n-1-i) theta` (zero-based `i`) with
//! `lambda` a Young diagram; the empirical measure puts mass `1/n` at each
//! rescaled position `x_i / (theta n)`.

pub mod coupling;
pub mod dbm;
pub mod error;
pub mod exact_law;
pub mod fluctuations;
pub mod limit;
pub mod parallel;
pub mod particles;
pub mod rng;
pub mod stats;
pub mod walker;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use parallel::Exec;
pub use particles::{ComplexProbeGrid, EmpiricalMeasure, InitialData, JumpEvent, ParticleConfig};
pub use walker::{Trajectory, WalkerState};
