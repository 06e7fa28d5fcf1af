//! Gaussian fluctuations of the empirical Stieltjes transform around its
//! hydrodynamic limit, and the Monte Carlo harness that measures them.

pub mod clt;
pub mod experiment;
pub mod linear;
pub mod martingale;

pub use clt::{
    clt_cov, clt_cov_characteristic, clt_mean, clt_mean_characteristic, g_field, sigma_diagonal, Anchor, PackedG0,
};
pub use experiment::{mc_clt_experiment, CovarianceEntry, FluctuationProbeSet, MCReport, Probe, ProbeSummary};
pub use martingale::{jump_increment, martingale_path, martingale_qv, qv_theory, qv_theory_hermitian, qv_theory_pair, QvCurve};
pub use linear::{
    analytic_linear_statistic, linear_statistic_direct, ContourLimit, LinearStatReport, LinearStatSummary, RectContour,
    TestFunction,
};
