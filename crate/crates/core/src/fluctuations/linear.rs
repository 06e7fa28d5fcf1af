//! Linear statistics `n int f d(mu^n_t - mu_t)` through contour integrals
//! of the fluctuation field.
//!
//! With `m(w) = int dmu(x) / (x - w)`, a clockwise contour around the
//! support gives `(1/(2 pi i)) oint m(w) f(w) dw = int f dmu`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::clt::{mean_from_jet, sigma_from_anchors, Anchor};
use crate::error::{Error, Result};
use crate::limit::quadrature::{composite, DEFAULT_NODES, PANEL_ORDER};
use crate::limit::{characteristic_inverse, AnalyticField};
use crate::parallel::Exec;
use crate::particles::ParticleConfig;
use crate::rng::substream;
use crate::stats::{covariance_jackknife, mean_se};
use crate::walker::WalkerState;

/// Largest tolerated fraction of samples with a particle outside the contour.
pub const MAX_OUTSIDE_FRACTION: f64 = 1e-3;

/// Margin between the particle window `[0, c/theta]` and the contour.
pub const CONTOUR_MARGIN: f64 = 0.2;
pub const CONTOUR_HALF_HEIGHT: f64 = 0.5;

/// Analytic test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum TestFunction {
    /// `x^k`.
    Power { k: u32 },
}

impl TestFunction {
    pub fn eval(&self, w: Complex64) -> Complex64 {
        match self {
            TestFunction::Power { k } => w.powu(*k),
        }
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        match self {
            TestFunction::Power { k } => x.powi(*k as i32),
        }
    }
}

/// Rectangle traversed clockwise, discretized by composite Gauss–Legendre
/// on each side. Nodes carry `(w, dw)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RectContour {
    left: f64,
    right: f64,
    half_height: f64,
    nodes: Vec<(Complex64, Complex64)>,
}

impl RectContour {
    pub fn new(left: f64, right: f64, half_height: f64, total_nodes: usize) -> Result<Self> {
        if !(right > left && half_height > 0.0) {
            return Err(Error::InvalidArgument("degenerate contour".into()));
        }
        let (lo, hi) = (Complex64::new(left, -half_height), Complex64::new(right, half_height));
        let corners = [
            Complex64::new(lo.re, hi.im),
            hi,
            Complex64::new(hi.re, lo.im),
            lo,
            Complex64::new(lo.re, hi.im),
        ];
        let perimeter = 2.0 * (right - left) + 4.0 * half_height;
        let mut nodes = Vec::with_capacity(total_nodes);
        for side in corners.windows(2) {
            let (a, b) = (side[0], side[1]);
            let len = (b - a).norm();
            // Even panel counts keep nodes off the real axis on vertical sides.
            let mut panels = ((total_nodes as f64 * len / perimeter) / PANEL_ORDER as f64).round().max(2.0) as usize;
            panels += panels % 2;
            for (s, w) in composite(0.0, 1.0, panels, PANEL_ORDER) {
                nodes.push((a + s * (b - a), w * (b - a)));
            }
        }
        Ok(Self { left, right, half_height, nodes })
    }

    /// Corners `(-0.2 -+ 0.5i, c/theta + 0.2 +- 0.5i)` around `[0, c/theta]`.
    pub fn enclosing(c_over_theta: f64) -> Result<Self> {
        Self::new(-CONTOUR_MARGIN, c_over_theta + CONTOUR_MARGIN, CONTOUR_HALF_HEIGHT, DEFAULT_NODES)
    }

    pub fn nodes(&self) -> &[(Complex64, Complex64)] {
        &self.nodes
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn half_height(&self) -> f64 {
        self.half_height
    }

    /// Real point `x` strictly inside.
    pub fn encloses(&self, x: f64) -> bool {
        x > self.left && x < self.right
    }

    /// `(1/(2 pi i)) oint f(w) dw`.
    pub fn integrate<F: FnMut(Complex64) -> Result<Complex64>>(&self, mut f: F) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(w, dw) in &self.nodes {
            acc += f(w)? * dw;
        }
        Ok(acc / Complex64::new(0.0, 2.0 * PI))
    }
}

/// Contour nodes pulled back along the characteristics at time `t`.
#[derive(Debug, Clone)]
pub struct ContourLimit {
    contour: RectContour,
    t: f64,
    /// Per node: anchor at `z = z_t^{-1}(w)`; `m_t(w) = m_0(z)`.
    anchors: Vec<Anchor>,
}

impl ContourLimit {
    pub fn new<F: AnalyticField + ?Sized>(contour: RectContour, t: f64, m0: &F) -> Result<Self> {
        let anchors = contour
            .nodes
            .iter()
            .map(|&(w, _)| Anchor::new(characteristic_inverse(w, t, m0)?, m0))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { contour, t, anchors })
    }

    pub fn contour(&self) -> &RectContour {
        &self.contour
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    fn weights(&self, f: TestFunction) -> Vec<Complex64> {
        let scale = Complex64::new(0.0, 2.0 * PI).inv();
        self.contour.nodes.iter().map(|&(w, dw)| f.eval(w) * dw * scale).collect()
    }

    /// `int f dmu_t`.
    pub fn limit_integral(&self, f: TestFunction) -> f64 {
        self.weights(f).iter().zip(&self.anchors).map(|(c, a)| c * a.jet.value).sum::<Complex64>().re
    }

    /// `(1/(2 pi i)) oint mu(t, z_t^{-1}(w)) f(w) dw`.
    pub fn mean<G: AnalyticField + ?Sized>(&self, f: TestFunction, g0: &G, theta: f64) -> Result<f64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, a) in self.weights(f).iter().zip(&self.anchors) {
            acc += c * mean_from_jet(self.t, &a.jet, g0.value(a.z)?, theta);
        }
        Ok(acc.re)
    }

    /// `-(1/(4 pi^2)) oint oint sigma(s, z_s^{-1}(w), t, z_t^{-1}(w')) f(w) h(w') dw dw'`
    /// with `s` the time of `self` and `t` that of `other`.
    pub fn covariance(&self, f: TestFunction, other: &ContourLimit, h: TestFunction, theta: f64) -> f64 {
        let (cf, ch) = (self.weights(f), other.weights(h));
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, wa) in self.anchors.iter().zip(&cf) {
            let mut row = Complex64::new(0.0, 0.0);
            for (b, wb) in other.anchors.iter().zip(&ch) {
                row += wb * sigma_from_anchors(self.t, a, other.t, b, theta);
            }
            acc += wa * row;
        }
        acc.re
    }

    /// `(1/(2 pi i)) oint g^n_t(w) f(w) dw` for one configuration.
    pub fn statistic(&self, config: &ParticleConfig, f: TestFunction) -> f64 {
        self.statistics(config, &[f])[0]
    }

    /// As [`Self::statistic`] for several functions, sharing the field
    /// evaluation at the nodes.
    pub fn statistics(&self, config: &ParticleConfig, fs: &[TestFunction]) -> Vec<f64> {
        let n = config.n() as f64;
        let field: Vec<Complex64> = self
            .anchors
            .iter()
            .zip(&self.contour.nodes)
            .map(|(a, &(w, _))| n * (config.stieltjes_unchecked(w) - a.jet.value))
            .collect();
        fs.iter()
            .map(|&f| self.weights(f).iter().zip(&field).map(|(c, g)| c * g).sum::<Complex64>().re)
            .collect()
    }
}

/// `sum_i f(x_i / (theta n)) - n * limit_integral`.
pub fn linear_statistic_direct(config: &ParticleConfig, f: TestFunction, limit_integral: f64) -> f64 {
    let n = config.n();
    (0..n).map(|i| f.eval_real(config.rescaled_position(i))).sum::<f64>() - n as f64 * limit_integral
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearStatSummary {
    pub function: TestFunction,
    pub limit_integral: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub theory_mean: f64,
    pub theory_variance: f64,
    /// Largest `|direct - contour|` over the retained samples.
    pub max_direct_contour_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearStatReport {
    pub n: usize,
    pub theta: f64,
    pub t: f64,
    pub runs: usize,
    pub outside: usize,
    pub functions: Vec<LinearStatSummary>,
    /// `theory_covariance[j][k] = cov[F_j(t), F_k(t)]`.
    pub theory_covariance: Vec<Vec<f64>>,
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

/// Monte Carlo of the linear statistics of `fs` at time `t`.
///
/// `limit_integrals[j] = int f_j dmu_t` for the direct evaluation; when
/// `None` they come from the contour. Samples with a particle outside
/// the contour are dropped and counted.
#[allow(clippy::too_many_arguments)]
pub fn analytic_linear_statistic<G>(
    init: &ParticleConfig,
    fs: &[TestFunction],
    t: f64,
    limit: &ContourLimit,
    g0: &G,
    limit_integrals: Option<&[f64]>,
    runs: usize,
    seed: u64,
    exec: Exec,
) -> Result<LinearStatReport>
where
    G: AnalyticField + ?Sized,
{
    if (limit.t - t).abs() > 0.0 {
        return Err(Error::InvalidArgument("contour limit was built for a different time".into()));
    }
    let theta = init.theta();
    let integrals: Vec<f64> = match limit_integrals {
        Some(v) if v.len() == fs.len() => v.to_vec(),
        Some(_) => return Err(Error::InvalidArgument("one limit integral per function".into())),
        None => fs.iter().map(|&f| limit.limit_integral(f)).collect(),
    };
    let contour = limit.contour();
    let results = exec.map_runs(runs, |r| -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let mut rng = substream(seed, "linear-statistic", r as u64);
        let mut state = WalkerState::new(init.clone());
        state.advance_to(t, &mut rng)?;
        let cfg = state.config();
        let (hi, lo) = (cfg.rescaled_position(0), cfg.rescaled_position(cfg.n() - 1));
        if !contour.encloses(hi) || !contour.encloses(lo) {
            return Ok(None);
        }
        let direct = fs.iter().zip(&integrals).map(|(&f, &i)| linear_statistic_direct(cfg, f, i)).collect();
        let via = limit.statistics(cfg, fs);
        Ok(Some((direct, via)))
    });
    let mut samples = Vec::with_capacity(runs);
    let mut gaps = vec![0.0f64; fs.len()];
    let mut outside = 0;
    for r in results {
        match r? {
            Some((direct, via)) => {
                for (g, (d, v)) in gaps.iter_mut().zip(direct.iter().zip(&via)) {
                    *g = g.max((d - v).abs());
                }
                samples.push(direct);
            }
            None => outside += 1,
        }
    }
    if outside as f64 > MAX_OUTSIDE_FRACTION * runs as f64 {
        return Err(Error::OutsideContour { position: contour.right() });
    }
    let mut functions = Vec::with_capacity(fs.len());
    let mut theory_covariance = vec![vec![0.0; fs.len()]; fs.len()];
    for (j, &f) in fs.iter().enumerate() {
        for (k, &h) in fs.iter().enumerate().skip(j) {
            let c = limit.covariance(f, limit, h, theta);
            theory_covariance[j][k] = c;
            theory_covariance[k][j] = c;
        }
    }
    for (j, &f) in fs.iter().enumerate() {
        let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        let (mean, mean_se) = mean_se(&col);
        let cc: Vec<Complex64> = col.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let (var, variance_se) = covariance_jackknife(&cc, &cc);
        functions.push(LinearStatSummary {
            function: f,
            limit_integral: integrals[j],
            mean,
            mean_se,
            variance: var.re,
            variance_se,
            theory_mean: limit.mean(f, g0, theta)?,
            theory_variance: theory_covariance[j][j],
            max_direct_contour_gap: gaps[j],
        });
    }
    Ok(LinearStatReport { n: init.n(), theta, t, runs, outside, functions, theory_covariance, samples })
}
