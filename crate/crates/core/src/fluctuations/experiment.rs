//! Monte Carlo estimation of the fluctuation field along characteristics.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use super::clt::{mean_from_jet, sigma_from_anchors, Anchor};
use crate::error::{Error, Result};
use crate::limit::{characteristic_forward, in_omega, AnalyticField};
use crate::parallel::Exec;
use crate::particles::ParticleConfig;
use crate::rng::substream;
use crate::stats::{complex_mean_se, covariance_jackknife, hermitian_covariance};
use crate::walker::WalkerState;

/// Base points `z_j` and times `t_i`; the field is sampled at `z_{t_i}(z_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationProbeSet {
    base: Vec<Complex64>,
    times: Vec<f64>,
    eta_min: f64,
    /// `sites[i][j] = z_{t_i}(z_j)`.
    sites: Vec<Vec<Complex64>>,
}

/// One entry of the probe set, flattened time-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub time: f64,
    pub base: Complex64,
    pub site: Complex64,
}

impl FluctuationProbeSet {
    pub fn new<F: AnalyticField + ?Sized>(base: Vec<Complex64>, times: Vec<f64>, m0: &F, eta_min: f64) -> Result<Self> {
        if times.is_empty() || base.is_empty() {
            return Err(Error::InvalidArgument("probe set needs times and base points".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
            return Err(Error::InvalidArgument(format!("times must increase from 0: {times:?}")));
        }
        let horizon = *times.last().unwrap();
        for &z in &base {
            if !in_omega(z, horizon, m0)? {
                return Err(Error::InvalidArgument(format!("base point {z} is outside Omega_{horizon}")));
            }
        }
        let sites = times
            .iter()
            .map(|&t| base.iter().map(|&z| characteristic_forward(z, t, m0)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        if let Some(w) = sites.iter().flatten().find(|w| w.im.abs() < eta_min) {
            return Err(Error::InvalidArgument(format!("site {w} is closer than {eta_min} to the axis")));
        }
        Ok(Self { base, times, eta_min, sites })
    }

    pub fn base(&self) -> &[Complex64] {
        &self.base
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn eta_min(&self) -> f64 {
        self.eta_min
    }

    pub fn len(&self) -> usize {
        self.base.len() * self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn probes(&self) -> Vec<Probe> {
        self.times
            .iter()
            .zip(&self.sites)
            .flat_map(|(&time, row)| {
                self.base.iter().zip(row).map(move |(&base, &site)| Probe { time, base, site })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSummary {
    pub probe: Probe,
    pub mean: Complex64,
    pub se: f64,
    pub theory: Complex64,
    /// `|mean - theory| / se`.
    pub zscore: f64,
}

/// Covariance between probes `a` and `b`, pseudo (`E[g_a g_b]`) or
/// Hermitian (`E[g_a conj g_b]`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceEntry {
    pub a: usize,
    pub b: usize,
    pub hermitian: bool,
    pub estimate: Complex64,
    pub se: f64,
    pub theory: Complex64,
    pub zscore: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCReport {
    pub n: usize,
    pub theta: f64,
    pub runs: usize,
    pub probes: Vec<ProbeSummary>,
    pub covariances: Vec<CovarianceEntry>,
    /// Hermitian sample covariance matrix of the probe vector.
    pub covariance_matrix: Vec<Vec<Complex64>>,
    #[serde(skip)]
    samples: Vec<Vec<Complex64>>,
}

impl MCReport {
    /// Per-run values of `g` at every probe.
    pub fn samples(&self) -> &[Vec<Complex64>] {
        &self.samples
    }

    pub fn probe_samples(&self, k: usize) -> Vec<Complex64> {
        self.samples.iter().map(|s| s[k]).collect()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// CSV `probe,t,mean_re,mean_im,se,theory_re,theory_im,zscore`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["probe", "t", "mean_re", "mean_im", "se", "theory_re", "theory_im", "zscore"])?;
        for (k, p) in self.probes.iter().enumerate() {
            w.write_record(&[
                k.to_string(),
                format!("{:.17e}", p.probe.time),
                format!("{:.17e}", p.mean.re),
                format!("{:.17e}", p.mean.im),
                format!("{:.17e}", p.se),
                format!("{:.17e}", p.theory.re),
                format!("{:.17e}", p.theory.im),
                format!("{:.17e}", p.zscore),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Run `runs` walks from the deterministic `init`, record
/// `g^n_t(z_t(z)) = n (m^n_t(z_t(z)) - m_0(z))` at every probe, and
/// compare with `mu(t, z)` and `sigma`.
#[allow(clippy::too_many_arguments)]
pub fn mc_clt_experiment<F, G>(
    init: &ParticleConfig,
    probes: &FluctuationProbeSet,
    m0: &F,
    g0: &G,
    runs: usize,
    seed: u64,
    exec: Exec,
) -> Result<MCReport>
where
    F: AnalyticField + ?Sized,
    G: AnalyticField + ?Sized,
{
    if runs < 2 {
        return Err(Error::InvalidArgument("need at least two runs".into()));
    }
    let theta = init.theta();
    let n = init.n() as f64;
    let flat = probes.probes();
    let anchors = probes.base.iter().map(|&z| Anchor::new(z, m0)).collect::<Result<Vec<_>>>()?;
    let nb = probes.base.len();
    // m_t(z_t(z)) = m_0(z) along every characteristic.
    let limit: Vec<Complex64> = (0..flat.len()).map(|k| anchors[k % nb].jet.value).collect();

    let samples = exec.map_runs(runs, |r| -> Result<Vec<Complex64>> {
        let mut rng = substream(seed, "clt", r as u64);
        let mut state = WalkerState::new(init.clone());
        let mut g = Vec::with_capacity(flat.len());
        for (i, &t) in probes.times.iter().enumerate() {
            state.advance_to(t, &mut rng)?;
            for (j, &w) in probes.sites[i].iter().enumerate() {
                g.push(n * (state.config().empirical_stieltjes(w)? - limit[i * nb + j]));
            }
        }
        Ok(g)
    });
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;

    let mut summaries = Vec::with_capacity(flat.len());
    for (k, p) in flat.iter().enumerate() {
        let a = &anchors[k % nb];
        let theory = mean_from_jet(p.time, &a.jet, g0.value(p.base)?, theta);
        let column: Vec<Complex64> = samples.iter().map(|s| s[k]).collect();
        let (mean, se) = complex_mean_se(&column);
        summaries.push(ProbeSummary { probe: *p, mean, se, theory, zscore: (mean - theory).norm() / se });
    }

    let mut covariances = Vec::new();
    for a in 0..flat.len() {
        for b in a..flat.len() {
            let (pa, pb) = (&flat[a], &flat[b]);
            let (aa, ab) = (&anchors[a % nb], &anchors[b % nb]);
            let ca: Vec<Complex64> = samples.iter().map(|s| s[a]).collect();
            let cb: Vec<Complex64> = samples.iter().map(|s| s[b]).collect();
            let cbc: Vec<Complex64> = cb.iter().map(|z| z.conj()).collect();
            for hermitian in [false, true] {
                let (estimate, se) = covariance_jackknife(&ca, if hermitian { &cbc } else { &cb });
                let other = if hermitian { ab.conj() } else { *ab };
                let theory = sigma_from_anchors(pa.time, aa, pb.time, &other, theta);
                covariances.push(CovarianceEntry {
                    a,
                    b,
                    hermitian,
                    estimate,
                    se,
                    theory,
                    zscore: (estimate - theory).norm() / se,
                });
            }
        }
    }
    let covariance_matrix = hermitian_covariance(&samples);
    Ok(MCReport {
        n: init.n(),
        theta,
        runs,
        probes: summaries,
        covariances,
        covariance_matrix,
        samples,
    })
}
