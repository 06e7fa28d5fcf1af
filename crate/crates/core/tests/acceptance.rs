//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances and sizes are fixed here.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nipw::coupling::{coupled_marginal_check, domination_test, extreme_particle_scan};
use nipw::dbm::{commuting_diagram_check, diagram_mc_leg, semicircle};
use nipw::exact_law::{charlier_density, exact_marginal_check, master_equation_law, enumerate_diagrams, YoungDiagram};
use nipw::fluctuations::{
    analytic_linear_statistic, clt_cov, clt_cov_characteristic, clt_mean, clt_mean_characteristic, martingale_qv,
    mc_clt_experiment, ContourLimit, FluctuationProbeSet, MCReport, PackedG0, RectContour, TestFunction,
};
use nipw::limit::{
    additivity_residual, in_omega, markov_krein_q, nu_t_density, nu_t_stieltjes_check, stieltjes_of, LimitField,
    MeasureRep, NuField, StieltjesTransform,
};
use nipw::rng::substream;
use nipw::stats::chi_square_gof;
use nipw::walker::{jump_weights, nekrasov_residual, simulate};
use nipw::{Complex64, Exec, ParticleConfig, WalkerState};
use rand::Rng;
use statrs::distribution::{Discrete, Poisson};

const SEED: u64 = 20_260_101;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn uniform() -> StieltjesTransform {
    stieltjes_of(&MeasureRep::uniform(0.0, 1.0).unwrap()).unwrap()
}

/// Random diagram with `n` rows, each gap up to `max_gap`.
fn random_config<R: Rng>(rng: &mut R, n: usize, theta: f64, max_gap: u64) -> ParticleConfig {
    let mut lambda = vec![0u64; n];
    for i in (0..n.saturating_sub(1)).rev() {
        lambda[i] = lambda[i + 1] + rng.random_range(0..=max_gap);
    }
    lambda[n - 1] = 0;
    ParticleConfig::new(theta, lambda).unwrap()
}

const THETAS: [f64; 4] = [0.5, 1.0, 2.0, 2.7];

fn c01_rate_sum() -> Outcome {
    let mut rng = substream(SEED, "acceptance-c01", 0);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.random_range(2..=200);
        let theta = THETAS[rng.random_range(0..4)];
        let cfg = random_config(&mut rng, n, theta, 3);
        let s: f64 = jump_weights(&cfg).iter().sum();
        worst = worst.max((s - n as f64).abs());
    }
    outcome(worst < 1e-9, format!("max |sum w - n| = {worst:.2e} (< 1e-9)"))
}

fn c02_nekrasov() -> Outcome {
    let mut rng = substream(SEED, "acceptance-c02", 0);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.random_range(2..=200);
        let theta = THETAS[rng.random_range(0..4)];
        let cfg = random_config(&mut rng, n, theta, 3);
        let im = rng.random_range(0.3..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let z = c(rng.random_range(-1.0..4.0), im);
        worst = worst.max(nekrasov_residual(&cfg, &jump_weights(&cfg), z).unwrap());
    }
    outcome(worst < 1e-10, format!("max residual = {worst:.2e} (< 1e-10)"))
}

fn c03_single_particle() -> Outcome {
    let (theta, t) = (1.0, 1.5);
    let pois = Poisson::new(theta * t).unwrap();
    let mut worst = 0.0f64;
    for k in 0..=20u64 {
        let p = charlier_density(&YoungDiagram::new(vec![k]).unwrap(), 1, theta, t).unwrap();
        worst = worst.max((p - pois.pmf(k)).abs());
    }
    let init = ParticleConfig::packed(1, theta).unwrap();
    let runs = 100_000;
    let counts = Exec::Parallel.map_runs(runs, |r| {
        let mut s = WalkerState::new(init.clone());
        s.advance_to(t, &mut substream(SEED, "acceptance-c03", r as u64)).unwrap();
        s.config().lambda()[0]
    });
    let kmax = 20;
    let mut observed = vec![0.0; kmax + 1];
    for k in counts {
        observed[(k as usize).min(kmax)] += 1.0;
    }
    let mut probs: Vec<f64> = (0..kmax as u64).map(|k| pois.pmf(k)).collect();
    probs.push(1.0 - probs.iter().sum::<f64>());
    let gof = chi_square_gof(&observed, &probs, runs as f64).unwrap();
    outcome(
        worst < 1e-12 && gof.p_value > 0.01,
        format!("pmf gap {worst:.2e} (< 1e-12); chi-square p = {:.3} (> 0.01, dof {})", gof.p_value, gof.dof),
    )
}

fn c04_exact_law() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, theta, t) in [(2usize, 1.0, 0.5), (3, 0.5, 0.5)] {
        let max_boxes = 12;
        let rep = exact_marginal_check(n, theta, t, max_boxes, 200_000, SEED, Exec::Parallel).unwrap();
        let oracle = master_equation_law(n, theta, t, max_boxes).unwrap();
        let gap = enumerate_diagrams(n, max_boxes)
            .iter()
            .zip(&oracle)
            .map(|(d, p)| (charlier_density(d, n, theta, t).unwrap() - p).abs())
            .fold(0.0, f64::max);
        let ok = rep.tv_distance < 0.01 + rep.truncation_tail && gap < 1e-6;
        pass &= ok;
        parts.push(format!(
            "n={n}: TV {:.4} (< {:.4}), master-equation gap {gap:.1e} (< 1e-6)",
            rep.tv_distance,
            0.01 + rep.truncation_tail
        ));
    }
    outcome(pass, parts.join("; "))
}

fn lln_sup(n: usize, probes: &FluctuationProbeSet, runs: usize) -> f64 {
    let m = uniform();
    let init = ParticleConfig::packed(n, 0.5).unwrap();
    let rep = mc_clt_experiment(&init, probes, &m, &PackedG0, runs, SEED ^ n as u64, Exec::Parallel).unwrap();
    // mean of g is n times the run-averaged deviation.
    rep.probes.iter().map(|p| p.mean.norm() / n as f64).fold(0.0, f64::max)
}

fn c05_lln() -> Outcome {
    let m = uniform();
    let mut pass = true;
    let mut parts = Vec::new();
    for t in [0.5, 1.0] {
        let probes = FluctuationProbeSet::new(vec![c(0.5, 1.5), c(1.0, 1.5), c(-0.25, 1.25), c(2.25, 1.25)], vec![t], &m, 0.5).unwrap();
        let (s100, s200) = (lln_sup(100, &probes, 1000), lln_sup(200, &probes, 1000));
        let ratio = s200 / s100;
        let ok = s200 < 5.0 / 200.0 && (0.35..=0.65).contains(&ratio);
        pass &= ok;
        parts.push(format!("t={t}: sup {s200:.2e} (< 2.5e-2), n=200/n=100 ratio {ratio:.3} (0.5 ± 30%)"));
    }
    outcome(pass, parts.join("; "))
}

fn c06_nu() -> Outcome {
    let mut mass_gap = 0.0f64;
    let mut resid = 0.0f64;
    for t in [0.25, 1.0, 4.0] {
        mass_gap = mass_gap.max((NuField::new(t).unwrap().mass() - 1.0).abs());
        for z in [c(0.5, 0.5), c(-1.0, 1.0), c(3.0, -0.7)] {
            resid = resid.max(nu_t_stieltjes_check(z, t).unwrap());
        }
    }
    let d = nu_t_density(0.75, 0.25);
    outcome(
        mass_gap < 1e-6 && resid < 1e-6 && (d - 0.5).abs() < 1e-12,
        format!("mass gap {mass_gap:.1e}, quadratic residual {resid:.1e} (< 1e-6), density(3/4; 1/4) = {d}"),
    )
}

fn c07_markov_krein() -> Outcome {
    let mu = MeasureRep::uniform(0.0, 1.0).unwrap();
    let z = c(1.0, 1.0);
    let err = |m: usize| (markov_krein_q(&mu, m).unwrap().stieltjes_jet(z).unwrap().value - (1.0 - z).inv()).norm();
    let (e1, e2) = (err(1000), err(2000));
    let ratio = e1 / e2;
    outcome(
        e1 < 0.01 && (1.4..=2.6).contains(&ratio),
        format!("error {e1:.2e} at m=1000 (< 0.01), halving ratio {ratio:.3} (2 ± 30%)"),
    )
}

fn c08_additivity() -> Outcome {
    let m0 = uniform();
    let t = 0.5;
    let mt = LimitField::new(&m0, t).unwrap();
    let mut worst = 0.0f64;
    for k in 0..20 {
        let phi = 0.2 + k as f64 * (2.0 * std::f64::consts::PI) / 20.0;
        let z = 0.6 * Complex64::from_polar(1.0, phi);
        let z = if z.im.abs() < 0.2 { c(z.re, 0.2f64.copysign(z.im)) } else { z };
        worst = worst.max(additivity_residual(&m0, &mt, t, z).unwrap());
    }
    outcome(worst < 1e-6, format!("max residual {worst:.2e} (< 1e-6) at 20 probes"))
}

/// Paired CLT runs shared by criteria 9 and 10.
struct CltRuns {
    theta: f64,
    small: MCReport,
    large: MCReport,
}

fn clt_runs() -> &'static [CltRuns] {
    static RUNS: OnceLock<Vec<CltRuns>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let m = uniform();
        let probes = FluctuationProbeSet::new(vec![c(1.0, 1.0), c(0.5, 0.7)], vec![0.25, 0.5], &m, 0.1).unwrap();
        [0.5, 1.0, 2.0]
            .iter()
            .map(|&theta| {
                let run = |n: usize| {
                    let init = ParticleConfig::packed(n, theta).unwrap();
                    mc_clt_experiment(&init, &probes, &m, &PackedG0, 2000, SEED + n as u64, Exec::Parallel).unwrap()
                };
                CltRuns { theta, small: run(100), large: run(200) }
            })
            .collect()
    })
}

fn c09_clt_mean() -> Outcome {
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut extrap = 0.0f64;
    for r in clt_runs() {
        for (a, b) in r.small.probes.iter().zip(&r.large.probes) {
            let chat = 200.0 * (a.mean - b.mean).norm();
            let allowed = 3.0 * a.se + chat / 100.0;
            let dev = (a.mean - a.theory).norm();
            pass &= dev < allowed;
            worst = worst.max(dev / allowed);
            if r.theta == 1.0 {
                // At theta = 1 the mean is g_0 / z_t'; Richardson removes the 1/n bias.
                let rich = 2.0 * b.mean - a.mean;
                let se = (4.0 * b.se * b.se + a.se * a.se).sqrt();
                let d = (rich - a.theory).norm();
                pass &= d < 3.0 * se;
                extrap = extrap.max(d / se);
            }
        }
    }
    outcome(
        pass,
        format!("worst |mean - mu| / (3 SE + C/n) = {worst:.3} (< 1); theta=1 extrapolated z-score max {extrap:.2} (< 3)"),
    )
}

fn c10_clt_cov() -> Outcome {
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut cross = false;
    let mut conj = false;
    for r in clt_runs() {
        let probes = &r.small.probes;
        for e in &r.small.covariances {
            if probes[e.a].probe.time == 0.25 && probes[e.b].probe.time == 0.5 {
                cross = true;
            }
            conj |= e.hermitian;
            pass &= e.zscore < 4.0;
            worst = worst.max(e.zscore);
            count += 1;
        }
    }
    outcome(
        pass && cross && conj,
        format!("{count} entries incl. cross-time and conjugate pairs; max z-score {worst:.2} (< 4)"),
    )
}

fn c11_qv() -> Outcome {
    let m = uniform();
    let (n, theta, t, z) = (100, 0.5, 0.5, c(1.0, 1.0));
    let init = ParticleConfig::packed(n, theta).unwrap();
    let curves = Exec::Parallel.map_runs(500, |r| {
        let (traj, _) = simulate(&init, t, &[], &mut substream(SEED, "acceptance-c11", r as u64)).unwrap();
        martingale_qv(&traj, z, &m, &[t]).unwrap()
    });
    let emp: Complex64 = curves.iter().map(|q| q.empirical[0]).sum::<Complex64>() / curves.len() as f64;
    let emp_abs: f64 = curves.iter().map(|q| q.empirical_abs[0]).sum::<f64>() / curves.len() as f64;
    let ratio = emp / curves[0].theory[0];
    let ratio_abs = emp_abs / curves[0].theory_abs[0];
    outcome(
        (ratio - 1.0).norm() <= 0.1 && (0.9..=1.1).contains(&ratio_abs),
        format!("ratio {ratio:.4} (|r - 1| <= 0.1); hermitian ratio {ratio_abs:.4} (in [0.9, 1.1])"),
    )
}

fn c12_diagram() -> Outcome {
    let mu0 = MeasureRep::uniform(0.0, 1.0).unwrap();
    let probes: Vec<Complex64> = (0..20)
        .map(|k| {
            let a = k as f64 * std::f64::consts::PI / 10.0;
            c(0.5 + 1.2 * a.cos(), 0.6 * a.sin().signum() * (0.5 + a.sin().abs()))
        })
        .collect();
    let rep = commuting_diagram_check(&mu0, 0.5, &probes).unwrap();
    let sc = semicircle(1.0, 0.25, 4001).unwrap();
    let mc = diagram_mc_leg(&sc, 200, 1.0, 0.5, 1e-3, c(1.0, 1.0), 8, SEED, Exec::Parallel).unwrap();
    outcome(
        rep.identity_residual < 1e-12 && rep.transform_residual < 1e-8 && mc.gap < 0.05,
        format!(
            "identity {:.1e} (< 1e-12), transform {:.1e} (< 1e-8), MC gap {:.4} (< 0.05)",
            rep.identity_residual, rep.transform_residual, mc.gap
        ),
    )
}

fn c13_coupling() -> Outcome {
    let (n, theta) = (5, 0.5);
    let x0 = ParticleConfig::packed(n, theta).unwrap();
    let y0 = ParticleConfig::new(theta, vec![2 * n as u64; n]).unwrap();
    let dom = domination_test(&x0, &y0, 1.0, 10_000, SEED, Exec::Parallel);
    let Ok(dom) = dom else {
        return outcome(false, format!("domination failed: {}", dom.unwrap_err()));
    };
    let marg = coupled_marginal_check(&x0, &y0, 1.0, 10_000, SEED, Exec::Parallel).unwrap();
    let (zm, zv) = marg.zscores();
    let small = coupled_marginal_check(
        &ParticleConfig::packed(3, 1.0).unwrap(),
        &ParticleConfig::new(1.0, vec![2, 1, 0]).unwrap(),
        0.5,
        10_000,
        SEED + 1,
        Exec::Parallel,
    )
    .unwrap();
    let (sm, sv) = small.zscores();
    outcome(
        dom.violations == 0 && zm < 4.0 && zv < 4.0 && sm < 4.0 && sv < 4.0,
        format!(
            "{} violations over {} runs; marginal z-scores mean {zm:.2}/{sm:.2}, variance {zv:.2}/{sv:.2} (< 4)",
            dom.violations, dom.runs
        ),
    )
}

fn c14_linear() -> Outcome {
    let m = uniform();
    let (theta, t) = (0.5, 0.5);
    let scan = extreme_particle_scan(&ParticleConfig::packed(100, theta).unwrap(), t, 2000, SEED, Exec::Parallel).unwrap();
    let contour = RectContour::enclosing(scan.suggested_c / theta).unwrap();
    let limit = ContourLimit::new(contour, t, &m).unwrap();
    let fs = [TestFunction::Power { k: 1 }, TestFunction::Power { k: 2 }];
    let moments = [0.5 + t, 1.0 / 3.0 + 2.0 * t + t * t];
    let run = |n: usize| {
        let init = ParticleConfig::packed(n, theta).unwrap();
        analytic_linear_statistic(&init, &fs, t, &limit, &PackedG0, Some(&moments), 2000, SEED + n as u64, Exec::Parallel)
            .unwrap()
    };
    let (a, b) = (run(100), run(200));
    let mut pass = a.outside == 0 && b.outside == 0;
    let mut parts = Vec::new();
    for (fa, fb) in a.functions.iter().zip(&b.functions) {
        let cm = 200.0 * (fa.mean - fb.mean).abs();
        let cv = 200.0 * (fa.variance - fb.variance).abs();
        let mean_ok = (fa.mean - fa.theory_mean).abs() < 3.0 * fa.mean_se + cm / 100.0;
        let var_ok = (fa.variance - fa.theory_variance).abs() < 3.0 * fa.variance_se + cv / 100.0;
        let gap_ok = fa.max_direct_contour_gap < 1e-6 && fb.max_direct_contour_gap < 1e-6;
        pass &= mean_ok && var_ok && gap_ok;
        parts.push(format!(
            "{:?}: mean {:.4} vs {:.4}, var {:.4} vs {:.4}, gap {:.1e}",
            fa.function, fa.mean, fa.theory_mean, fa.variance, fa.theory_variance, fa.max_direct_contour_gap
        ));
    }
    outcome(pass, format!("c = {:.3}; {}", scan.suggested_c, parts.join("; ")))
}

fn c15_cross_forms() -> Outcome {
    let m = uniform();
    let mut rng = substream(SEED, "acceptance-c15", 0);
    let mut worst = 0.0f64;
    let mut accepted = 0;
    let rel = |a: Complex64, b: Complex64| (a - b).norm() / a.norm().max(1.0);
    while accepted < 1000 {
        let sign = |r: &mut nipw::rng::SimRng| if r.random::<bool>() { 1.0 } else { -1.0 };
        let z = c(rng.random_range(-1.0..2.0), sign(&mut rng) * rng.random_range(0.3..2.0));
        let zp = c(rng.random_range(-1.0..2.0), sign(&mut rng) * rng.random_range(0.3..2.0));
        let (s, t) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let theta = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let h = f64::max(s, t);
        if !(in_omega(z, h, &m).unwrap() && in_omega(zp, h, &m).unwrap()) || (z - zp).norm() < 1e-2 {
            continue;
        }
        accepted += 1;
        worst = worst.max(rel(
            clt_mean(t, z, &m, &PackedG0, theta).unwrap(),
            clt_mean_characteristic(t, z, &m, &PackedG0, theta).unwrap(),
        ));
        worst = worst.max(rel(
            clt_cov(s, z, t, zp, &m, theta).unwrap(),
            clt_cov_characteristic(s, z, t, zp, &m, theta).unwrap(),
        ));
    }
    outcome(worst < 1e-10, format!("max relative gap {worst:.2e} (< 1e-10) over {accepted} probes"))
}

type Criterion = (u32, &'static str, u64, fn() -> Outcome);

const CRITERIA: [Criterion; 15] = [
    (1, "rate-sum identity", 10, c01_rate_sum),
    (2, "Nekrasov identity", 10, c02_nekrasov),
    (3, "exact law, n=1", 30, c03_single_particle),
    (4, "exact law, n=2,3", 300, c04_exact_law),
    (5, "law of large numbers", 300, c05_lln),
    (6, "nu_t closed form", 10, c06_nu),
    (7, "Markov-Krein map", 30, c07_markov_krein),
    (8, "quantized R additivity", 30, c08_additivity),
    (9, "CLT mean", 1800, c09_clt_mean),
    (10, "CLT covariance", 1800, c10_clt_cov),
    (11, "martingale QV", 600, c11_qv),
    (12, "commuting diagram", 600, c12_diagram),
    (13, "coupling", 300, c13_coupling),
    (14, "linear statistics", 1800, c14_linear),
    (15, "cross-form transcription", 10, c15_cross_forms),
];

fn main() {
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, budget, run) in CRITERIA {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(run);
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= Duration::from_secs(budget), o.detail),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {detail} [{:.1} s / {budget} s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
