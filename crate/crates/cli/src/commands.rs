use nipw::coupling::{coupled_marginal_check, domination_test, extreme_particle_scan};
use nipw::dbm::{commuting_diagram_check, diagram_mc_leg};
use nipw::exact_law::exact_marginal_check;
use nipw::fluctuations::{mc_clt_experiment, FluctuationProbeSet, PackedG0};
use nipw::limit::inversion::default_eta;
use nipw::limit::{characteristic_inverse, limit_stieltjes, stieltjes_inversion, stieltjes_of, LimitField, MeasureRep};
use nipw::rng::substream;
use nipw::walker::{simulate, write_observations_csv, ObservationRequest};
use nipw::Exec;
use serde::Serialize;

use crate::config::{complex, Params, RunConfig};
use crate::{Failure, Outcome, Sink};

pub fn execute(cfg: &RunConfig, exec: Exec, sink: &mut Sink) -> Result<Outcome, Failure> {
    let seed = cfg.seed;
    let mut out = Outcome::default();
    match &cfg.params {
        Params::Simulate(p) => {
            let init = p.model.to_config()?;
            let requests: Vec<ObservationRequest> = p
                .observe
                .iter()
                .flat_map(|o| {
                    o.times.iter().flat_map(|&time| o.points.iter().map(move |&z| ObservationRequest { time, probe: complex(z) }))
                })
                .collect();
            let mut rng = substream(seed, "simulate", 0);
            let (traj, obs) = simulate(&init, p.horizon, &requests, &mut rng)?;
            sink.write("trajectory.csv", |w| traj.write_csv(w))?;
            if !requests.is_empty() {
                sink.write("observations.csv", |w| write_observations_csv(&obs, w))?;
            }
            out.field("events", traj.events.len());
        }
        Params::ExactCheck(p) => {
            let report = exact_marginal_check(p.n, p.theta, p.horizon, p.max_boxes, p.runs, seed, exec)?;
            sink.json("exact_check.json", &report)?;
            sink.write("exact_check.csv", |w| {
                let mut c = csv::Writer::from_writer(w);
                c.write_record(["lambda", "p_exact", "p_empirical"])?;
                for row in &report.per_state {
                    let lambda: Vec<String> = row.lambda.iter().map(u64::to_string).collect();
                    c.write_record(&[lambda.join(" "), format!("{:.17e}", row.p_exact), format!("{:.17e}", row.p_empirical)])?;
                }
                c.flush()?;
                Ok(())
            })?;
            let allowed = p.tv_tolerance + report.truncation_tail;
            out.field("tv", format!("{:.6e}", report.tv_distance));
            out.field("tv_allowed", format!("{allowed:.6e}"));
            out.require(report.tv_distance <= allowed, format!("TV {} exceeds {allowed}", report.tv_distance));
        }
        Params::Limit(p) => {
            let mu0 = p.mu0.build(&cfg.base_dir)?;
            let m0 = stieltjes_of(&mu0)?;
            let mut rows = Vec::with_capacity(p.points.len());
            for &w in &p.points {
                let w = complex(w);
                rows.push((w, characteristic_inverse(w, p.horizon, &m0)?, limit_stieltjes(w, p.horizon, &m0)?));
            }
            sink.write("limit.csv", |w| {
                let mut c = csv::Writer::from_writer(w);
                c.write_record(["w_re", "w_im", "z_re", "z_im", "m_re", "m_im"])?;
                for (w, z, m) in &rows {
                    c.write_record([w.re, w.im, z.re, z.im, m.re, m.im].map(|v| format!("{v:.17e}")))?;
                }
                c.flush()?;
                Ok(())
            })?;
            if let Some(d) = &p.density {
                let eta = d.eta.unwrap_or_else(|| default_eta(d.points));
                let xs: Vec<f64> = (0..d.points).map(|k| d.lo + (d.hi - d.lo) * k as f64 / (d.points - 1) as f64).collect();
                let density: Vec<f64> = if p.horizon == 0.0 {
                    xs.iter().map(|&x| stieltjes_inversion(&m0, x, eta)).collect::<nipw::Result<_>>()?
                } else {
                    let field = LimitField::new(m0.clone(), p.horizon)?;
                    xs.iter().map(|&x| stieltjes_inversion(&field, x, eta)).collect::<nipw::Result<_>>()?
                };
                sink.write("density.csv", |w| {
                    let mut c = csv::Writer::from_writer(w);
                    c.write_record(["x", "density"])?;
                    for (x, d) in xs.iter().zip(&density) {
                        c.write_record([format!("{x:.17e}"), format!("{d:.17e}")])?;
                    }
                    c.flush()?;
                    Ok(())
                })?;
                out.field("eta", format!("{eta:.3e}"));
            }
            out.field("points", rows.len());
        }
        Params::Clt(p) => {
            let init = p.model.to_config()?;
            let m0 = stieltjes_of(&MeasureRep::uniform(0.0, 1.0)?)?;
            let base = p.probes.base.iter().map(|&z| complex(z)).collect();
            let probes = FluctuationProbeSet::new(base, p.probes.times.clone(), &m0, p.probes.eta_min)?;
            let report = mc_clt_experiment(&init, &probes, &m0, &PackedG0, p.runs, seed, exec)?;
            sink.write("clt_report.csv", |w| report.write_csv(w))?;
            sink.write("clt_report.json", |w| report.write_json(w))?;
            let mean_z = report.probes.iter().map(|s| s.zscore).fold(0.0, f64::max);
            let cov_z = report.covariances.iter().map(|c| c.zscore).fold(0.0, f64::max);
            out.field("max_mean_z", format!("{mean_z:.3}"));
            out.field("max_cov_z", format!("{cov_z:.3}"));
            out.require(mean_z < p.tolerances.mean_z, format!("mean z-score {mean_z:.3} >= {}", p.tolerances.mean_z));
            out.require(cov_z < p.tolerances.cov_z, format!("covariance z-score {cov_z:.3} >= {}", p.tolerances.cov_z));
        }
        Params::DbmCompare(p) => {
            #[derive(Serialize)]
            struct Report {
                diagram: nipw::dbm::DiagramReport,
                mc: Option<nipw::dbm::McLegReport>,
            }
            let mu0 = p.mu0.build(&cfg.base_dir)?;
            let points: Vec<_> = p.points.iter().map(|&z| complex(z)).collect();
            let diagram = commuting_diagram_check(&mu0, p.horizon, &points)?;
            let mc = match &p.mc {
                Some(m) => Some(diagram_mc_leg(&mu0, m.n, m.theta, p.horizon, m.dt, complex(m.w), m.runs, seed, exec)?),
                None => None,
            };
            let tol = &p.tolerances;
            out.field("identity", format!("{:.3e}", diagram.identity_residual));
            out.field("transform", format!("{:.3e}", diagram.transform_residual));
            out.require(diagram.identity_residual <= tol.identity, "characteristic identity residual");
            out.require(diagram.transform_residual <= tol.transform, "transform residual");
            if let Some(m) = &mc {
                out.field("mc_gap", format!("{:.3e}", m.gap));
                out.require(m.gap <= tol.mc, format!("DBM vs walk gap {:.3e} > {}", m.gap, tol.mc));
            }
            sink.json("dbm_compare.json", &Report { diagram, mc })?;
        }
        Params::Couple(p) => {
            #[derive(Serialize)]
            struct Report {
                domination: nipw::coupling::CouplingReport,
                marginal: Option<nipw::coupling::MarginalReport>,
            }
            let (x0, y0) = p.configs().map_err(|e| Failure::Schema(e.to_string()))?;
            let domination = domination_test(&x0, &y0, p.horizon, p.runs, seed, exec)?;
            let marginal =
                if p.marginal { Some(coupled_marginal_check(&x0, &y0, p.horizon, p.runs, seed, exec)?) } else { None };
            out.field("violations", domination.violations);
            out.require(domination.violations == 0, "domination violated");
            if let Some(m) = &marginal {
                let (zm, zv) = m.zscores();
                out.field("marginal_z", format!("{:.3}", zm.max(zv)));
                out.require(zm.max(zv) < 4.0, format!("coupled marginal z-score {:.3} >= 4", zm.max(zv)));
            }
            sink.json("couple.json", &Report { domination, marginal })?;
        }
        Params::Scan(p) => {
            let init = p.model.to_config()?;
            let report = extreme_particle_scan(&init, p.horizon, p.runs, seed, exec)?;
            out.field("max_x1_over_n", format!("{:.6}", report.max_x1_over_n));
            out.field("suggested_c", format!("{:.6}", report.suggested_c));
            sink.json("scan.json", &report)?;
        }
    }
    Ok(out)
}
