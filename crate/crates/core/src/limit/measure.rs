//! Probability measures on the line and their Stieltjes transforms.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{AnalyticField, Jet};
use super::quadrature::legendre_rule;
use crate::error::{check_off_axis, Error, Result};

const MASS_TOL: f64 = 1e-10;
const CELL_ORDER: usize = 8;
/// Cells closer to `z` than this many widths use the closed form.
const NEAR_CELLS: f64 = 4.0;
const TAIL_SLACK: f64 = 8.0 * f64::EPSILON;

/// A probability measure: weighted atoms, the uniform law on `[a, b]`, or a
/// piecewise-linear density on a grid (zero outside it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasureRep {
    Atoms { locations: Vec<f64>, weights: Vec<f64> },
    Uniform { a: f64, b: f64 },
    Grid { grid: Vec<f64>, density: Vec<f64> },
}

impl MeasureRep {
    pub fn atoms(locations: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let m = MeasureRep::Atoms { locations, weights };
        m.validate()?;
        Ok(m)
    }

    pub fn dirac(x: f64) -> Self {
        MeasureRep::Atoms { locations: vec![x], weights: vec![1.0] }
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        let m = MeasureRep::Uniform { a, b };
        m.validate()?;
        Ok(m)
    }

    pub fn grid(grid: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        let m = MeasureRep::Grid { grid, density };
        m.validate()?;
        Ok(m)
    }

    /// Tabulate `f` on `points` equispaced nodes of `[lo, hi]` and normalize.
    pub fn from_density<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points < 2 || !(hi > lo) {
            return Err(Error::InvalidArgument("grid needs two or more points on a proper interval".into()));
        }
        let h = (hi - lo) / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|k| lo + k as f64 * h).collect();
        let mut density: Vec<f64> = grid.iter().map(|&x| f(x).max(0.0)).collect();
        let mass = trapezoid_mass(&grid, &density);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidArgument("density has no mass on the grid".into()));
        }
        density.iter_mut().for_each(|d| *d /= mass);
        Self::grid(grid, density)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            MeasureRep::Atoms { locations, weights } => {
                if locations.len() != weights.len() || locations.is_empty() {
                    return bad("atoms need matching, nonempty location and weight lists".into());
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || locations.iter().any(|x| !x.is_finite()) {
                    return bad("atom weights must be nonnegative and locations finite".into());
                }
            }
            MeasureRep::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && b > a) {
                    return bad(format!("uniform law needs a < b, got [{a}, {b}]"));
                }
            }
            MeasureRep::Grid { grid, density } => {
                if grid.len() != density.len() || grid.len() < 2 {
                    return bad("grid and density need matching lengths of at least two".into());
                }
                if grid.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("grid must be strictly increasing".into());
                }
                if density.iter().any(|d| !(*d >= 0.0)) {
                    return bad("density must be nonnegative".into());
                }
            }
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return bad(format!("total mass {mass} differs from 1"));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            MeasureRep::Atoms { weights, .. } => weights.iter().sum(),
            MeasureRep::Uniform { .. } => 1.0,
            MeasureRep::Grid { grid, density } => trapezoid_mass(grid, density),
        }
    }

    /// Supremum of the density; infinite when atoms are present.
    pub fn max_density(&self) -> f64 {
        match self {
            MeasureRep::Atoms { .. } => f64::INFINITY,
            MeasureRep::Uniform { a, b } => 1.0 / (b - a),
            MeasureRep::Grid { density, .. } => density.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Smallest closed interval carrying the measure.
    pub fn support(&self) -> (f64, f64) {
        match self {
            MeasureRep::Atoms { locations, weights } => locations
                .iter()
                .zip(weights)
                .filter(|(_, w)| **w > 0.0)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| (lo.min(*x), hi.max(*x))),
            MeasureRep::Uniform { a, b } => (*a, *b),
            MeasureRep::Grid { grid, .. } => (grid[0], grid[grid.len() - 1]),
        }
    }

    /// Image under `x -> -x`.
    pub fn reflect(&self) -> Self {
        match self {
            MeasureRep::Atoms { locations, weights } => MeasureRep::Atoms {
                locations: locations.iter().map(|x| -x).collect(),
                weights: weights.clone(),
            },
            MeasureRep::Uniform { a, b } => MeasureRep::Uniform { a: -b, b: -a },
            MeasureRep::Grid { grid, density } => MeasureRep::Grid {
                grid: grid.iter().rev().map(|x| -x).collect(),
                density: density.iter().rev().cloned().collect(),
            },
        }
    }

    /// `int x^k dmu` for `k = 1, 2`, used in sanity checks.
    pub fn moment(&self, k: i32) -> f64 {
        match self {
            MeasureRep::Atoms { locations, weights } => {
                locations.iter().zip(weights).map(|(x, w)| w * x.powi(k)).sum()
            }
            MeasureRep::Uniform { a, b } => (b.powi(k + 1) - a.powi(k + 1)) / ((k + 1) as f64 * (b - a)),
            MeasureRep::Grid { grid, density } => {
                let rule = legendre_rule(CELL_ORDER);
                let mut s = 0.0;
                for c in 0..grid.len() - 1 {
                    let (x0, x1) = (grid[c], grid[c + 1]);
                    let (d0, d1) = (density[c], density[c + 1]);
                    let h = x1 - x0;
                    for &(u, w) in &rule {
                        let x = x0 + 0.5 * h * (u + 1.0);
                        let d = d0 + (d1 - d0) * 0.5 * (u + 1.0);
                        s += 0.5 * h * w * d * x.powi(k);
                    }
                }
                s
            }
        }
    }

    /// Tail mass `mu([y, infinity))`, as a reusable closure.
    pub fn tail_function(&self) -> Box<dyn Fn(f64) -> f64 + '_> {
        match self {
            MeasureRep::Atoms { locations, weights } => Box::new(move |y| {
                locations.iter().zip(weights).filter(|(x, _)| **x >= y).map(|(_, w)| w).sum()
            }),
            MeasureRep::Uniform { a, b } => Box::new(move |y| ((b - y) / (b - a)).clamp(0.0, 1.0)),
            MeasureRep::Grid { grid, density } => {
                // Cumulative mass from the right end, cell by cell.
                let cells = grid.len() - 1;
                let mut right = vec![0.0; grid.len()];
                for c in (0..cells).rev() {
                    right[c] = right[c + 1] + 0.5 * (grid[c + 1] - grid[c]) * (density[c] + density[c + 1]);
                }
                Box::new(move |y| {
                    if y <= grid[0] {
                        return right[0];
                    }
                    if y >= grid[cells] {
                        return 0.0;
                    }
                    let c = grid.partition_point(|&g| g <= y) - 1;
                    let h = grid[c + 1] - grid[c];
                    let s = (y - grid[c]) / h;
                    let (d0, d1) = (density[c], density[c + 1]);
                    let dy = d0 + (d1 - d0) * s;
                    right[c + 1] + 0.5 * (grid[c + 1] - y) * (dy + d1)
                })
            }
        }
    }

    /// Quantile atoms `y_1 > ... > y_m` with `mu([y_i, inf)) = (i - 1/2)/m`,
    /// found by bisection; flat stretches resolve to their leftmost point.
    pub fn quantiles(&self, m: usize) -> Vec<f64> {
        let tail = self.tail_function();
        let (lo0, hi0) = self.support();
        (1..=m)
            .map(|i| {
                let target = (i as f64 - 0.5) / m as f64;
                let (mut lo, mut hi) = (lo0 - 1.0, hi0 + 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    // Slack absorbs rounding in the cumulative sums so
                    // plateaus resolve to their left end.
                    if tail(mid) <= target + TAIL_SLACK {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            })
            .collect()
    }

    pub fn stieltjes_jet(&self, z: Complex64) -> Result<Jet> {
        check_off_axis(z)?;
        Ok(match self {
            MeasureRep::Atoms { locations, weights } => {
                let mut j = zero_jet();
                for (x, w) in locations.iter().zip(weights) {
                    accumulate_kernel(&mut j, *x, *w, z);
                }
                j
            }
            MeasureRep::Uniform { a, b } => {
                let (ra, rb) = ((z - a).inv(), (z - b).inv());
                let s = 1.0 / (b - a);
                Jet {
                    value: s * ((b - z).ln() - (a - z).ln()),
                    d1: s * (rb - ra),
                    d2: s * (ra * ra - rb * rb),
                    d3: s * 2.0 * (rb * rb * rb - ra * ra * ra),
                }
            }
            MeasureRep::Grid { grid, density } => {
                let rule = legendre_rule(CELL_ORDER);
                let mut j = zero_jet();
                for c in 0..grid.len() - 1 {
                    let (x0, x1) = (grid[c], grid[c + 1]);
                    let (d0, d1) = (density[c], density[c + 1]);
                    if d0 == 0.0 && d1 == 0.0 {
                        continue;
                    }
                    let h = x1 - x0;
                    if (z - 0.5 * (x0 + x1)).norm() < NEAR_CELLS * h {
                        linear_cell(&mut j, x0, x1, d0, d1, z);
                        continue;
                    }
                    for &(u, w) in &rule {
                        let s = 0.5 * (u + 1.0);
                        accumulate_kernel(&mut j, x0 + h * s, 0.5 * h * w * (d0 + (d1 - d0) * s), z);
                    }
                }
                j
            }
        })
    }

    /// CSV with header `location,weight` (atoms) or `grid_point,density`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let (header, xs, ys): (_, Vec<f64>, Vec<f64>) = match self {
            MeasureRep::Atoms { locations, weights } => (["location", "weight"], locations.clone(), weights.clone()),
            MeasureRep::Uniform { a, b } => {
                let d = 1.0 / (b - a);
                (["grid_point", "density"], vec![*a, *b], vec![d, d])
            }
            MeasureRep::Grid { grid, density } => (["grid_point", "density"], grid.clone(), density.clone()),
        };
        w.write_record(header)?;
        for (x, y) in xs.iter().zip(&ys) {
            w.write_record(&[format!("{x:.17e}"), format!("{y:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad numeric field in row {:?}", rec)))
            };
            xs.push(parse(0)?);
            ys.push(parse(1)?);
        }
        match names.as_slice() {
            ["location", "weight"] => Self::atoms(xs, ys),
            ["grid_point", "density"] => Self::grid(xs, ys),
            other => Err(Error::InvalidArgument(format!("unknown measure header {other:?}"))),
        }
    }
}

fn trapezoid_mass(grid: &[f64], density: &[f64]) -> f64 {
    grid.windows(2)
        .zip(density.windows(2))
        .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
        .sum()
}

fn zero_jet() -> Jet {
    let z = Complex64::new(0.0, 0.0);
    Jet { value: z, d1: z, d2: z, d3: z }
}

/// Exact `int_{x0}^{x1} rho(x) / (x - z) dx` for linear `rho`, with derivatives.
fn linear_cell(j: &mut Jet, x0: f64, x1: f64, d0: f64, d1: f64, z: Complex64) {
    let h = x1 - x0;
    let k = (d1 - d0) / h;
    // L = log((x1 - z) / (x0 - z)); both arguments share a half-plane.
    let q = h / (x0 - z);
    let l = if q.norm() < 1e-3 {
        q * (1.0 - q * (0.5 - q * (1.0 / 3.0 - q * (0.25 - q * 0.2))))
    } else {
        (1.0 + q).ln()
    };
    let (r0, r1) = ((z - x0).inv(), (z - x1).inv());
    let l1 = r1 - r0;
    let l2 = r0 * r0 - r1 * r1;
    let l3 = 2.0 * (r1 * r1 * r1 - r0 * r0 * r0);
    let a = d0 + k * (z - x0);
    j.value += a * l + k * h;
    j.d1 += k * l + a * l1;
    j.d2 += 2.0 * k * l1 + a * l2;
    j.d3 += 3.0 * k * l2 + a * l3;
}

#[inline]
fn accumulate_kernel(j: &mut Jet, x: f64, w: f64, z: Complex64) {
    let r = (x - z).inv();
    let r2 = r * r;
    j.value += w * r;
    j.d1 += w * r2;
    j.d2 += 2.0 * w * r2 * r;
    j.d3 += 6.0 * w * r2 * r2;
}

/// Stieltjes transform `int dmu(x) / (x - z)` of a validated measure.
#[derive(Debug, Clone)]
pub struct StieltjesTransform {
    measure: MeasureRep,
}

impl StieltjesTransform {
    pub fn measure(&self) -> &MeasureRep {
        &self.measure
    }
}

impl AnalyticField for StieltjesTransform {
    fn jet(&self, z: Complex64) -> Result<Jet> {
        self.measure.stieltjes_jet(z)
    }
}

pub fn stieltjes_of(measure: &MeasureRep) -> Result<StieltjesTransform> {
    measure.validate()?;
    Ok(StieltjesTransform { measure: measure.clone() })
}
