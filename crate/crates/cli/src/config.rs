//! Run configuration: `{"command": ..., "seed": ..., <command fields>}`.
//!
//! The command fields are deserialized into a per-command struct that
//! rejects unknown keys; errors carry the JSON path of the offending field.

use std::path::{Path, PathBuf};

use nipw::limit::MeasureRep;
use nipw::particles::{InitialData, LambdaSpec};
use nipw::{Complex64, ParticleConfig};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    ExactCheck,
    Limit,
    Clt,
    DbmCompare,
    Couple,
    Scan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::ExactCheck => "exact-check",
            Command::Limit => "limit",
            Command::Clt => "clt",
            Command::DbmCompare => "dbm-compare",
            Command::Couple => "couple",
            Command::Scan => "scan",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Command::Simulate,
            Command::ExactCheck,
            Command::Limit,
            Command::Clt,
            Command::DbmCompare,
            Command::Couple,
            Command::Scan,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }
}

/// A complex number written as `[re, im]`.
pub type Point = [f64; 2];

pub fn complex(p: Point) -> Complex64 {
    Complex64::new(p[0], p[1])
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observe {
    pub times: Vec<f64>,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub model: InitialData,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub observe: Option<Observe>,
}

fn default_max_boxes() -> u64 {
    12
}

fn default_tv() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactCheckParams {
    pub n: usize,
    pub theta: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_max_boxes")]
    pub max_boxes: u64,
    pub runs: usize,
    #[serde(default = "default_tv")]
    pub tv_tolerance: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum MeasureSpec {
    Uniform { a: f64, b: f64 },
    Semicircle { centre: f64, variance: f64 },
    Csv { path: PathBuf },
}

/// Grid points used to tabulate a semicircle density.
const SEMICIRCLE_POINTS: usize = 4001;

impl MeasureSpec {
    pub fn build(&self, base: &Path) -> nipw::Result<MeasureRep> {
        match self {
            MeasureSpec::Uniform { a, b } => MeasureRep::uniform(*a, *b),
            MeasureSpec::Semicircle { centre, variance } => nipw::dbm::semicircle(*centre, *variance, SEMICIRCLE_POINTS),
            MeasureSpec::Csv { path } => MeasureRep::read_csv(std::fs::File::open(base.join(path))?),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    #[serde(default)]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitParams {
    pub mu0: MeasureSpec,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub points: Vec<Point>,
    #[serde(default)]
    pub density: Option<DensityGrid>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub base: Vec<Point>,
    pub times: Vec<f64>,
    #[serde(default = "default_eta_min")]
    pub eta_min: f64,
}

fn default_eta_min() -> f64 {
    0.1
}

fn default_z() -> f64 {
    4.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltTolerances {
    #[serde(default = "default_z")]
    pub mean_z: f64,
    #[serde(default = "default_z")]
    pub cov_z: f64,
}

impl Default for CltTolerances {
    fn default() -> Self {
        Self { mean_z: default_z(), cov_z: default_z() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltParams {
    pub model: InitialData,
    pub probes: ProbeSpec,
    pub runs: usize,
    #[serde(default)]
    pub tolerances: CltTolerances,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McLegSpec {
    pub n: usize,
    pub theta: f64,
    pub dt: f64,
    pub w: Point,
    pub runs: usize,
}

fn default_identity() -> f64 {
    1e-12
}

fn default_transform() -> f64 {
    1e-8
}

fn default_mc() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagramTolerances {
    #[serde(default = "default_identity")]
    pub identity: f64,
    #[serde(default = "default_transform")]
    pub transform: f64,
    #[serde(default = "default_mc")]
    pub mc: f64,
}

impl Default for DiagramTolerances {
    fn default() -> Self {
        Self { identity: default_identity(), transform: default_transform(), mc: default_mc() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbmCompareParams {
    pub mu0: MeasureSpec,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub points: Vec<Point>,
    #[serde(default)]
    pub mc: Option<McLegSpec>,
    #[serde(default)]
    pub tolerances: DiagramTolerances,
}

/// Upper initial data: explicit rows, `"packed"`, or the lower data shifted.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum UpperSpec {
    Shift { shift: u64 },
    Lambda(LambdaSpec),
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleParams {
    pub model: InitialData,
    pub upper: UpperSpec,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub runs: usize,
    #[serde(default = "default_true")]
    pub marginal: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanParams {
    pub model: InitialData,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub runs: usize,
}

#[derive(Debug, Clone)]
pub enum Params {
    Simulate(SimulateParams),
    ExactCheck(ExactCheckParams),
    Limit(LimitParams),
    Clt(CltParams),
    DbmCompare(DbmCompareParams),
    Couple(CoupleParams),
    Scan(ScanParams),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub params: Params,
    /// Directory of the config file, for relative paths inside it.
    pub base_dir: PathBuf,
}

/// A schema violation with the JSON path of the field at fault.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn schema(path: &str, message: impl Into<String>) -> SchemaError {
    SchemaError { path: path.to_string(), message: message.into() }
}

fn typed<T: DeserializeOwned>(v: Value) -> Result<T, SchemaError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let p = e.path().to_string();
        schema(if p == "." { "$" } else { &p }, e.into_inner().to_string())
    })
}

fn model(m: &InitialData, path: &str) -> Result<ParticleConfig, SchemaError> {
    m.to_config().map_err(|e| schema(&format!("{path}.lambda"), e.to_string()))
}

fn positive(v: f64, path: &str) -> Result<(), SchemaError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(schema(path, format!("must be positive and finite, got {v}")))
    }
}

fn at_least(v: usize, min: usize, path: &str) -> Result<(), SchemaError> {
    if v >= min {
        Ok(())
    } else {
        Err(schema(path, format!("must be at least {min}, got {v}")))
    }
}

fn off_axis(points: &[Point], path: &str) -> Result<(), SchemaError> {
    match points.iter().position(|p| p[1] == 0.0 || !p[0].is_finite() || !p[1].is_finite()) {
        Some(k) => Err(schema(&format!("{path}[{k}]"), "points must be finite and off the real axis")),
        None => Ok(()),
    }
}

impl Params {
    /// Semantic checks beyond the shape of the JSON.
    fn validate(&self) -> Result<(), SchemaError> {
        match self {
            Params::Simulate(p) => {
                model(&p.model, "model")?;
                positive(p.horizon, "T")?;
                if let Some(o) = &p.observe {
                    off_axis(&o.points, "observe.points")?;
                    if let Some(k) = o.times.iter().position(|&t| !(0.0..=p.horizon).contains(&t)) {
                        return Err(schema(&format!("observe.times[{k}]"), "must lie in [0, T]"));
                    }
                }
            }
            Params::ExactCheck(p) => {
                at_least(p.n, 1, "n")?;
                positive(p.theta, "theta")?;
                positive(p.horizon, "T")?;
                at_least(p.runs, 1, "runs")?;
            }
            Params::Limit(p) => {
                if p.horizon < 0.0 {
                    return Err(schema("T", "must be nonnegative"));
                }
                off_axis(&p.points, "points")?;
                if let Some(d) = &p.density {
                    at_least(d.points, 2, "density.points")?;
                    if d.hi <= d.lo {
                        return Err(schema("density.hi", "must exceed density.lo"));
                    }
                }
            }
            Params::Clt(p) => {
                model(&p.model, "model")?;
                if !p.model.is_packed() {
                    return Err(schema("model.lambda", "the clt command needs packed initial data"));
                }
                off_axis(&p.probes.base, "probes.base")?;
                at_least(p.runs, 2, "runs")?;
            }
            Params::DbmCompare(p) => {
                positive(p.horizon, "T")?;
                off_axis(&p.points, "points")?;
                if let Some(mc) = &p.mc {
                    at_least(mc.n, 2, "mc.n")?;
                    positive(mc.dt, "mc.dt")?;
                    positive(mc.theta, "mc.theta")?;
                    off_axis(&[mc.w], "mc.w")?;
                    at_least(mc.runs, 2, "mc.runs")?;
                }
            }
            Params::Couple(p) => {
                model(&p.model, "model")?;
                positive(p.horizon, "T")?;
                at_least(p.runs, 2, "runs")?;
            }
            Params::Scan(p) => {
                model(&p.model, "model")?;
                positive(p.horizon, "T")?;
                at_least(p.runs, 1, "runs")?;
            }
        }
        Ok(())
    }
}

impl CoupleParams {
    /// Lower and upper initial configurations.
    pub fn configs(&self) -> Result<(ParticleConfig, ParticleConfig), SchemaError> {
        let x = model(&self.model, "model")?;
        let lambda: Vec<u64> = match &self.upper {
            UpperSpec::Shift { shift } => x.lambda().iter().map(|l| l + shift).collect(),
            UpperSpec::Lambda(spec) => {
                let data = InitialData { n: self.model.n, theta: self.model.theta, lambda: spec.clone() };
                return Ok((x, model(&data, "upper")?));
            }
        };
        let y = ParticleConfig::new(x.theta(), lambda).map_err(|e| schema("upper", e.to_string()))?;
        Ok((x, y))
    }
}

/// Parse and validate. `cli_command` and `cli_seed` come from the command
/// line and take part in the checks.
pub fn parse(
    text: &str,
    base_dir: &Path,
    cli_command: Option<Command>,
    cli_seed: Option<u64>,
) -> Result<RunConfig, SchemaError> {
    let value: Value = serde_json::from_str(text).map_err(|e| schema("$", e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(schema("$", "config must be a JSON object"));
    };
    let command = match obj.remove("command") {
        Some(Value::String(s)) => Some(Command::parse(&s).ok_or_else(|| schema("command", format!("unknown command {s:?}")))?),
        Some(_) => return Err(schema("command", "must be a string")),
        None => None,
    };
    let command = match (command, cli_command) {
        (Some(a), Some(b)) if a != b => {
            return Err(schema("command", format!("config says {} but {} was requested", a.name(), b.name())))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(schema("command", "missing")),
    };
    let seed = match obj.remove("seed") {
        Some(v) => Some(typed::<u64>(v).map_err(|e| schema("seed", e.message))?),
        None => None,
    };
    let seed = cli_seed.or(seed).ok_or_else(|| schema("seed", "a seed is required (config or --seed)"))?;
    let rest = Value::Object(obj);
    let params = match command {
        Command::Simulate => Params::Simulate(typed(rest)?),
        Command::ExactCheck => Params::ExactCheck(typed(rest)?),
        Command::Limit => Params::Limit(typed(rest)?),
        Command::Clt => Params::Clt(typed(rest)?),
        Command::DbmCompare => Params::DbmCompare(typed(rest)?),
        Command::Couple => Params::Couple(typed(rest)?),
        Command::Scan => Params::Scan(typed(rest)?),
    };
    params.validate()?;
    if let Params::Couple(p) = &params {
        p.configs()?;
    }
    Ok(RunConfig { command, seed, params, base_dir: base_dir.to_path_buf() })
}
