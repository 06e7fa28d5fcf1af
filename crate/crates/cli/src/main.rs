//! `nipw run [COMMAND] --config PATH [--seed S] [--workers N] [--out DIR] [--no-header]`
//!
//! Exit codes: 0 all tolerances pass, 1 a tolerance or the run failed,
//! 2 the config or arguments are invalid, 3 I/O failure.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use nipw::{Error, Exec};

use crate::config::Command;

#[derive(Parser)]
#[command(name = "nipw", version, about = "Simulation and limit-theory experiments for nonintersecting Poisson walks")]
struct Cli {
    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand)]
enum Action {
    /// Run one experiment described by a JSON config.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Must match the config's `command` when both are given.
    #[arg(value_enum)]
    command: Option<Command>,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Omit the provenance comment line from CSV outputs.
    #[arg(long)]
    no_header: bool,
}

#[derive(Debug)]
pub enum Failure {
    Schema(String),
    Tolerance(String),
    Runtime(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Tolerance(_) | Failure::Runtime(_) => 1,
            Failure::Schema(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Schema(m) => write!(f, "config error: {m}"),
            Failure::Tolerance(m) => write!(f, "tolerance failed: {m}"),
            Failure::Runtime(m) => write!(f, "run failed: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::RealAxisProbe(_) | Error::TruncationTail { .. } => {
                Failure::Schema(e.to_string())
            }
            Error::Io(_) => Failure::Io(e.to_string()),
            Error::Csv(c) if c.is_io_error() => Failure::Io(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Where and how results are written.
pub struct Sink {
    dir: PathBuf,
    header: Option<String>,
    written: Vec<String>,
}

impl Sink {
    fn new(dir: &Path, header: Option<String>) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), header, written: Vec::new() })
    }

    /// Write `name` atomically: a temp file in the same directory renamed
    /// over the target once complete.
    fn write<F>(&mut self, name: &str, body: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut dyn std::io::Write) -> nipw::Result<()>,
    {
        use std::io::Write;
        let target = self.dir.join(name);
        let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", target.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        {
            let mut w = std::io::BufWriter::new(tmp.as_file_mut());
            if let (Some(h), true) = (&self.header, name.ends_with(".csv")) {
                writeln!(w, "{h}").map_err(io)?;
            }
            body(&mut w)?;
            w.flush().map_err(io)?;
        }
        tmp.persist(&target).map_err(|e| io(e.error))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }
}

/// Outcome of a command: key/value pairs for the summary line and the
/// failed tolerances, if any.
#[derive(Default)]
pub struct Outcome {
    pub fields: Vec<(&'static str, String)>,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn field(&mut self, key: &'static str, value: impl ToString) {
        self.fields.push((key, value.to_string()));
    }

    pub fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }
}

fn run(args: RunArgs) -> Result<Outcome, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Io(format!("{}: {e}", args.config.display())))?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let cfg = config::parse(&text, base, args.command, args.seed).map_err(|e| Failure::Schema(e.to_string()))?;
    let exec = match args.workers {
        Some(0) => return Err(Failure::Schema("--workers must be at least 1".into())),
        Some(1) => Exec::Sequential,
        Some(k) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global()
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            Exec::Parallel
        }
        None => Exec::Parallel,
    };
    let header = (!args.no_header).then(|| {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        format!(
            "# nipw {} {} command={} seed={} config={} generated_unix={stamp}",
            env!("CARGO_PKG_VERSION"),
            if exec == Exec::Sequential { "sequential" } else { "parallel" },
            cfg.command.name(),
            cfg.seed,
            args.config.display(),
        )
    });
    let mut sink = Sink::new(&args.out, header)?;
    let mut outcome = commands::execute(&cfg, exec, &mut sink)?;
    outcome.fields.insert(0, ("seed", cfg.seed.to_string()));
    outcome.fields.insert(0, ("command", cfg.command.name().to_string()));
    outcome.field("outputs", sink.written.join(","));
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Action::Run(args) = cli.action;
    match run(args) {
        Ok(outcome) => {
            let status = if outcome.failures.is_empty() { "PASS" } else { "FAIL" };
            let fields: Vec<String> = outcome.fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
            println!("status={status} {}", fields.join(" "));
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for f in &outcome.failures {
                    eprintln!("{}", Failure::Tolerance(f.clone()));
                }
                ExitCode::from(1)
            }
        }
        Err(f) => {
            eprintln!("{f}");
            println!("status=ERROR code={}", f.code());
            ExitCode::from(f.code())
        }
    }
}
