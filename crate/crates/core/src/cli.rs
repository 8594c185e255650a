//! Command-line front end.
//!
//! Every run is described by a [`RunConfig`]; the flags of each subcommand
//! and the elements of a batch file are two spellings of the same thing.
//! Output is JSON with a `config` echo block, or CSV, written atomically.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Error;
use crate::exec::{self, Execution};
use crate::hyperbolic::FnPoint;
use crate::lattice::Lattice;
use crate::lattice_retract::{retract, retract_h2};
use crate::spectrum::{write_spectrum_csv, SpectrumEngine, SpectrumParams, DEFAULT_TOL_SYS, DEFAULT_WORD_CAP, EPSILON_0};
use crate::surface::{classify, flow, StopRule, SurfaceParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

pub const DEFAULT_EPS: f64 = 1.0;
pub const DEFAULT_CUTOFF: f64 = 4.0;
pub const SEED_VAR: &str = "ROUNDWALK_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    LatticeRetract,
    H2Retract,
    Spectrum,
    Systoles,
    SurfaceRetract,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Stop {
    #[default]
    Thick,
    Spine,
    S2,
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}
fn default_eps0() -> f64 {
    EPSILON_0
}
fn default_tol_sys() -> f64 {
    DEFAULT_TOL_SYS
}
fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}
fn default_word_cap() -> usize {
    DEFAULT_WORD_CAP
}

/// One fully resolved run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<String>,
    /// `[[ℓ₁, ℓ₂, ℓ₃], [τ₁, τ₂, τ₃]]`
    #[serde(default, rename = "fn", skip_serializing_if = "Option::is_none")]
    pub fn_point: Option<[[f64; 3]; 2]>,
    #[serde(default)]
    pub stop: Stop,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    #[serde(default = "default_tol_sys")]
    pub tol_sys: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_word_cap")]
    pub max_word_len: usize,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command) -> RunConfig {
        RunConfig {
            command,
            basis: None,
            z: None,
            fn_point: None,
            stop: Stop::default(),
            eps: DEFAULT_EPS,
            eps0: EPSILON_0,
            tol_sys: DEFAULT_TOL_SYS,
            cutoff: DEFAULT_CUTOFF,
            max_word_len: DEFAULT_WORD_CAP,
            format: Format::default(),
            out: None,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        for (name, v) in [("eps", self.eps), ("eps0", self.eps0), ("tol-sys", self.tol_sys), ("cutoff", self.cutoff)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if self.eps > self.eps0 {
            return bad("eps must not exceed eps0");
        }
        if self.max_word_len == 0 {
            return bad("max-word-len must be positive");
        }
        let missing = match self.command {
            Command::LatticeRetract => self.basis.is_none().then_some("--basis"),
            Command::H2Retract => self.z.is_none().then_some("--z"),
            _ => self.fn_point.is_none().then_some("--fn"),
        };
        match missing {
            Some(flag) => bad(&format!("{flag} is required")),
            None => Ok(()),
        }
    }

    fn surface_params(&self) -> SurfaceParams {
        SurfaceParams { tol_sys: self.tol_sys, eps0: self.eps0, spectrum: self.spectrum_params(), ..Default::default() }
    }

    fn spectrum_params(&self) -> SpectrumParams {
        SpectrumParams { word_cap: self.max_word_len, exec: Execution::Parallel }
    }

    fn fn_point(&self) -> Result<FnPoint, Error> {
        let [l, t] = self.fn_point.expect("validated");
        FnPoint::new(l, t)
    }
}

/// Failure of one run, split by exit status.
#[derive(Debug)]
pub enum RunError {
    Domain(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Domain(_) => EXIT_DOMAIN,
            RunError::Io(_) => EXIT_IO,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            RunError::Domain(m) | RunError::Io(m) => m,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Domain(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

fn csv_bytes<F>(f: F) -> Result<Vec<u8>, RunError>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn write_rows(buf: &mut Vec<u8>, header: &[&str], rows: Vec<Vec<String>>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()
}

fn parse_z(s: &str) -> Result<Complex64, Error> {
    s.replace(' ', "").parse::<Complex64>().map_err(|_| Error::InvalidPoint(format!("cannot parse {s:?} as a complex number")))
}

fn show_z(z: Complex64) -> String {
    format!("{}{:+}i", trim(z.re), trim(z.im))
        .replace("+-", "-")
}

fn trim(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// The config echo attached to every JSON output.
pub fn config_echo(cfg: &RunConfig) -> Value {
    let mut v = serde_json::to_value(cfg).expect("configs serialize");
    let seed = std::env::var(SEED_VAR).ok();
    v["seed"] = json!(seed);
    v["version"] = json!(env!("CARGO_PKG_VERSION"));
    v
}

/// Runs `cfg` and returns the bytes of its output.
pub fn execute(cfg: &RunConfig) -> Result<Vec<u8>, RunError> {
    cfg.validate()?;
    let (result, csv): (Value, Vec<u8>) = match cfg.command {
        Command::LatticeRetract => {
            let lattice = Lattice::from_rows(cfg.basis.as_ref().expect("validated"))?;
            let t = retract(&lattice)?;
            let rows = t
                .events
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    vec![(i + 1).to_string(), format!("{:.12}", e.t_star), e.rank_before.to_string(), e.rank_after.to_string()]
                })
                .collect();
            let csv = csv_bytes(|b| write_rows(b, &["step", "t_star", "rank_before", "rank_after"], rows))?;
            (serde_json::to_value(&t).expect("serializable"), csv)
        }
        Command::H2Retract => {
            let z = parse_z(cfg.z.as_deref().expect("validated"))?;
            let w = retract_h2(z)?;
            let rows = vec![vec![z.re, z.im, w.re, w.im].iter().map(|x| format!("{x:.12}")).collect()];
            let csv = csv_bytes(|b| write_rows(b, &["z_re", "z_im", "retract_re", "retract_im"], rows))?;
            (json!({ "z": [z.re, z.im], "retract": [w.re, w.im], "retract_text": show_z(w) }), csv)
        }
        Command::Spectrum => {
            let group = crate::hyperbolic::fn_to_group(&cfg.fn_point()?)?;
            let classes = SpectrumEngine::new(&group, &cfg.spectrum_params())?.length_spectrum(cfg.cutoff)?;
            let csv = csv_bytes(|b| write_spectrum_csv(b, &classes))?;
            (json!({ "cutoff": cfg.cutoff, "classes": classes }), csv)
        }
        Command::Systoles => {
            let c = classify(&cfg.fn_point()?, cfg.eps, &cfg.surface_params())?;
            let rows = c
                .systoles
                .classes
                .iter()
                .map(|g| vec![g.word.to_string(), format!("{:.12}", g.length)])
                .collect();
            let csv = csv_bytes(|b| write_rows(b, &["word", "length"], rows))?;
            (serde_json::to_value(&c).expect("serializable"), csv)
        }
        Command::SurfaceRetract => {
            let stop = match cfg.stop {
                Stop::Thick => StopRule::Thick(cfg.eps),
                Stop::Spine => StopRule::Spine,
                Stop::S2 => StopRule::S2,
            };
            let t = flow(&cfg.fn_point()?, stop, &cfg.surface_params())?;
            let csv = csv_bytes(|b| t.write_csv(b))?;
            (serde_json::to_value(&t).expect("serializable"), csv)
        }
    };
    Ok(match cfg.format {
        Format::Csv => csv,
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(&json!({ "config": config_echo(cfg), "result": result }))
                .expect("serializable");
            bytes.push(b'\n');
            bytes
        }
    })
}

/// Writes through a temporary file in the target directory and renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Runs `cfg` and delivers its output to `cfg.out` or stdout.
pub fn run(cfg: &RunConfig) -> Result<(), RunError> {
    let bytes = execute(cfg)?;
    match &cfg.out {
        Some(path) => write_atomic(path, &bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

/// Runs a batch on `jobs` threads. Every element needs its own `out`.
pub fn run_batch(configs: &[RunConfig], jobs: usize) -> Vec<Result<(), RunError>> {
    let one = |cfg: &RunConfig| match cfg.out {
        None => Err(RunError::Domain("batch entries need an \"out\" path".into())),
        Some(_) => run(cfg),
    };
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(|| exec::map(Execution::Parallel, configs, one));
        }
    }
    let _ = jobs;
    exec::map(Execution::Sequential, configs, one)
}

/// Reads a flag value given either inline or as the path of a JSON file.
fn inline_or_file<T: serde::de::DeserializeOwned>(flag: &str, s: &str) -> Result<T, RunError> {
    if let Ok(v) = serde_json::from_str(s) {
        return Ok(v);
    }
    let text = std::fs::read_to_string(s)
        .map_err(|_| RunError::Domain(format!("{flag}: neither valid JSON nor a readable file: {s}")))?;
    serde_json::from_str(&text).map_err(|e| RunError::Domain(format!("{flag}: {e}")))
}

#[derive(Parser, Debug)]
#[command(name = "roundwalk", version, about = "Well-rounded lattice retraction and genus-2 systole flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    /// Retract a unimodular lattice to a well-rounded one.
    LatticeRetract(Flags),
    /// Retract a point of the upper half-plane onto the unit arc.
    H2Retract(Flags),
    /// Closed-geodesic length spectrum up to a cutoff.
    Spectrum(Flags),
    /// Systole set and stratum classification.
    Systoles(Flags),
    /// Flow a genus-2 surface to the thick part or the spine.
    SurfaceRetract(Flags),
    /// Run a JSON array of configs, each with its own "out".
    Batch {
        file: PathBuf,
        /// Number of configs run at once.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(clap::Args, Debug, Default)]
pub struct Flags {
    /// Basis rows as JSON, or a path to a JSON file.
    #[arg(long)]
    pub basis: Option<String>,
    /// Point of the upper half-plane, e.g. 0.1+1.2i.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    /// Fenchel-Nielsen point [[l1,l2,l3],[t1,t2,t3]] as JSON, or a path.
    #[arg(long = "fn")]
    pub fn_point: Option<String>,
    /// Stopping rule for surface-retract (default thick).
    #[arg(long, value_enum)]
    pub stop: Option<Stop>,
    /// Thick-part threshold, at most eps0 (default 1).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Collar constant bounding eps (default 2·arcsinh 1).
    #[arg(long)]
    pub eps0: Option<f64>,
    /// Equal-length tolerance for systoles (default 1e-8).
    #[arg(long)]
    pub tol_sys: Option<f64>,
    /// Spectrum cutoff length (default 4).
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Cap on the word-length bound of a cutoff (default 16).
    #[arg(long)]
    pub max_word_len: Option<usize>,
    /// Output format (default json).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file, written atomically; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Flags {
    pub fn into_config(self, command: Command) -> Result<RunConfig, RunError> {
        let mut c = RunConfig::new(command);
        c.basis = self.basis.map(|s| inline_or_file("--basis", &s)).transpose()?;
        c.z = self.z;
        c.fn_point = self.fn_point.map(|s| inline_or_file("--fn", &s)).transpose()?;
        c.stop = self.stop.unwrap_or_default();
        c.eps = self.eps.unwrap_or(c.eps);
        c.eps0 = self.eps0.unwrap_or(c.eps0);
        c.tol_sys = self.tol_sys.unwrap_or(c.tol_sys);
        c.cutoff = self.cutoff.unwrap_or(c.cutoff);
        c.max_word_len = self.max_word_len.unwrap_or(c.max_word_len);
        c.format = self.format.unwrap_or_default();
        c.out = self.out;
        Ok(c)
    }
}

fn report(e: &RunError) -> i32 {
    eprintln!("error: {}", e.message().replace('\n', " "));
    e.exit_code()
}

/// Entry point of the binary; returns the exit status.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    use clap::error::ErrorKind;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    EXIT_OK
                }
                ErrorKind::InvalidSubcommand
                | ErrorKind::MissingSubcommand
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let mut cmd = <Cli as clap::CommandFactory>::command();
                    let what = if e.kind() == ErrorKind::InvalidSubcommand { "unknown" } else { "missing" };
                    eprintln!("error: {what} command");
                    let _ = cmd.write_help(&mut std::io::stderr());
                    EXIT_USAGE
                }
                _ => {
                    eprintln!("error: {}", e.to_string().lines().next().unwrap_or("bad arguments"));
                    EXIT_DOMAIN
                }
            };
        }
    };
    let (command, flags) = match cli.command {
        CliCommand::LatticeRetract(f) => (Command::LatticeRetract, f),
        CliCommand::H2Retract(f) => (Command::H2Retract, f),
        CliCommand::Spectrum(f) => (Command::Spectrum, f),
        CliCommand::Systoles(f) => (Command::Systoles, f),
        CliCommand::SurfaceRetract(f) => (Command::SurfaceRetract, f),
        CliCommand::Batch { file, jobs } => {
            let configs: Vec<RunConfig> = match std::fs::read_to_string(&file) {
                Err(e) => return report(&RunError::Io(format!("{}: {e}", file.display()))),
                Ok(text) => match serde_json::from_str(&text) {
                    Ok(c) => c,
                    Err(e) => return report(&RunError::Domain(format!("batch: {e}"))),
                },
            };
            let mut status = EXIT_OK;
            for (i, r) in run_batch(&configs, jobs.max(1)).iter().enumerate() {
                if let Err(e) = r {
                    eprintln!("error: job {i}: {}", e.message().replace('\n', " "));
                    status = match (status, e.exit_code()) {
                        (EXIT_IO, _) | (_, EXIT_IO) => EXIT_IO,
                        (_, c) => c,
                    };
                }
            }
            return status;
        }
    };
    match flags.into_config(command).and_then(|c| run(&c)) {
        Ok(()) => EXIT_OK,
        Err(e) => report(&e),
    }
}
