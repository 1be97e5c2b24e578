//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 integration
//! failure, 3 enumeration budget exceeded, 4 verification failed.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bihamiltonian::{verify_involution, verify_recursion, verify_structure, VerificationReport};
use crate::dynamics::two_peakon::classification_grid;
use crate::dynamics::{integrate, IntegratorConfig};
use crate::error::Error;
use crate::export;
use crate::field::profile;
use crate::integrals::{enumerate_rho, eval_h, Convention, IntegralTable, IntegralValue, DEFAULT_BUDGET};
use crate::sampling::Sampler;
use crate::state::PeakonState;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INTEGRATION: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

/// Environment variable capping the worker threads used by sweeps.
pub const THREADS_ENV: &str = "PEAKON_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "peakon-lab", version, about = "Camassa-Holm multipeakon simulation and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a scenario and write the trajectory CSV and event JSON.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print H_0..H_s at a state as JSON.
    Integrals(IntegralsArgs),
    /// Run a verification sweep and print its report as JSON.
    Verify {
        check: Check,
        #[command(flatten)]
        opts: VerifyArgs,
    },
    /// Write u and u_x on a uniform grid as CSV, plus a JSON sidecar with the state.
    Profile(ProfileArgs),
}

#[derive(Debug, Args)]
pub struct IntegralsArgs {
    /// State file `{"t": .., "q": [..], "p": [..]}`. Without it a state is drawn from `--seed`.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long)]
    pub s: usize,
    /// Peakon count; must match the state file if both are given.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub rescaled: bool,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Sn,
    Recursion,
    Involution,
    Csum,
    Collision2,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pass threshold; defaults per check (sn 1e-10, recursion 1e-9, involution 1e-10).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Highest integral index (recursion, involution) or highest order checked (csum).
    #[arg(long)]
    pub s: Option<usize>,
    /// Points per axis for collision2.
    #[arg(long, default_value_t = 20)]
    pub grid: usize,
    /// Initial gap for collision2.
    #[arg(long, default_value_t = 2.0)]
    pub s0: f64,
    /// Simulated time per collision2 grid point.
    #[arg(long, default_value_t = 50.0)]
    pub t_end: f64,
    /// Relative margin around the collision boundary excluded from collision2.
    #[arg(long, default_value_t = 1e-3)]
    pub band: f64,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub xmin: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub xmax: f64,
    #[arg(long)]
    pub points: usize,
    /// CSV path; the sidecar goes next to it with a `.json` extension.
    #[arg(long)]
    pub output: PathBuf,
}

/// Output file locations of a scenario, relative to the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub trajectory: Option<PathBuf>,
    pub events: Option<PathBuf>,
}

/// A simulation scenario. Either give `q` and `p`, or `n` to draw a state from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_merge_gap")]
    pub merge_gap: f64,
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub output_interval: Option<f64>,
    #[serde(default)]
    pub record_integrals: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub convention: Convention,
}

fn default_rtol() -> f64 {
    IntegratorConfig::default().rtol
}
fn default_atol() -> f64 {
    IntegratorConfig::default().atol
}
fn default_merge_gap() -> f64 {
    IntegratorConfig::default().merge_gap
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> crate::Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.integrator()?;
        cfg.state()?;
        Ok(cfg)
    }

    pub fn integrator(&self) -> crate::Result<IntegratorConfig> {
        let cfg = IntegratorConfig {
            rtol: self.rtol,
            atol: self.atol,
            merge_gap: self.merge_gap,
            max_step: self.max_step,
            output_interval: self.output_interval,
            record_integrals: self.record_integrals,
            ..IntegratorConfig::default()
        };
        let cfg = IntegratorConfig { max_steps: self.max_steps.unwrap_or(cfg.max_steps), ..cfg };
        cfg.validate()?;
        if !(self.t_end >= self.t0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end = {} must be finite and >= t0 = {}", self.t_end, self.t0)));
        }
        Ok(cfg)
    }

    pub fn state(&self) -> crate::Result<PeakonState> {
        match (&self.q, &self.p, self.n) {
            (Some(q), Some(p), n) => {
                if n.is_some_and(|n| n != q.len()) {
                    return Err(Error::Config(format!("n = {} but q has {} entries", n.unwrap_or(0), q.len())));
                }
                PeakonState::new(q.clone(), p.clone(), self.t0)
            }
            (None, None, Some(n)) if n > 0 => Ok(Sampler::default().state(self.seed, 0, n).with_time(self.t0)),
            _ => Err(Error::Config("give both q and p, or a positive n to sample from seed".into())),
        }
    }
}

fn read_state(path: &Path) -> crate::Result<PeakonState> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match cli.command {
        Command::Simulate { config } => cmd_simulate(&config, stdout, stderr),
        Command::Integrals(a) => cmd_integrals(&a, stdout, stderr),
        Command::Verify { check, opts } => cmd_verify(check, &opts, stdout, stderr),
        Command::Profile(a) => cmd_profile(&a, stdout, stderr),
    }
}

pub fn run_from_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn thread_pool() -> Result<rayon::ThreadPool, String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| format!("{THREADS_ENV}={v:?} is not a thread count"))?;
        if n == 0 {
            return Err(format!("{THREADS_ENV} must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| e.to_string())
}

pub fn cmd_simulate(config: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let loaded = std::fs::read_to_string(config).map_err(Error::from).and_then(|text| ScenarioConfig::from_json(&text));
    let scenario = match loaded {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(stderr, "error: config {}: {e}", config.display());
            return EXIT_USAGE;
        }
    };
    // from_json already validated both
    let (state, icfg) = match (scenario.state(), scenario.integrator()) {
        (Ok(s), Ok(c)) => (s, c),
        (Err(e), _) | (_, Err(e)) => {
            let _ = writeln!(stderr, "error: config {}: {e}", config.display());
            return EXIT_USAGE;
        }
    };
    let traj = match integrate(&state, scenario.t_end, &icfg) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(stderr, "error: integration failed: {e}");
            if let Error::StepUnderflow { state, .. } | Error::NonFiniteState { state, .. } = &e {
                let _ = writeln!(stderr, "last state: q = {:?}, p = {:?}", state.q(), state.p());
            }
            return EXIT_INTEGRATION;
        }
    };

    let base = config.parent().unwrap_or(Path::new("."));
    let stem = config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into());
    let traj_path =
        resolve(base, scenario.outputs.trajectory.as_deref().unwrap_or(Path::new(&format!("{stem}.trajectory.csv"))));
    let events_path =
        resolve(base, scenario.outputs.events.as_deref().unwrap_or(Path::new(&format!("{stem}.events.json"))));

    let mut csv = Vec::new();
    let mut json = Vec::new();
    let written = export::write_trajectory_csv(&traj, scenario.convention, &mut csv)
        .and_then(|_| export::write_events_json(&traj, &mut json))
        .and_then(|_| std::fs::write(&traj_path, &csv).map_err(Error::from))
        .and_then(|_| std::fs::write(&events_path, &json).map_err(Error::from));
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: writing outputs: {e}");
        return EXIT_USAGE;
    }
    let summary = serde_json::json!({
        "t_end": traj.t_end(),
        "samples": traj.samples().len(),
        "events": traj.events().len(),
        "final_n": traj.last().state.n(),
        "accepted_steps": traj.stats().accepted,
        "rejected_steps": traj.stats().rejected,
        "trajectory": traj_path,
        "events_file": events_path,
    });
    let _ = writeln!(stdout, "{summary}");
    EXIT_OK
}

pub fn cmd_integrals(a: &IntegralsArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let state = match (&a.state, a.n) {
        (Some(path), n) => match read_state(path) {
            Ok(s) if n.is_some_and(|n| n != s.n()) => {
                let _ = writeln!(stderr, "error: --n {} does not match the state ({} peakons)", n.unwrap_or(0), s.n());
                return EXIT_USAGE;
            }
            Ok(s) => s,
            Err(e) => {
                let _ = writeln!(stderr, "error: state {}: {e}", path.display());
                return EXIT_USAGE;
            }
        },
        (None, Some(n)) if n > 0 => Sampler::default().state(a.seed, 0, n),
        _ => {
            let _ = writeln!(stderr, "error: give --state or a positive --n");
            return EXIT_USAGE;
        }
    };
    let convention = if a.rescaled { Convention::Rescaled } else { Convention::Theorem };
    let mut values = Vec::with_capacity(a.s + 1);
    for s in 0..=a.s {
        let v = if s <= 1 {
            eval_h(s, &state, convention)
        } else {
            IntegralTable::with_budget(state.n(), s, a.budget)
                .and_then(|t| t.eval(&state))
                .map(|value| IntegralValue { s, value, convention: Convention::Theorem }.in_convention(convention))
        };
        match v {
            Ok(v) => values.push(v),
            Err(e @ Error::Budget { .. }) => {
                let _ = writeln!(stderr, "error: H_{s}: {e}");
                return EXIT_BUDGET;
            }
            Err(e) => {
                let _ = writeln!(stderr, "error: H_{s}: {e}");
                return EXIT_USAGE;
            }
        }
    }
    match serde_json::to_string_pretty(&values) {
        Ok(text) => {
            let _ = writeln!(stdout, "{text}");
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn csum_report(s_max: usize) -> crate::Result<VerificationReport> {
    let mut rep = VerificationReport::new("csum", 0.5);
    for s in 1..=s_max {
        let total: u128 = enumerate_rho(s)?.iter().map(|r| r.coefficient() as u128).sum();
        let factorial: u128 = (1..=s as u128).product();
        let diff = total.abs_diff(factorial) as f64;
        rep.record_values(&[], &[], diff, format!("s = {s}: sum c_rho = {total}, s! = {factorial}"));
    }
    Ok(rep)
}

fn collision2_report(a: &VerifyArgs) -> crate::Result<VerificationReport> {
    let cfg = IntegratorConfig::default();
    let points = classification_grid(a.grid, 2.0, a.s0, a.t_end, &cfg)?;
    let mut rep = VerificationReport::new("collision2", 0.5);
    for pt in points {
        if pt.margin.abs() < a.band {
            rep.reject();
            continue;
        }
        let detail = format!("predicted {}, simulated {}", pt.predicted, pt.simulated);
        rep.record_values(&[a.s0, 0.0], &[pt.p1, pt.p2], if pt.agrees() { 0.0 } else { 1.0 }, detail);
    }
    Ok(rep)
}

pub fn cmd_verify(check: Check, a: &VerifyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let needs_states = matches!(check, Check::Sn | Check::Recursion | Check::Involution);
    if needs_states && (a.n == 0 || a.samples == 0) {
        let _ = writeln!(stderr, "error: --n and --samples must be positive");
        return EXIT_USAGE;
    }
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let report = pool.install(|| match check {
        Check::Sn => Ok(verify_structure(a.n, a.samples, a.seed, a.tol.unwrap_or(1e-10))),
        Check::Recursion => verify_recursion(a.n, a.s.unwrap_or(2), a.samples, a.seed, a.tol.unwrap_or(1e-9)),
        Check::Involution => verify_involution(a.n, a.s.unwrap_or(3), a.samples, a.seed, a.tol.unwrap_or(1e-10)),
        Check::Csum => csum_report(a.s.unwrap_or(7)),
        Check::Collision2 => collision2_report(a),
    });
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    match serde_json::to_string_pretty(&report) {
        Ok(text) => {
            let _ = writeln!(stdout, "{text}");
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    }
    if report.pass && report.samples > 0 {
        EXIT_OK
    } else {
        let _ = writeln!(
            stderr,
            "{} failed: max residual {:e} (tolerance {:e})",
            report.check, report.max_residual, report.tolerance
        );
        EXIT_VERIFY_FAILED
    }
}

fn sidecar_path(output: &Path) -> PathBuf {
    output.with_extension("json")
}

pub fn cmd_profile(a: &ProfileArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let state = match read_state(&a.state) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(stderr, "error: state {}: {e}", a.state.display());
            return EXIT_USAGE;
        }
    };
    let prof = match profile(&state, a.xmin, a.xmax, a.points) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let sidecar = sidecar_path(&a.output);
    if sidecar == a.output {
        let _ = writeln!(stderr, "error: output {} would collide with its JSON sidecar", a.output.display());
        return EXIT_USAGE;
    }
    let mut csv = Vec::new();
    let mut json = Vec::new();
    let written = export::write_profile_csv(&prof, &mut csv)
        .and_then(|_| export::write_profile_sidecar(&state, &mut json))
        .and_then(|_| std::fs::write(&a.output, &csv).map_err(Error::from))
        .and_then(|_| std::fs::write(&sidecar, &json).map_err(Error::from));
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: writing {}: {e}", a.output.display());
        return EXIT_USAGE;
    }
    let _ = writeln!(stdout, "{}", serde_json::json!({ "points": a.points, "csv": a.output, "sidecar": sidecar }));
    EXIT_OK
}
