//! Command line front end.
//!
//! Every subcommand prints a JSON summary on stdout. Commands that produce
//! a trajectory also write `<stem>.csv` and `<stem>.json` when `--output`
//! is given; relative stems are resolved against `--out-dir`, then
//! `HARDY_OUT_DIR`, then the working directory. Exit status is 0 on
//! success, 1 on a domain error (reported as JSON on stderr) and 2 on a
//! usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::acceptance::run_suite;
use crate::asymptotics::{subsolution_check, supersolution_margin};
use crate::error::Error;
use crate::linearfuchs::{eta_profile, integrate_linear};
use crate::model::{Operator, Problem};
use crate::shooting::{
    blowup_radius, classify_resolved, find_ustar, solve_for_boundary_coefficient, Classification, Shot,
};
use crate::stepper::{
    default_launch_offset, shoot, trajectory_csv, trajectory_json, BoundaryBranch, IntegratorOptions, Launch,
    Trajectory,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "HARDY_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "hardy-radial",
    version,
    about = "Radial solutions of Δu + mu/δ² u = u^p on a ball"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// key=value file mirroring the flags; flags on the command line win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Indicial exponents and closed-form constants
    Exponents(ProblemOnly),
    /// One shot from the center value u0
    Solve(ShotArgs<U0>),
    /// One shot from the edge of a dead core of radius rho (p < 1)
    Deadcore(ShotArgs<Rho>),
    /// The solution vanishing only at the origin (p < 1)
    Origin(ShotArgs<NoParam>),
    /// Classification of the shot from u0
    Classify(ShotArgs<U0>),
    /// Blowup threshold u* (p > 1)
    Threshold(ThresholdArgs),
    /// Blowup radius of the shot from u0 (p > 1)
    BlowupRadius(ShotArgs<U0>),
    /// Solution with a prescribed boundary coefficient
    Boundary(BoundaryArgs),
    /// Classification over a grid of u0, mu and p
    Sweep(SweepArgs),
    /// Super- and subsolution margins of c (R-r)^(-2/(p-1))
    Certify(CertifyArgs),
    /// Linear problems: the radial harmonic or the eta profile
    Linear(LinearArgs),
    /// Run the acceptance suite
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Dimension N
    #[arg(long = "n", default_value_t = 3)]
    pub dim_n: u32,
    /// Ball radius R
    #[arg(long = "r", default_value_t = 1.0)]
    pub radius: f64,
    /// Hardy coefficient mu
    #[arg(long, allow_hyphen_values = true)]
    pub mu: f64,
    /// Exponent p
    #[arg(long = "p")]
    pub power: f64,
}

impl ProblemArgs {
    fn problem(&self) -> Result<Problem, Error> {
        let pr = Problem::new(self.dim_n, self.radius, self.mu, self.power);
        pr.validate()?;
        Ok(pr)
    }
}

#[derive(Debug, Clone, Args)]
pub struct IntegratorArgs {
    #[arg(long, default_value_t = IntegratorOptions::default().rel_tol)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = IntegratorOptions::default().abs_tol)]
    pub abs_tol: f64,
    /// Blowup proxy threshold (default 1e8 max(1, u at launch))
    #[arg(long)]
    pub u_cap: Option<f64>,
    /// Closest approach to the boundary (default 1e-10 R)
    #[arg(long)]
    pub delta_stop: Option<f64>,
    #[arg(long, default_value_t = IntegratorOptions::default().max_steps)]
    pub max_steps: usize,
    /// Forced samples per halving of the distance in the boundary layer
    #[arg(long, default_value_t = IntegratorOptions::default().samples_per_octave)]
    pub samples_per_octave: u32,
    /// Boundary layer variables: auto, hardy or blowup-scaled
    #[arg(long, default_value = "auto", value_parser = parse_branch)]
    pub branch: BoundaryBranch,
}

impl IntegratorArgs {
    fn options(&self) -> Result<IntegratorOptions, Error> {
        let o = IntegratorOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            u_cap: self.u_cap,
            delta_stop: self.delta_stop,
            max_steps: self.max_steps,
            boundary_branch: self.branch,
            samples_per_octave: self.samples_per_octave,
        };
        o.validate()?;
        Ok(o)
    }
}

fn parse_branch(s: &str) -> Result<BoundaryBranch, String> {
    match s {
        "auto" => Ok(BoundaryBranch::Auto),
        "hardy" => Ok(BoundaryBranch::Hardy),
        "blowup-scaled" => Ok(BoundaryBranch::BlowupScaled),
        _ => Err(format!("unknown branch {s:?}, expected auto, hardy or blowup-scaled")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write <STEM>.csv and <STEM>.json
    #[arg(long, value_name = "STEM")]
    pub output: Option<PathBuf>,
    /// Directory for relative output stems
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl OutputArgs {
    fn resolve(&self) -> Option<PathBuf> {
        let stem = self.output.as_ref()?;
        if stem.is_absolute() {
            return Some(stem.clone());
        }
        let dir = self
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from));
        Some(dir.map_or_else(|| stem.clone(), |d| d.join(stem)))
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProblemOnly {
    #[command(flatten)]
    pub problem: ProblemArgs,
}

/// Launch parameter of a shot command.
pub trait LaunchParam: Args + Clone + std::fmt::Debug {
    fn launch(&self) -> Result<Launch, Error>;
}

#[derive(Debug, Clone, Args)]
pub struct U0 {
    /// Center value u(0)
    #[arg(long, allow_hyphen_values = true)]
    pub u0: f64,
}

impl LaunchParam for U0 {
    fn launch(&self) -> Result<Launch, Error> {
        if !(self.u0 > 0.0) {
            return Err(Error::NonPositive(format!("u0 = {}", self.u0)));
        }
        Ok(Launch::Center { u0: self.u0 })
    }
}

#[derive(Debug, Clone, Args)]
pub struct Rho {
    /// Dead core radius
    #[arg(long, allow_hyphen_values = true)]
    pub rho: f64,
}

impl LaunchParam for Rho {
    fn launch(&self) -> Result<Launch, Error> {
        Ok(Launch::DeadCore { rho: self.rho })
    }
}

#[derive(Debug, Clone, Args)]
pub struct NoParam {}

impl LaunchParam for NoParam {
    fn launch(&self) -> Result<Launch, Error> {
        Ok(Launch::Origin)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ShotArgs<L: LaunchParam> {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub param: L,
    /// Series launch offset (default chosen from the series remainder)
    #[arg(long)]
    pub h: Option<f64>,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Relative width of the final bracket
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BoundaryArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Target coefficient of u/(R-r)^(beta-)
    #[arg(long, allow_hyphen_values = true)]
    pub c: f64,
    /// Relative accuracy of the coefficient
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long = "n", default_value_t = 3)]
    pub dim_n: u32,
    #[arg(long = "r", default_value_t = 1.0)]
    pub radius: f64,
    /// Grid of center values: `a,b,c`, `lin:a:b:n` or `log:a:b:n`
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub u0: Grid,
    /// Grid of Hardy coefficients
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub mu: Grid,
    /// Grid of exponents
    #[arg(long = "p", value_parser = parse_grid)]
    pub power: Grid,
    /// Grid points computed concurrently
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Supersolution amplitude c+
    #[arg(long)]
    pub c_plus: Option<f64>,
    /// Subsolution amplitude c-
    #[arg(long)]
    pub c_minus: Option<f64>,
    /// Number of radii at which the supersolution margin is evaluated
    #[arg(long, default_value_t = 100)]
    pub points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct LinearArgs {
    #[command(subcommand)]
    pub which: LinearCommand,
}

#[derive(Debug, Clone, Subcommand)]
pub enum LinearCommand {
    /// h'' + (N-1)/r h' + mu/(R-r)^2 h = 0 with h(0) = h0
    Harmonic {
        #[arg(long = "n", default_value_t = 3)]
        dim_n: u32,
        #[arg(long = "r", default_value_t = 1.0)]
        radius: f64,
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        h0: f64,
        #[command(flatten)]
        integrator: IntegratorArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// eta on (delta0/2, delta0) with eta(delta0/2) = 1, eta' = 0 there
    Eta {
        #[arg(long = "n", default_value_t = 3)]
        dim_n: u32,
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        delta0: f64,
        #[command(flatten)]
        integrator: IntegratorArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Criterion id, name fragment or tag (threshold, superlinear,
    /// sublinear, linear, integrator, model, inverse)
    #[arg(long)]
    pub filter: Option<String>,
    /// Machine-readable report
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
}

/// A list of grid values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// `a,b,c`, `lin:a:b:n` (n points from a to b) or `log:a:b:n`
/// (geometric, `a, b > 0`).
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    if let Some(rest) = s.strip_prefix("lin:").or_else(|| s.strip_prefix("log:")) {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("{s:?}: expected kind:start:end:count"));
        }
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let n: usize = parts[2].trim().parse().map_err(|e| format!("{:?}: {e}", parts[2]))?;
        if n == 0 {
            return Err(format!("{s:?}: count must be positive"));
        }
        let log = s.starts_with("log:");
        if log && !(a > 0.0 && b > 0.0) {
            return Err(format!("{s:?}: geometric grids need positive ends"));
        }
        let at = |i: usize| {
            let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            if log {
                (a.ln() + t * (b.ln() - a.ln())).exp()
            } else {
                a + t * (b - a)
            }
        };
        return Ok(Grid((0..n).map(at).collect()));
    }
    let v = s.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
    Ok(Grid(v))
}

/// Failure of a command.
#[derive(Debug)]
pub enum Failure {
    Domain(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl Failure {
    fn to_json(&self) -> Value {
        match self {
            Failure::Domain(e) => json!({ "error": e.name(), "message": e.to_string() }),
            Failure::Io(m) => json!({ "error": "Io", "message": m }),
        }
    }
}

/// Outcome of a command: the stdout document and the exit status.
pub struct Outcome {
    pub stdout: String,
    pub status: i32,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the exit status. Output goes to stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let status = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return status;
        }
    };
    init_logging(cli.verbose);
    match execute(&cli.command) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.stdout.as_bytes());
            out.status
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            1
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

/// Parses the command line, splicing in the pairs of a `--config` file
/// right after the subcommand path so that later command line flags
/// override them.
pub fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    use clap::CommandFactory;
    let Some((path, insert_at)) = locate_config(&argv) else {
        return Cli::try_parse_from(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| {
        Cli::command().error(
            clap::error::ErrorKind::Io,
            format!("cannot read config {}: {e}", path.display()),
        )
    })?;
    let pairs = config_flags(&text).map_err(|m| {
        Cli::command().error(
            clap::error::ErrorKind::InvalidValue,
            format!("config {}: {m}", path.display()),
        )
    })?;
    let mut spliced = argv;
    spliced.splice(insert_at..insert_at, pairs);
    Cli::try_parse_from(spliced)
}

/// Path given to `--config` and the index just past the subcommand path.
fn locate_config(argv: &[OsString]) -> Option<(PathBuf, usize)> {
    let mut path = None;
    let mut insert_at = None;
    let mut depth = 0;
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if a == "--config" {
            path = argv.get(i + 1).map(PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else if insert_at.is_none() && !a.starts_with('-') {
            // the subcommand path; only `linear` has a second level
            depth += 1;
            if depth == 2 || a != "linear" {
                insert_at = Some(i + 1);
            }
        } else if insert_at.is_none() && depth == 0 && !is_global_flag(&a) {
            // a non-global flag before any subcommand: let clap report it
            return None;
        }
        i += 1;
    }
    Some((path?, insert_at.unwrap_or(argv.len())))
}

fn is_global_flag(a: &str) -> bool {
    a == "--verbose" || (a.starts_with('-') && !a.starts_with("--") && a[1..].chars().all(|c| c == 'v'))
}

/// `key = value` lines, `#` comments, blank lines ignored. `key = true`
/// becomes a bare flag and `key = false` is dropped.
pub fn config_flags(text: &str) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
        let key = k.trim().replace('_', "-");
        let value = v.trim();
        if key.is_empty() || key == "config" {
            return Err(format!("line {}: invalid key {:?}", i + 1, k.trim()));
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => out.push(format!("--{key}={value}").into()),
        }
    }
    Ok(out)
}

fn to_json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn ok(v: Value) -> Result<Outcome, Failure> {
    Ok(Outcome {
        stdout: to_json_text(&v),
        status: 0,
    })
}

fn write_trajectory(
    output: &OutputArgs,
    header: [&str; 3],
    doc: &Value,
    traj: &Trajectory,
) -> Result<Option<(PathBuf, PathBuf)>, Failure> {
    let Some(stem) = output.resolve() else { return Ok(None) };
    if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let csv = with_ext(&stem, "csv");
    let js = with_ext(&stem, "json");
    fs::write(&csv, trajectory_csv(traj, header))?;
    fs::write(&js, to_json_text(doc))?;
    Ok(Some((csv, js)))
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn files_json(files: Option<(PathBuf, PathBuf)>) -> Value {
    match files {
        Some((c, j)) => json!({ "csv": c.display().to_string(), "json": j.display().to_string() }),
        None => Value::Null,
    }
}

fn last_state(traj: &Trajectory) -> Value {
    json!(traj.last())
}

/// Runs one parsed command.
pub fn execute(cmd: &Command) -> Result<Outcome, Failure> {
    match cmd {
        Command::Exponents(a) => {
            let pr = a.problem.problem()?;
            ok(json!({ "problem": pr, "regime": pr.regime()?, "exponents": pr.exponents()? }))
        }
        Command::Solve(a) => shot_command(a, false),
        Command::Deadcore(a) => shot_command(a, false),
        Command::Origin(a) => shot_command(a, false),
        Command::Classify(a) => shot_command(a, true),
        Command::Threshold(a) => {
            let pr = a.problem.problem()?;
            let o = a.integrator.options()?;
            let th = find_ustar(&pr, a.tol, &o)?;
            let doc = json!({ "problem": pr, "tol": a.tol, "threshold": th });
            if let Some(stem) = a.output.resolve() {
                write_json_file(&stem, &doc)?;
            }
            ok(doc)
        }
        Command::BlowupRadius(a) => {
            let pr = a.problem.problem()?;
            let o = a.integrator.options()?;
            let Launch::Center { u0 } = a.param.launch()? else {
                unreachable!("center launch")
            };
            let r_blow = blowup_radius(&pr, u0, &o)?;
            let doc = json!({ "problem": pr, "u0": u0, "r_blow": r_blow });
            if let Some(stem) = a.output.resolve() {
                write_json_file(&stem, &doc)?;
            }
            ok(doc)
        }
        Command::Boundary(a) => {
            let pr = a.problem.problem()?;
            let o = a.integrator.options()?;
            let sol = solve_for_boundary_coefficient(&pr, a.c, a.tol, &o)?;
            let summary = json!({
                "family": sol.family,
                "parameter": sol.parameter,
                "coefficient": sol.coefficient,
                "evaluations": sol.evaluations,
                "bracket": sol.bracket,
                "event": sol.trajectory.event,
            });
            let doc = json!({ "problem": pr, "target": a.c, "tol": a.tol, "solution": summary });
            let full = merge(&doc, trajectory_json(&pr, &o, &sol.trajectory));
            let files = write_trajectory(&a.output, ["r", "u", "du"], &full, &sol.trajectory)?;
            ok(merge(&doc, json!({ "files": files_json(files) })))
        }
        Command::Sweep(a) => sweep(a),
        Command::Certify(a) => certify(a),
        Command::Linear(a) => linear(&a.which),
        Command::Verify(a) => {
            let o = a.integrator.options()?;
            let reports = run_suite(a.filter.as_deref(), &o);
            let failed = reports.iter().any(|r| !r.passed);
            let stdout = if a.json {
                to_json_text(&json!({ "passed": !failed, "reports": reports }))
            } else {
                let mut s = String::new();
                for r in &reports {
                    let _ = writeln!(s, "{}", r.line());
                    for c in &r.checks {
                        let _ = writeln!(s, "    {c}");
                    }
                }
                let n_ok = reports.iter().filter(|r| r.passed).count();
                let _ = writeln!(s, "{n_ok}/{} criteria passed", reports.len());
                s
            };
            Ok(Outcome {
                stdout,
                status: i32::from(failed),
            })
        }
    }
}

fn write_json_file(stem: &Path, doc: &Value) -> Result<(), Failure> {
    if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(with_ext(stem, "json"), to_json_text(doc))?;
    Ok(())
}

fn merge(a: &Value, b: Value) -> Value {
    let mut out = a.clone();
    if let (Some(o), Value::Object(extra)) = (out.as_object_mut(), b) {
        for (k, v) in extra {
            o.insert(k, v);
        }
    }
    out
}

fn shot_command<L: LaunchParam>(a: &ShotArgs<L>, resolve: bool) -> Result<Outcome, Failure> {
    let pr = a.problem.problem()?;
    let o = a.integrator.options()?;
    let launch = a.param.launch()?;
    let (shot, evaluations, h) = if resolve {
        let (shot, n) = classify_resolved(&pr, &launch, &o)?;
        (shot, n, default_launch_offset(&pr, &launch))
    } else {
        let h = a.h.unwrap_or_else(|| default_launch_offset(&pr, &launch));
        let trajectory = shoot(&pr, &launch, h, &o)?;
        let classification = crate::shooting::classify_trajectory(&pr, &trajectory)?;
        (
            Shot {
                launch,
                classification,
                trajectory,
            },
            1,
            h,
        )
    };
    let summary = json!({
        "problem": pr,
        "launch": launch,
        "h": h,
        "event": shot.trajectory.event,
        "sample_count": shot.trajectory.samples.len(),
        "last": last_state(&shot.trajectory),
        "classification": classification_json(&shot.classification),
        "evaluations": evaluations,
    });
    let full = merge(&summary, trajectory_json(&pr, &o, &shot.trajectory));
    let files = write_trajectory(&a.output, ["r", "u", "du"], &full, &shot.trajectory)?;
    ok(merge(&summary, json!({ "files": files_json(files) })))
}

fn classification_json(c: &Classification) -> Value {
    match c {
        Classification::GlobalPositive { coefficient } => json!({
            "kind": c.name(),
            "coefficient": coefficient.coefficient,
            "exponent": coefficient.exponent,
            "residual": coefficient.residual,
            "converged": coefficient.converged,
        }),
        Classification::Blowup {
            r_blow,
            amplitude_check,
        } => json!({
            "kind": c.name(),
            "r_blow": r_blow,
            "amplitude": amplitude_check.coefficient,
            "converged": amplitude_check.converged,
        }),
        Classification::Indeterminate { band } => json!({ "kind": c.name(), "band": band }),
    }
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    mu: f64,
    p: f64,
    u0: f64,
    classification: String,
    coefficient: Option<f64>,
    r_blow: Option<f64>,
    error: Option<String>,
}

fn sweep(a: &SweepArgs) -> Result<Outcome, Failure> {
    let o = a.integrator.options()?;
    if a.jobs == 0 {
        return Err(Error::NonPositive("jobs = 0".into()).into());
    }
    let mut points = Vec::new();
    for &mu in &a.mu.0 {
        for &p in &a.power.0 {
            let pr = Problem::new(a.dim_n, a.radius, mu, p);
            pr.validate()?;
            for &u0 in &a.u0.0 {
                if !(u0 > 0.0) {
                    return Err(Error::NonPositive(format!("u0 = {u0}")).into());
                }
                points.push((pr, u0));
            }
        }
    }
    let rows: Vec<Mutex<Option<SweepRow>>> = points.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..a.jobs.min(points.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(pr, u0)) = points.get(i) else { break };
                let row = sweep_point(&pr, u0, &o);
                *rows[i].lock().expect("unpoisoned") = Some(row);
            });
        }
    });
    let rows: Vec<SweepRow> = rows
        .into_iter()
        .map(|m| m.into_inner().expect("unpoisoned").expect("computed"))
        .collect();
    let doc = json!({ "dim_n": a.dim_n, "radius": a.radius, "options": o, "rows": rows });
    if let Some(stem) = a.output.resolve() {
        if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(with_ext(&stem, "csv"), sweep_csv(&rows))?;
        fs::write(with_ext(&stem, "json"), to_json_text(&doc))?;
    }
    ok(doc)
}

fn sweep_point(pr: &Problem, u0: f64, o: &IntegratorOptions) -> SweepRow {
    let mut row = SweepRow {
        mu: pr.mu,
        p: pr.power,
        u0,
        classification: String::new(),
        coefficient: None,
        r_blow: None,
        error: None,
    };
    match classify_resolved(pr, &Launch::Center { u0 }, o) {
        Ok((shot, _)) => {
            row.classification = shot.classification.name().to_string();
            match shot.classification {
                Classification::GlobalPositive { coefficient } => row.coefficient = Some(coefficient.coefficient),
                Classification::Blowup { r_blow, .. } => row.r_blow = Some(r_blow),
                Classification::Indeterminate { .. } => {}
            }
        }
        Err(e) => {
            row.classification = "Error".to_string();
            row.error = Some(e.name().to_string());
        }
    }
    row
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let num = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    let mut s = String::from("mu,p,u0,classification,coefficient,r_blow,error\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{},{},{},{}",
            r.mu,
            r.p,
            r.u0,
            r.classification,
            num(r.coefficient),
            num(r.r_blow),
            r.error.as_deref().unwrap_or("")
        );
    }
    s
}

fn certify(a: &CertifyArgs) -> Result<Outcome, Failure> {
    let pr = a.problem.problem()?;
    if a.points < 2 {
        return Err(Error::NonPositive(format!("points = {} (need at least 2)", a.points)).into());
    }
    let mut doc = json!({ "problem": pr });
    if let Some(c) = a.c_plus {
        let mut margins = Vec::with_capacity(a.points);
        for i in 1..=a.points {
            let r = pr.radius * i as f64 / a.points as f64;
            margins.push((r, supersolution_margin(&pr, c, r)?));
        }
        // smallest grid radius from which the margin stays negative up to R
        let r0 = margins
            .iter()
            .rev()
            .take_while(|(_, m)| *m < 0.0)
            .last()
            .map(|(r, _)| *r);
        doc["supersolution"] = json!({ "c_plus": c, "r0": r0, "margins": margins });
    }
    if let Some(c) = a.c_minus {
        doc["subsolution"] = json!({ "c_minus": c, "holds": subsolution_check(&pr, c)? });
    }
    ok(doc)
}

fn linear(which: &LinearCommand) -> Result<Outcome, Failure> {
    match which {
        LinearCommand::Harmonic {
            dim_n,
            radius,
            mu,
            h0,
            integrator,
            output,
        } => {
            let op = Operator {
                dim_n: *dim_n,
                radius: *radius,
                mu: *mu,
            };
            let o = integrator.options()?;
            let lt = integrate_linear(&op, *h0, &o)?;
            let summary = json!({
                "operator": op,
                "h0": h0,
                "event": lt.trajectory.event,
                "sample_count": lt.trajectory.samples.len(),
                "coefficient": lt.coefficient_hint,
                "fit": lt.fit,
            });
            let full = merge(&summary, trajectory_json(&op, &o, &lt.trajectory));
            let files = write_trajectory(output, ["r", "h", "dh"], &full, &lt.trajectory)?;
            ok(merge(&summary, json!({ "files": files_json(files) })))
        }
        LinearCommand::Eta {
            dim_n,
            mu,
            delta0,
            integrator,
            output,
        } => {
            let o = integrator.options()?;
            let e = eta_profile(*dim_n, *mu, *delta0, &o)?;
            let summary = json!({
                "dim_n": dim_n,
                "mu": mu,
                "delta0": delta0,
                "increasing": e.increasing,
                "c_eta": e.c_eta,
                "event": e.profile.trajectory.event,
            });
            let op = Operator {
                dim_n: *dim_n,
                radius: *delta0,
                mu: *mu,
            };
            let full = merge(&summary, trajectory_json(&op, &o, &e.profile.trajectory));
            let files = write_trajectory(output, ["r", "eta", "deta"], &full, &e.profile.trajectory)?;
            ok(merge(&summary, json!({ "files": files_json(files) })))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<OsString> {
        std::iter::once("hardy-radial")
            .chain(s.split_whitespace())
            .map(OsString::from)
            .collect()
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1,2,3").unwrap(), Grid(vec![1.0, 2.0, 3.0]));
        assert_eq!(parse_grid("lin:0:1:3").unwrap(), Grid(vec![0.0, 0.5, 1.0]));
        let g = parse_grid("log:1e-2:1:3").unwrap();
        assert!((g.0[1] - 0.1).abs() < 1e-15);
        assert!(parse_grid("log:0:1:3").is_err());
        assert!(parse_grid("lin:0:1").is_err());
        assert!(parse_grid("x").is_err());
    }

    #[test]
    fn config_lines() {
        let f = config_flags("# comment\nmu = 0.125\np=3\n\njson = true\nverbose_x = false\n").unwrap();
        assert_eq!(f, vec![OsString::from("--mu=0.125"), "--p=3".into(), "--json".into()]);
        assert!(config_flags("mu 0.1").is_err());
        assert!(config_flags("config = x").is_err());
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "mu = 0.1\np = 3\nn = 5\n").unwrap();
        let cli = parse(argv(&format!("exponents --config {} --p 2", path.display()))).unwrap();
        let Command::Exponents(a) = cli.command else { panic!() };
        assert_eq!((a.problem.dim_n, a.problem.mu, a.problem.power), (5, 0.1, 2.0));
        let lin = parse(argv(&format!("linear harmonic --config {} --mu 0.2", path.display())));
        // p is not a flag of the linear harmonic command
        assert!(lin.is_err());
    }

    #[test]
    fn usage_errors() {
        assert!(parse(argv("solve --mu 0.1 --p 3")).is_err());
        assert!(parse(argv("exponents --mu 0.1 --p 3 --bogus 1")).is_err());
        assert!(parse(argv("nothing")).is_err());
        assert!(parse(argv("solve --mu 0.1 --p 3 --u0 1 --branch sideways")).is_err());
    }

    #[test]
    fn domain_errors_carry_names() {
        let cli = parse(argv("solve --mu 0.1 --p 3 --u0 0")).unwrap();
        match execute(&cli.command) {
            Err(Failure::Domain(e)) => assert_eq!(e.name(), "NonPositive"),
            _ => panic!("expected a domain error"),
        }
        let cli = parse(argv("exponents --mu 0.3 --p 3")).unwrap();
        assert!(matches!(
            execute(&cli.command),
            Err(Failure::Domain(Error::MuAboveHardy(_)))
        ));
    }

    #[test]
    fn out_dir_resolution() {
        let o = OutputArgs {
            output: Some("a/b".into()),
            out_dir: Some("/tmp/x".into()),
        };
        assert_eq!(o.resolve().unwrap(), PathBuf::from("/tmp/x/a/b"));
        let o = OutputArgs {
            output: Some("/abs".into()),
            out_dir: Some("/tmp/x".into()),
        };
        assert_eq!(o.resolve().unwrap(), PathBuf::from("/abs"));
        assert!(OutputArgs {
            output: None,
            out_dir: None
        }
        .resolve()
        .is_none());
    }
}
