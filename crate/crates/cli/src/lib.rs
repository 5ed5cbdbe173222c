//! Argument grammar and dispatch for the `mape-regress` binary.
//!
//! Exit codes: 0 success, 1 usage or path error, 2 data error, 3 solver
//! non-convergence. Every failure is reported as one line on stderr.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use mape_regress::bounds::{
    consistency_rate, covering_bound, deviation_bound_composed, rate_table, required_sample_size, schedule_check,
    BoundParams, Schedule,
};
use mape_regress::harness::{
    comparison_experiment, convergence_experiment, risk_matrix, ClampSchedule, ExperimentConfig, Link, SyntheticSpec,
};
use mape_regress::io::{format_f64, model_to_json, parse_model_json, read_dataset_csv, TargetSelector};
use mape_regress::regressors::fit;
use mape_regress::wl1solver::{SolverConfig, SolverMethod};
use mape_regress::{Error, FitConfig, LossKind};

pub const THREADS_ENV: &str = "MAPE_REGRESS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mape-regress", version, about = "MAPE regression, risk evaluation and bound calculators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a linear model to a CSV dataset.
    Fit(FitArgs),
    /// Evaluate a saved model on a CSV dataset.
    Eval(EvalArgs),
    /// Generalization-bound calculators.
    Bound(BoundArgs),
    /// ERM convergence experiment on synthetic data.
    Simulate(SimulateArgs),
    /// Fit all three losses on one synthetic sample and cross-evaluate.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
#[group(id = "target_column", multiple = false)]
pub struct TargetArgs {
    /// Target column name [default: y].
    #[arg(long)]
    pub target: Option<String>,
    /// Zero-based target column index.
    #[arg(long)]
    pub target_index: Option<usize>,
}

impl TargetArgs {
    fn selector(&self) -> TargetSelector {
        match (&self.target, self.target_index) {
            (_, Some(i)) => TargetSelector::Index(i),
            (Some(name), None) => TargetSelector::Name(name.clone()),
            (None, None) => TargetSelector::default(),
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub loss: LossKind,
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long = "in", value_name = "CSV")]
    pub input: PathBuf,
    /// Model JSON output.
    #[arg(long, value_name = "JSON")]
    pub out: PathBuf,
    /// Fit report JSON output; printed to stdout when omitted.
    #[arg(long, value_name = "JSON")]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub no_intercept: bool,
    /// Drop rows with |y| below this value before fitting.
    #[arg(long)]
    pub lambda_screen: Option<f64>,
    /// Truncate predictions into [-B_G, B_G].
    #[arg(long)]
    pub clamp: Option<f64>,
    #[arg(long, default_value = "simplex-exact")]
    pub method: SolverMethod,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    #[arg(long = "in", value_name = "CSV")]
    pub input: PathBuf,
    /// Loss to report [default: the model's fitting loss].
    #[arg(long)]
    pub loss: Option<LossKind>,
    #[command(flatten)]
    pub target: TargetArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("quantity").required(true).multiple(false)
    .args(["k_rate", "covering", "deviation", "required_n", "schedule", "table"])))]
pub struct BoundArgs {
    /// K(n, eps); needs --eps --bn --vn --n.
    #[arg(long)]
    pub k_rate: bool,
    /// Covering-number bound; needs --eps --v and --bn or --lambda/--bg.
    #[arg(long)]
    pub covering: bool,
    /// Uniform-deviation bound; as --covering plus --n.
    #[arg(long)]
    pub deviation: bool,
    /// Smallest n with K(n, eps) <= delta; needs --eps --delta --bn --vn.
    #[arg(long)]
    pub required_n: bool,
    /// Check the growth schedule v_n = 2 n^a, B_G = n^b; needs --a --b.
    #[arg(long)]
    pub schedule: bool,
    /// CSV of K and the deviation bound over --n-grid x --eps-grid.
    #[arg(long)]
    pub table: bool,

    #[arg(long)]
    pub eps: Option<f64>,
    /// Loss envelope B_n.
    #[arg(long)]
    pub bn: Option<f64>,
    /// VC dimension v_n.
    #[arg(long)]
    pub vn: Option<f64>,
    #[arg(long)]
    pub n: Option<u64>,
    /// Target floor; with --bg gives B = 1 + B_G / lambda.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub bg: Option<f64>,
    /// Norm index of the covering number.
    #[arg(long, default_value_t = 1)]
    pub p: u32,
    /// VC dimension for --covering and --deviation.
    #[arg(long)]
    pub v: Option<u32>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// exp (multiplicative noise) or affine.
    #[arg(long, default_value = "exp")]
    pub link: Link,
    /// True coefficients; their count sets the dimension.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.8,-0.5")]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub intercept: f64,
    #[arg(long, default_value_t = 0.3)]
    pub sigma: f64,
    /// Targets are floored at this value.
    #[arg(long, default_value_t = 0.05)]
    pub floor: f64,
}

impl SpecArgs {
    fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            d: self.beta.len(),
            beta_star: self.beta.clone(),
            intercept_star: self.intercept,
            noise_sigma: self.sigma,
            target_floor: self.floor,
            link: self.link,
            ..SyntheticSpec::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, value_delimiter = ',', default_value = "50,200,800,3200")]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    #[arg(long, default_value_t = 2000)]
    pub m_test: usize,
    #[arg(long, default_value_t = 20000)]
    pub m_mc: usize,
    #[arg(long, default_value_t = 20150601)]
    pub seed: u64,
    /// Clamp fitted models at clamp_scale * n^clamp_exponent.
    #[arg(long, requires = "clamp_exponent")]
    pub clamp_scale: Option<f64>,
    #[arg(long, requires = "clamp_scale")]
    pub clamp_exponent: Option<f64>,
    /// One row per (n, replicate).
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
    /// Mean and spread per n.
    #[arg(long, value_name = "CSV")]
    pub summary: PathBuf,
    /// Replicates whose fit failed.
    #[arg(long, value_name = "CSV")]
    pub failures: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 2000)]
    pub m_test: usize,
    #[arg(long, default_value_t = 20150601)]
    pub seed: u64,
    /// Risk matrix CSV; stdout when omitted.
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

/// A failed command: exit code and a one-line message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument(_) | Error::Io(_) => 1,
            Error::NonConvergence { .. } => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

/// Parses argv (including the program name) without running anything.
pub fn parse_args<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(argv)
}

/// Runs one command against the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match parse_args(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let _ = writeln!(err, "error: {}", one_line(&e.to_string()));
            return 1;
        }
    };
    let outcome = dispatch(&cli, out, err);
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", one_line(&f.message));
            f.code
        }
    }
}

fn one_line(s: &str) -> String {
    let first = s.trim().lines().next().unwrap_or("").trim();
    first.strip_prefix("error: ").unwrap_or(first).replace('\r', " ")
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Failure::usage(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Failure::usage(format!("cannot start worker threads: {e}")))
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Bound(a) => cmd_bound(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, err),
        Command::Compare(a) => cmd_compare(a, out),
    }
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::usage(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, line: &str) -> CmdResult {
    writeln!(out, "{line}").map_err(|e| Failure::usage(format!("cannot write output: {e}")))
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> CmdResult {
    let data = read_dataset_csv(open(&a.input)?, &a.target.selector())?;
    let mut solver = match a.method {
        SolverMethod::SimplexExact => SolverConfig::default(),
        SolverMethod::Irls => SolverConfig::irls(),
    };
    if let Some(m) = a.max_iterations {
        solver.max_iterations = m;
    }
    if let Some(t) = a.tolerance {
        solver.tolerance = t;
    }
    let cfg = FitConfig {
        with_intercept: !a.no_intercept,
        lambda_screen: a.lambda_screen,
        clamp: a.clamp,
        solver,
        ..FitConfig::new(a.loss)
    };
    let (model, report) = fit(&data, &cfg)?;
    let mut json = model_to_json(&model)?;
    json.push('\n');
    write_text(&a.out, &json)?;
    let report = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    match &a.report {
        Some(path) => write_text(path, &(report + "\n")),
        None => emit(out, &report),
    }
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> CmdResult {
    let text = std::fs::read_to_string(&a.model)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", a.model.display())))?;
    let model = parse_model_json(&text)?;
    let data = read_dataset_csv(open(&a.input)?, &a.target.selector())?;
    let risk = model.evaluate(&data, a.loss.unwrap_or(model.loss))?;
    emit(out, &format_f64(risk.value()))
}

fn need<T: Copy>(v: Option<T>, flag: &str, what: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::usage(format!("{what} needs --{flag}")))
}

fn bound_params(a: &BoundArgs, what: &str, n: u64) -> Result<BoundParams, Failure> {
    let eps = need(a.eps, "eps", what)?;
    let v = need(a.v, "v", what)?;
    let params = match (a.bn, a.lambda, a.bg) {
        (Some(bn), None, None) => BoundParams::from_envelope(bn, a.p, v, n, eps)?,
        (None, Some(lambda), Some(bg)) => BoundParams::new(lambda, bg, a.p, v, n, eps)?,
        _ => return Err(Failure::usage(format!("{what} needs either --bn or both --lambda and --bg"))),
    };
    Ok(params)
}

fn warn(err: &mut dyn Write, violated: bool, what: &str) {
    if violated {
        let _ = writeln!(err, "warning: {what} evaluated outside eps < B/4; the value is not a valid bound");
    }
}

fn cmd_bound(a: &BoundArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    if a.k_rate {
        let what = "--k-rate";
        let k = consistency_rate(
            need(a.n, "n", what)?,
            need(a.eps, "eps", what)?,
            need(a.bn, "bn", what)?,
            need(a.vn, "vn", what)?,
        )?;
        emit(out, &format_f64(k))
    } else if a.covering {
        let c = covering_bound(&bound_params(a, "--covering", 1)?)?;
        warn(err, c.precondition_violated, "covering bound");
        emit(out, &format_f64(c.value))
    } else if a.deviation {
        let n = need(a.n, "n", "--deviation")?;
        let d = deviation_bound_composed(&bound_params(a, "--deviation", n)?)?;
        warn(err, d.precondition_violated, "covering bound at eps/8");
        emit(out, &format_f64(d.value))
    } else if a.required_n {
        let what = "--required-n";
        let n = required_sample_size(
            need(a.eps, "eps", what)?,
            need(a.delta, "delta", what)?,
            need(a.bn, "bn", what)?,
            need(a.vn, "vn", what)?,
        )?;
        emit(out, &n.to_string())
    } else if a.schedule {
        bound_schedule(a, out)
    } else {
        bound_table(a, out)
    }
}

// Fields are numbers and loss names, so no CSV quoting is ever needed.
fn write_table(
    path: &Option<PathBuf>,
    out: &mut dyn Write,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> CmdResult {
    let mut text = header.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    match path {
        Some(p) => write_text(p, &text),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::usage(format!("cannot write output: {e}"))),
    }
}

fn bound_schedule(a: &BoundArgs, out: &mut dyn Write) -> CmdResult {
    let what = "--schedule";
    let s = Schedule::power_law(need(a.a, "a", what)?, need(a.b, "b", what)?);
    let grid = a
        .n_grid
        .clone()
        .unwrap_or_else(|| vec![1_000, 10_000, 100_000, 1_000_000, 10_000_000]);
    let report = schedule_check(&s, a.lambda.unwrap_or(1.0), &grid, a.eps.unwrap_or(0.5))?;
    let verdict = if report.holds { "holds" } else { "fails" };
    match &a.out {
        Some(_) => emit(out, verdict)?,
        None => emit(out, &format!("# condition a + 2b < 1 {verdict}"))?,
    }
    let rows = report.points.iter().map(|p| {
        vec![
            p.n.to_string(),
            format_f64(p.vc_dim),
            format_f64(p.bound_g),
            format_f64(p.envelope),
            format_f64(p.growth_term),
            format_f64(p.log_rate),
        ]
    });
    write_table(&a.out, out, &["n", "v_n", "B_G", "B_n", "growth_term", "log_K"], rows)
}

fn bound_table(a: &BoundArgs, out: &mut dyn Write) -> CmdResult {
    let what = "--table";
    let n_grid = a.n_grid.clone().ok_or_else(|| Failure::usage("--table needs --n-grid"))?;
    let eps_grid = a.eps_grid.clone().ok_or_else(|| Failure::usage("--table needs --eps-grid"))?;
    let bn = need(a.bn, "bn", what)?;
    let vn = need(a.vn, "vn", what)?;
    if vn.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&vn) {
        return Err(Failure::usage(format!("--table needs an integer --vn, got {vn}")));
    }
    let rows = rate_table(&n_grid, &eps_grid, bn, vn as u32)?;
    let rows = rows.iter().map(|r| {
        vec![
            r.n.to_string(),
            format_f64(r.eps),
            format_f64(r.envelope),
            r.vc_dim.to_string(),
            format_f64(r.rate),
            format_f64(r.deviation_bound),
        ]
    });
    write_table(&a.out, out, &["n", "eps", "B_n", "v_n", "K", "deviation_bound"], rows)
}

fn cmd_simulate(a: &SimulateArgs, err: &mut dyn Write) -> CmdResult {
    let cfg = ExperimentConfig {
        n_grid: a.n_grid.clone(),
        replicates: a.replicates,
        m_test: a.m_test,
        m_mc: a.m_mc,
        seed: a.seed,
        clamp_schedule: a
            .clamp_scale
            .zip(a.clamp_exponent)
            .map(|(scale, exponent)| ClampSchedule { scale, exponent }),
    };
    let spec = a.spec.spec();
    let res = thread_pool()?.install(|| convergence_experiment(&spec, &cfg))?;
    res.write_rows_csv(create(&a.out)?)?;
    res.write_summary_csv(create(&a.summary)?)?;
    if let Some(path) = &a.failures {
        res.write_failures_csv(create(path)?)?;
    }
    if !res.failures.is_empty() {
        let _ = writeln!(err, "warning: {} replicate fits failed", res.failures.len());
    }
    Ok(())
}

fn cmd_compare(a: &CompareArgs, out: &mut dyn Write) -> CmdResult {
    let spec = a.spec.spec();
    let res = thread_pool()?.install(|| comparison_experiment(&spec, a.n, a.seed, a.m_test))?;
    let mut rows = Vec::new();
    for (split, test) in [("train", false), ("test", true)] {
        for (kind, risks) in LossKind::ALL.iter().zip(risk_matrix(&res, test)) {
            let mut rec = vec![split.to_string(), kind.to_string()];
            rec.extend(risks.iter().map(|&v| format_f64(v)));
            rows.push(rec);
        }
    }
    write_table(&a.out, out, &["split", "fit_loss", "mse", "mae", "mape"], rows.into_iter())
}
