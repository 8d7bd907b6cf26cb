//! `lgc` — estimate and test time-varying Granger causality between
//! channels of a multivariate time series.
//!
//! Subcommands: `simulate` (draw from the built-in time-varying VAR
//! models), `fit` (local Whittle fits across rescaled times), `test`
//! (non-causality tests per rescaled time), `mc` (Monte Carlo experiments).
//! All outputs are deterministic functions of the flags, config file,
//! input files and seed.

mod cfgfile;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cfgfile::ConfigFile;
use lgc_core::*;
// the glob brings in the crate's own Result alias; commands use std's
use std::result::Result;

const SCHEMA_VERSION: u32 = 1;

// exit codes: 0 ok, 1 I/O, 2 validation, 3 statistical-procedure error
const EXIT_IO: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_STAT: u8 = 3;

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    fn stat(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_STAT,
            message: message.into(),
        }
    }
}

// input-shaped failures are validation problems, OS failures are I/O,
// everything downstream of a well-formed input is a statistical error
fn from_core(err: LgcError) -> CliError {
    match err {
        LgcError::Io(e) => CliError::io(e.to_string()),
        LgcError::Domain(_)
        | LgcError::Dimension(_)
        | LgcError::Parse { .. }
        | LgcError::RaggedRows { .. }
        | LgcError::EmptyFile => CliError::validation(err.to_string()),
        other => CliError::stat(other.to_string()),
    }
}

fn error_code(err: &LgcError) -> u32 {
    match err {
        LgcError::Domain(_) | LgcError::Dimension(_) => 1,
        LgcError::NotConverged(_) => 2,
        LgcError::SingularMatrix(_) | LgcError::NotPsd(_) => 3,
        LgcError::ZeroGradient(_) => 4,
        LgcError::NonHermitianResidual(_) => 5,
        _ => 6,
    }
}

#[derive(Parser)]
#[command(
    name = "lgc",
    version,
    about = "Local Granger causality for nonstationary multivariate time series",
    after_help = "Config file: UTF-8 key=value lines with [simulate]/[fit]/[test]/[mc] \
sections; flags override file values. LGC_THREADS is the fallback for --threads. \
Exit codes: 0 ok, 1 I/O, 2 validation, 3 statistical-procedure error."
)]
struct Cli {
    /// Worker threads for parallel sections (default: logical cores,
    /// or LGC_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Config file applied underneath explicit flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one of the built-in time-varying VAR(1) models to CSV.
    Simulate(SimulateArgs),
    /// Local Whittle fits across a grid of rescaled times.
    Fit(FitArgs),
    /// Non-causality tests per rescaled time.
    Test(TestArgs),
    /// Monte Carlo experiments (size/power table or estimator sweep).
    Mc(McArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    /// diag(1/2, 1/2) with the early coupling ramp
    I,
    /// diag(7/10, 3/10) with the early coupling ramp
    Ii,
    /// diag(1/2, 1/2) with the late-onset ramp
    Power,
}

impl ModelArg {
    fn kind(self) -> ModelKind {
        match self {
            ModelArg::I => ModelKind::ModelI,
            ModelArg::Ii => ModelKind::ModelII,
            ModelArg::Power => ModelKind::PowerModel,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModelArg::I => "i",
            ModelArg::Ii => "ii",
            ModelArg::Power => "power",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelArg {
    Epanechnikov,
    Uniform,
    Triangular,
}

impl KernelArg {
    fn kind(self) -> KernelKind {
        match self {
            KernelArg::Epanechnikov => KernelKind::Epanechnikov,
            KernelArg::Uniform => KernelKind::Uniform,
            KernelArg::Triangular => KernelKind::Triangular,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StatArg {
    /// Closed-form bivariate statistic with a χ²₁ reference
    Tilde,
    /// Wald statistic for GC = c > 0 with a χ²_d reference
    Wald,
    /// 2·T·b·GC with a sampled quadratic-form reference
    Dagger,
}

#[derive(Args)]
struct SimulateArgs {
    /// Generating model.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Sample length (observations).
    #[arg(long = "T")]
    t_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Pre-sample steps discarded before t = 1.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Input panel CSV (rows = observations, columns = channels).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated rescaled times in (0,1).
    #[arg(long)]
    u: Option<String>,
    /// Rescaled-time range start:stop:step (inclusive ends).
    #[arg(long)]
    u_range: Option<String>,
    /// Kernel bandwidth in rescaled time (default 4·T^(-2/3)).
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    /// Frequency-grid size (even; default max(512, 4T)).
    #[arg(long)]
    grid: Option<usize>,
    /// Start each fit from the previous rescaled time's estimate.
    #[arg(long)]
    warm_start: bool,
    /// Append the plug-in covariance diagonal per fit.
    #[arg(long)]
    with_variance: bool,
    /// Output CSV path. Columns, in order: u; the fitted parameters a11..app
    /// (row-major) and s11..spp (upper triangle); the recursion-convention
    /// coefficients ar11..arpp (ar = −a); objective; converged (0/1);
    /// iterations; gc; with --with-variance the plug-in covariance diagonal
    /// v_theta1..v_thetad; error_code (0 ok, 1 domain, 2 not converged,
    /// 3 singular, 4 zero gradient, 5 non-hermitian residual, 6 other).
    /// Failed rows carry zeros in the value columns.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated rescaled times in (0,1).
    #[arg(long)]
    u: Option<String>,
    /// Rescaled-time range start:stop:step (inclusive ends).
    #[arg(long)]
    u_range: Option<String>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    #[arg(long)]
    grid: Option<usize>,
    /// Statistic to compute.
    #[arg(long, value_enum)]
    stat: Option<StatArg>,
    /// Null value c for the Wald statistic (must be > 0).
    #[arg(long)]
    c: Option<f64>,
    /// On a zero causality gradient, fall back from the Wald statistic to
    /// the centralized one instead of failing.
    #[arg(long)]
    auto_stat: bool,
    /// Effect-block size (cause block is the rest; default 1).
    #[arg(long)]
    effect_dim: Option<usize>,
    /// Draws for the quadratic-form Monte Carlo p-value.
    #[arg(long)]
    mc_draws: Option<usize>,
    #[arg(long)]
    mc_seed: Option<u64>,
    /// Output CSV path. Columns: u; kind (1 dagger, 2 tilde-dagger,
    /// 3 wald); statistic; reference (1 chi-squared, 2 quadratic form);
    /// df (0 for quadratic form); p_value; reject_1pct, reject_5pct,
    /// reject_10pct, reject_15pct (0/1); error_code (as in fit).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    /// Experiment: `table1` (size/power of the closed-form test on the
    /// late-onset model) or `sweep` (estimator band across rescaled time).
    #[arg(long)]
    experiment: Option<String>,
    /// Replicates.
    #[arg(long = "R")]
    replicates: Option<usize>,
    #[arg(long = "T")]
    t_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    #[arg(long)]
    grid: Option<usize>,
    /// Comma-separated rescaled times.
    #[arg(long)]
    u: Option<String>,
    /// Comma-separated significance levels.
    #[arg(long)]
    levels: Option<String>,
    /// Model override for the sweep experiment: i or ii.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    warm_start: bool,
    /// Also write tidy long-format plot data (u, series, value); series
    /// ids are listed in the JSON output.
    #[arg(long)]
    emit_plot_data: bool,
    /// Output path prefix: writes <prefix>.csv and <prefix>.json.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => ConfigFile::load(path).map_err(CliError::validation)?,
        None => ConfigFile::default(),
    };
    let threads = resolve(cli.threads, &config, "", "threads")?.or_else(|| {
        std::env::var("LGC_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::validation("threads must be ≥ 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args, &config),
        Command::Fit(args) => cmd_fit(args, &config),
        Command::Test(args) => cmd_test(args, &config),
        Command::Mc(args) => cmd_mc(args, &config),
    }
}

/// flag > config file > caller default
fn resolve<T: std::str::FromStr>(
    flag: Option<T>,
    config: &ConfigFile,
    section: &str,
    key: &str,
) -> Result<Option<T>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    config
        .get_parsed::<T>(section, key)
        .map_err(CliError::validation)
}

fn parse_u_list(u: Option<String>, u_range: Option<String>) -> Result<Vec<f64>, CliError> {
    let list = match (u, u_range) {
        (Some(_), Some(_)) => {
            return Err(CliError::validation(
                "--u and --u-range are mutually exclusive",
            ))
        }
        (Some(spec), None) => spec
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::validation(format!("bad u value {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?,
        (None, Some(spec)) => {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 3 {
                return Err(CliError::validation(format!(
                    "--u-range expects start:stop:step, got {spec:?}"
                )));
            }
            let nums: Vec<f64> = parts
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::validation(format!("bad range part {s:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let (start, stop, step) = (nums[0], nums[1], nums[2]);
            if step <= 0.0 || step.is_nan() || stop < start {
                return Err(CliError::validation(
                    "range requires stop ≥ start and step > 0",
                ));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|k| start + k as f64 * step).collect()
        }
        (None, None) => return Err(CliError::validation("one of --u or --u-range is required")),
    };
    if list.is_empty() {
        return Err(CliError::validation("empty rescaled-time list"));
    }
    for &u in &list {
        if !(0.0 < u && u < 1.0) {
            return Err(CliError::validation(format!(
                "rescaled time must lie strictly inside (0,1), got {u}"
            )));
        }
    }
    Ok(list)
}

fn parse_levels(spec: Option<String>) -> Result<Vec<f64>, CliError> {
    match spec {
        None => Ok(LEVELS.to_vec()),
        Some(s) => {
            let levels: Vec<f64> = s
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::validation(format!("bad level {x:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if levels.is_empty() || levels.iter().any(|&a| !(0.0 < a && a < 1.0)) {
                return Err(CliError::validation("levels must lie in (0,1)"));
            }
            Ok(levels)
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn kernel_from(
    kernel: Option<KernelArg>,
    bandwidth: Option<f64>,
    t_len: usize,
) -> Result<KernelSpec, CliError> {
    let kind = kernel.unwrap_or(KernelArg::Epanechnikov).kind();
    let b = bandwidth.unwrap_or_else(|| KernelSpec::default_bandwidth(t_len));
    KernelSpec::new(kind, b).map_err(from_core)
}

fn grid_from(grid: Option<usize>, t_len: usize) -> Result<FreqGrid, CliError> {
    match grid {
        Some(n) => FreqGrid::new(n).map_err(from_core),
        None => Ok(FreqGrid::default_for_len(t_len)),
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn cmd_simulate(args: SimulateArgs, config: &ConfigFile) -> Result<(), CliError> {
    let model = match args.model {
        Some(m) => m,
        None => match config.get("simulate", "model") {
            Some("i") => ModelArg::I,
            Some("ii") => ModelArg::Ii,
            Some("power") => ModelArg::Power,
            Some(other) => return Err(CliError::validation(format!("unknown model {other:?}"))),
            None => return Err(CliError::validation("--model is required")),
        },
    };
    let t_len = resolve(args.t_len, config, "simulate", "T")?
        .ok_or_else(|| CliError::validation("--T is required"))?;
    if t_len < 2 {
        return Err(CliError::validation("T must be ≥ 2"));
    }
    let seed = resolve(args.seed, config, "simulate", "seed")?.unwrap_or(0);
    let burn_in = resolve(args.burn_in, config, "simulate", "burn_in")?.unwrap_or(0);
    let out = args
        .out
        .or_else(|| config.get("simulate", "out").map(PathBuf::from))
        .ok_or_else(|| CliError::validation("--out is required"))?;

    let spec = model.kind().tv_var_spec(seed).with_burn_in(burn_in);
    let panel = simulate_tvvar(&spec, t_len).map_err(from_core)?;
    write_file(&out, &render_csv(&panel))?;
    println!(
        "{}",
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "command": "simulate",
            "model": model.name(),
            "T": t_len,
            "p": panel.dim(),
            "seed": seed,
            "burn_in": burn_in,
            "out": out.display().to_string(),
        })
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitContext {
    panel: TimeSeriesPanel,
    kernel: KernelSpec,
    grid: FreqGrid,
    t_len: usize,
}

fn load_fit_context(
    input: Option<PathBuf>,
    bandwidth: Option<f64>,
    kernel: Option<KernelArg>,
    grid: Option<usize>,
    config: &ConfigFile,
    section: &str,
) -> Result<FitContext, CliError> {
    let input = input
        .or_else(|| config.get(section, "input").map(PathBuf::from))
        .ok_or_else(|| CliError::validation("--input is required"))?;
    if !input.exists() {
        return Err(CliError::io(format!("no such file: {}", input.display())));
    }
    let panel = load_csv(&input).map_err(from_core)?;
    let t_len = panel.length();
    let bandwidth = resolve(bandwidth, config, section, "bandwidth")?;
    let kernel = kernel_from(kernel, bandwidth, t_len)?;
    let grid_n = resolve(grid, config, section, "grid")?;
    let grid = grid_from(grid_n, t_len)?;
    Ok(FitContext {
        panel,
        kernel,
        grid,
        t_len,
    })
}

fn cmd_fit(args: FitArgs, config: &ConfigFile) -> Result<(), CliError> {
    // numeric options are validated before any file is touched
    let u_list = parse_u_list(
        args.u.or_else(|| config.get("fit", "u").map(String::from)),
        args.u_range
            .or_else(|| config.get("fit", "u_range").map(String::from)),
    )?;
    let ctx = load_fit_context(
        args.input,
        args.bandwidth,
        args.kernel,
        args.grid,
        config,
        "fit",
    )?;
    let out = args
        .out
        .or_else(|| config.get("fit", "out").map(PathBuf::from))
        .ok_or_else(|| CliError::validation("--out is required"))?;
    let p = ctx.panel.dim();
    let d = VarParams::theta_len(p);
    let part = Partition::new(1, p - 1).map_err(from_core)?;

    let mut header: Vec<String> = vec!["u".into()];
    for i in 0..p {
        for j in 0..p {
            header.push(format!("a{}{}", i + 1, j + 1));
        }
    }
    for i in 0..p {
        for j in i..p {
            header.push(format!("s{}{}", i + 1, j + 1));
        }
    }
    for i in 0..p {
        for j in 0..p {
            header.push(format!("ar{}{}", i + 1, j + 1));
        }
    }
    header.extend([
        "objective".to_string(),
        "converged".to_string(),
        "iterations".to_string(),
        "gc".to_string(),
    ]);
    if args.with_variance {
        header.extend((0..d).map(|i| format!("v_theta{}", i + 1)));
    }
    header.push("error_code".into());

    let mut body = String::new();
    writeln!(body, "{}", header.join(",")).ok();
    let mut previous: Option<WhittleFit> = None;
    let mut failures = 0usize;
    for &u in &u_list {
        match fit_row(
            &ctx,
            u,
            args.warm_start,
            &mut previous,
            &part,
            args.with_variance,
            d,
        ) {
            Ok(fields) => {
                writeln!(body, "{}", fields.join(",")).ok();
            }
            Err(e) => {
                failures += 1;
                eprintln!("fit at u = {u}: {e}");
                let mut fields = vec![fmt17(u)];
                fields.extend(std::iter::repeat_n("0".to_string(), header.len() - 2));
                fields.push(error_code(&e).to_string());
                writeln!(body, "{}", fields.join(",")).ok();
            }
        }
    }
    write_file(&out, &body)?;
    println!(
        "{}",
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "command": "fit",
            "T": ctx.t_len,
            "p": p,
            "u_count": u_list.len(),
            "bandwidth": ctx.kernel.bandwidth(),
            "grid": ctx.grid.len(),
            "failures": failures,
            "out": out.display().to_string(),
        })
    );
    Ok(())
}

fn fit_row(
    ctx: &FitContext,
    u: f64,
    warm_start: bool,
    previous: &mut Option<WhittleFit>,
    part: &Partition,
    with_variance: bool,
    d: usize,
) -> lgc_core::Result<Vec<String>> {
    let init = match (&previous, warm_start) {
        (Some(prev), true) => prev.theta_hat.clone(),
        _ => default_init(&ctx.panel, u, &ctx.kernel)?,
    };
    let fit = local_whittle_fit(&ctx.panel, u, &ctx.kernel, &ctx.grid, &init)?;
    let gc = gc_measure(&fit.theta_hat, part, &ctx.grid)?.gc;
    let mut fields = vec![fmt17(u)];
    fields.extend(fit.theta_hat.theta().iter().map(|&v| fmt17(v)));
    let recursion = fit.var_coefficients();
    for i in 0..recursion.rows() {
        for j in 0..recursion.cols() {
            fields.push(fmt17(recursion.get(i, j)));
        }
    }
    fields.push(fmt17(fit.objective));
    fields.push(if fit.converged {
        "1".into()
    } else {
        "0".into()
    });
    fields.push(fit.iterations.to_string());
    fields.push(fmt17(gc));
    if with_variance {
        let v = asymptotic_variance(&fit.theta_hat, &ctx.kernel, &ctx.grid)?;
        for i in 0..d {
            fields.push(fmt17(v.get(i, i)));
        }
    }
    fields.push("0".into());
    *previous = Some(fit);
    Ok(fields)
}

// ---------------------------------------------------------------------------
// test
// ---------------------------------------------------------------------------

fn cmd_test(args: TestArgs, config: &ConfigFile) -> Result<(), CliError> {
    // numeric options are validated before any file is touched
    let u_list = parse_u_list(
        args.u.or_else(|| config.get("test", "u").map(String::from)),
        args.u_range
            .or_else(|| config.get("test", "u_range").map(String::from)),
    )?;
    let stat = args.stat.unwrap_or(match config.get("test", "stat") {
        Some("wald") => StatArg::Wald,
        Some("dagger") => StatArg::Dagger,
        _ => StatArg::Tilde,
    });
    let c = resolve(args.c, config, "test", "c")?;
    if stat == StatArg::Wald {
        match c {
            None => {
                return Err(CliError::validation(
                    "--c is required for the Wald statistic",
                ))
            }
            Some(v) if v <= 0.0 => return Err(CliError::validation("c must be > 0")),
            _ => {}
        }
    }
    let ctx = load_fit_context(
        args.input,
        args.bandwidth,
        args.kernel,
        args.grid,
        config,
        "test",
    )?;
    let out = args
        .out
        .or_else(|| config.get("test", "out").map(PathBuf::from))
        .ok_or_else(|| CliError::validation("--out is required"))?;
    let p = ctx.panel.dim();
    let effect_dim = resolve(args.effect_dim, config, "test", "effect_dim")?.unwrap_or(1);
    if effect_dim == 0 || effect_dim >= p {
        return Err(CliError::validation(format!(
            "effect-dim must lie in 1..{p}"
        )));
    }
    let part = Partition::new(effect_dim, p - effect_dim).map_err(from_core)?;
    let mc_draws = resolve(args.mc_draws, config, "test", "mc_draws")?.unwrap_or(100_000);
    let mc_seed = resolve(args.mc_seed, config, "test", "mc_seed")?.unwrap_or(0);

    let header = "u,kind,statistic,reference,df,p_value,reject_1pct,reject_5pct,reject_10pct,reject_15pct,error_code";
    let mut body = String::new();
    writeln!(body, "{header}").ok();
    let mut failures = 0usize;
    for &u in &u_list {
        match test_row(&ctx, u, stat, c, &part, mc_draws, mc_seed, args.auto_stat) {
            Ok(fields) => {
                writeln!(body, "{}", fields.join(",")).ok();
            }
            Err(e) => {
                if matches!(e, LgcError::ZeroGradient(_)) && !args.auto_stat {
                    return Err(CliError::stat(format!(
                        "{e}; rerun with --auto-stat to fall back to the centralized statistic"
                    )));
                }
                failures += 1;
                eprintln!("test at u = {u}: {e}");
                let mut fields = vec![fmt17(u)];
                fields.extend(std::iter::repeat_n("0".to_string(), 9));
                fields.push(error_code(&e).to_string());
                writeln!(body, "{}", fields.join(",")).ok();
            }
        }
    }
    write_file(&out, &body)?;
    println!(
        "{}",
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "command": "test",
            "T": ctx.t_len,
            "p": p,
            "u_count": u_list.len(),
            "statistic": match stat {
                StatArg::Tilde => "tilde_dagger",
                StatArg::Wald => "wald",
                StatArg::Dagger => "dagger",
            },
            "failures": failures,
            "out": out.display().to_string(),
        })
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn test_row(
    ctx: &FitContext,
    u: f64,
    stat: StatArg,
    c: Option<f64>,
    part: &Partition,
    mc_draws: usize,
    mc_seed: u64,
    auto_stat: bool,
) -> lgc_core::Result<Vec<String>> {
    let init = default_init(&ctx.panel, u, &ctx.kernel)?;
    let fit = local_whittle_fit(&ctx.panel, u, &ctx.kernel, &ctx.grid, &init)?;
    let result = match stat {
        StatArg::Tilde => stat_tilde_dagger(&fit, &ctx.kernel, ctx.t_len, &ctx.grid)?,
        StatArg::Wald => {
            let grad = gc_gradient(&fit.theta_hat, part, &ctx.grid)?;
            let v = asymptotic_variance(&fit.theta_hat, &ctx.kernel, &ctx.grid)?;
            match stat_wald(
                &fit,
                part,
                c.expect("validated upstream"),
                &grad,
                &v,
                ctx.t_len,
                &ctx.kernel,
                &ctx.grid,
            ) {
                Err(LgcError::ZeroGradient(msg)) if auto_stat => {
                    eprintln!(
                        "u = {u}: zero causality gradient ({msg}); switching to the centralized statistic"
                    );
                    stat_tilde_dagger(&fit, &ctx.kernel, ctx.t_len, &ctx.grid)?
                }
                other => other?,
            }
        }
        StatArg::Dagger => {
            let v = asymptotic_variance(&fit.theta_hat, &ctx.kernel, &ctx.grid)?;
            let h = curvature_h(&fit.theta_hat, part, &ctx.grid)?;
            stat_dagger(
                &fit,
                part,
                &ctx.kernel,
                ctx.t_len,
                &ctx.grid,
                &v,
                &h,
                mc_draws,
                mc_seed,
            )?
        }
    };
    let (kind_code, ref_code, df) = match (result.kind, result.reference) {
        (StatKind::SDagger, _) => (1, 2, 0usize),
        (StatKind::STildeDagger, _) => (2, 1, 1),
        (StatKind::SWald, Reference::ChiSq { df }) => (3, 1, df),
        (StatKind::SWald, _) => (3, 2, 0),
    };
    let mut fields = vec![
        fmt17(u),
        kind_code.to_string(),
        fmt17(result.statistic),
        ref_code.to_string(),
        df.to_string(),
        fmt17(result.p_value.unwrap_or(f64::NAN)),
    ];
    for &(_, reject) in &result.reject_at {
        fields.push(if reject { "1".into() } else { "0".into() });
    }
    fields.push("0".into());
    Ok(fields)
}

// ---------------------------------------------------------------------------
// mc
// ---------------------------------------------------------------------------

fn cmd_mc(args: McArgs, config: &ConfigFile) -> Result<(), CliError> {
    let experiment = args
        .experiment
        .or_else(|| config.get("mc", "experiment").map(String::from))
        .ok_or_else(|| CliError::validation("--experiment is required (table1 or sweep)"))?;
    if experiment != "table1" && experiment != "sweep" {
        return Err(CliError::validation(format!(
            "unknown experiment {experiment:?} (expected table1 or sweep)"
        )));
    }
    let out_prefix = args
        .out_prefix
        .or_else(|| config.get("mc", "out_prefix").map(PathBuf::from))
        .ok_or_else(|| CliError::validation("--out-prefix is required"))?;
    let seed = resolve(args.seed, config, "mc", "seed")?.unwrap_or(0);

    let mut cfg = if experiment == "table1" {
        ExperimentConfig::size_power(seed)
    } else {
        ExperimentConfig::sweep(seed)
    };
    if let Some(r) = resolve(args.replicates, config, "mc", "R")? {
        if r == 0 {
            return Err(CliError::validation("R must be ≥ 1"));
        }
        cfg.replicates = r;
    }
    if let Some(t) = resolve(args.t_len, config, "mc", "T")? {
        if t < 4 {
            return Err(CliError::validation("T must be ≥ 4"));
        }
        cfg.t_len = t;
        cfg.kernel = kernel_from(args.kernel, None, t)?;
        cfg.grid_size = 512usize.max(4 * t);
    }
    let bandwidth = resolve(args.bandwidth, config, "mc", "bandwidth")?;
    if bandwidth.is_some() || args.kernel.is_some() {
        cfg.kernel = kernel_from(args.kernel, bandwidth, cfg.t_len)?;
    }
    if let Some(g) = resolve(args.grid, config, "mc", "grid")? {
        cfg.grid_size = g;
    }
    if let Some(u) = args.u.or_else(|| config.get("mc", "u").map(String::from)) {
        cfg.u_list = parse_u_list(Some(u), None)?;
    }
    cfg.levels = parse_levels(
        args.levels
            .or_else(|| config.get("mc", "levels").map(String::from)),
    )?;
    if let Some(model) = args.model {
        cfg.model = model.kind();
    }
    cfg.warm_start = args.warm_start || config.get("mc", "warm_start") == Some("true");
    cfg.seed = seed;
    cfg.validate().map_err(from_core)?;

    // progress every 5% to standard error
    let total = cfg.replicates;
    let step = (total / 20).max(1);
    let progress = move |done: usize| {
        if done.is_multiple_of(step) || done == total {
            eprintln!(
                "progress: {done}/{total} replicates ({}%)",
                100 * done / total
            );
        }
    };

    let csv_path = out_prefix.with_extension("csv");
    let json_path = out_prefix.with_extension("json");
    let plot_path = out_prefix.with_extension("plot.csv");

    if experiment == "table1" {
        let table = run_size_power_with_progress(&cfg, progress).map_err(from_core)?;
        write_file(&csv_path, &size_power_csv(&table))?;
        let json = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "command": "mc",
            "experiment": "table1",
            "config": &cfg,
            "result": &table,
            "plot_series": "series k is the rejection rate at levels[k]",
        });
        write_file(&json_path, &serde_json::to_string_pretty(&json).unwrap())?;
        if args.emit_plot_data {
            write_file(&plot_path, &size_power_plot_csv(&table))?;
        }
        println!(
            "{}",
            serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "command": "mc",
                "experiment": "table1",
                "replicates": table.replicates,
                "redraws": table.redraws,
                "out_csv": csv_path.display().to_string(),
                "out_json": json_path.display().to_string(),
            })
        );
    } else {
        let sweep = run_sweep_with_progress(&cfg, progress).map_err(from_core)?;
        write_file(&csv_path, &sweep_csv(&sweep))?;
        let json = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "command": "mc",
            "experiment": "sweep",
            "config": &cfg,
            "result": &sweep,
            "plot_series": "0 true coupling, 1 mean estimate, 2 p5, 3 p95",
        });
        write_file(&json_path, &serde_json::to_string_pretty(&json).unwrap())?;
        if args.emit_plot_data {
            write_file(&plot_path, &sweep_plot_csv(&sweep))?;
        }
        println!(
            "{}",
            serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "command": "mc",
                "experiment": "sweep",
                "replicates": cfg.replicates,
                "failed_replicates": sweep.failed_replicates,
                "out_csv": csv_path.display().to_string(),
                "out_json": json_path.display().to_string(),
            })
        );
    }
    Ok(())
}

fn size_power_csv(table: &SizePowerTable) -> String {
    let mut out = String::from("alpha");
    for u in &table.u_list {
        write!(out, ",u_{u}").ok();
    }
    out.push('\n');
    for (i, &alpha) in table.levels.iter().enumerate() {
        write!(out, "{alpha}").ok();
        for rate in &table.rates[i] {
            write!(out, ",{}", fmt17(*rate)).ok();
        }
        out.push('\n');
    }
    out
}

fn size_power_plot_csv(table: &SizePowerTable) -> String {
    let mut out = String::from("u,series,value\n");
    for (i, _) in table.levels.iter().enumerate() {
        for (j, &u) in table.u_list.iter().enumerate() {
            writeln!(out, "{},{},{}", fmt17(u), i, fmt17(table.rates[i][j])).ok();
        }
    }
    out
}

fn sweep_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("u,true_a12,mean,p5,p95,replicates_used\n");
    for j in 0..sweep.u_list.len() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt17(sweep.u_list[j]),
            fmt17(sweep.true_a12[j]),
            fmt17(sweep.mean[j]),
            fmt17(sweep.p5[j]),
            fmt17(sweep.p95[j]),
            sweep.used[j]
        )
        .ok();
    }
    out
}

fn sweep_plot_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("u,series,value\n");
    for j in 0..sweep.u_list.len() {
        let u = fmt17(sweep.u_list[j]);
        writeln!(out, "{u},0,{}", fmt17(sweep.true_a12[j])).ok();
        writeln!(out, "{u},1,{}", fmt17(sweep.mean[j])).ok();
        writeln!(out, "{u},2,{}", fmt17(sweep.p5[j])).ok();
        writeln!(out, "{u},3,{}", fmt17(sweep.p95[j])).ok();
    }
    out
}
