//! `optdesign`: plan locally D-optimal 2×2 binary-response experiments from
//! the shell. Subcommands mirror the library: solve / fit / robustness /
//! simulate / curve, all with machine-readable output (JSON on stdout,
//! diagnostics on stderr).
//!
//! Exit codes: 0 ok, 2 usage or validation error, 3 numerical failure,
//! 4 I/O error.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use optdesign_core::{
    allocate, analyze, det_criterion, r_max, r_max_unbounded, run_study, solve, theta_star,
    variance_from_weight, weight_curve, weights_from_beta, BetaVector, BinomialTable,
    Error as CoreError, LinkFunction, RangeSpec, RmaxCase, SolverConfig, StudyConfig,
    VarianceVector, WeightVector,
};

const ENV_OUT_DIR: &str = "OPTDESIGN_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "optdesign",
    about = "Locally D-optimal designs for 2x2 experiments with binary response",
    version
)]
struct Cli {
    /// Flat key=value config file; command-line flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the optimal allocation for given weights or regression parameters.
    Solve(SolveArgs),
    /// Fit the main-effects GLM to 2x2 cell counts and analyze the implied design.
    Fit(FitArgs),
    /// Worst-case efficiency loss of the design implied by the given weights.
    Robustness(RobustnessArgs),
    /// Seeded Monte Carlo sensitivity study; writes samples.csv and summary.csv.
    Simulate(SimulateArgs),
    /// Weight-curve plot data (eta, mu, w) as CSV on stdout.
    Curve(CurveArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Weights w1,w2,w3,w4 at the design points (+,+),(+,-),(-,+),(-,-).
    #[arg(long, value_name = "W1,W2,W3,W4", conflicts_with = "beta")]
    w: Option<String>,
    /// Regression parameters b0,b1,b2 (requires --link).
    #[arg(
        long,
        value_name = "B0,B1,B2",
        requires = "link",
        allow_hyphen_values = true
    )]
    beta: Option<String>,
    /// Link function: logit, probit, loglog or cloglog.
    #[arg(long)]
    link: Option<String>,
    /// Round the optimal proportions into an allocation of N units.
    #[arg(long)]
    n: Option<u64>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV file with header x1,x2,successes,trials and four data rows.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    #[arg(long)]
    link: Option<String>,
}

#[derive(Args)]
struct RobustnessArgs {
    /// Assumed weights w1,w2,w3,w4.
    #[arg(long, value_name = "W1,W2,W3,W4")]
    w: Option<String>,
    /// Lower bound a of the variance range.
    #[arg(long, conflicts_with = "unbounded")]
    vlow: Option<f64>,
    /// Upper bound b of the variance range.
    #[arg(long, conflicts_with = "unbounded")]
    vhigh: Option<f64>,
    /// Let the true variances be unbounded above.
    #[arg(long, default_value_t = false)]
    unbounded: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    link: Option<String>,
    /// Number of sampled weight vectors.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    wlow: Option<f64>,
    #[arg(long)]
    whigh: Option<f64>,
    /// Output directory (default: $OPTDESIGN_OUT_DIR or the working directory).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also dump the full pairwise loss matrix as losses.csv.
    #[arg(long, default_value_t = false)]
    full: bool,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    link: Option<String>,
    /// Lowest linear-predictor value.
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    /// Highest linear-predictor value.
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    steps: Option<usize>,
}

/// Failure classes mapped to the exit-code contract.
enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::NoConvergence { .. } | CoreError::DegenerateOptimum => {
                CliError::Numerical(msg)
            }
            CoreError::Io { .. } => CliError::Io(msg),
            _ => CliError::Validation(msg),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("optdesign: {}", e.message());
            return ExitCode::from(e.code());
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args, &config),
        Command::Fit(args) => cmd_fit(args, &config),
        Command::Robustness(args) => cmd_robustness(args, &config),
        Command::Simulate(args) => cmd_simulate(args, &config),
        Command::Curve(args) => cmd_curve(args, &config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("optdesign: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Flat key=value file; `#` starts a comment line.
fn load_config(path: Option<&Path>) -> CliResult<HashMap<String, String>> {
    let mut map = HashMap::new();
    let Some(path) = path else {
        return Ok(map);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Validation(format!(
                "{}:{}: expected key=value, got '{line}'",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn config_get<T: FromStr>(config: &HashMap<String, String>, key: &str) -> CliResult<Option<T>> {
    match config.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| CliError::Validation(format!("config key '{key}': cannot parse '{raw}'"))),
    }
}

/// Flag value if present, else the config-file entry.
fn resolve<T: FromStr>(
    flag: Option<T>,
    config: &HashMap<String, String>,
    key: &str,
) -> CliResult<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => config_get(config, key),
    }
}

fn parse_list<const N: usize>(text: &str, what: &str) -> CliResult<[f64; N]> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(CliError::Validation(format!(
            "{what} needs {N} comma-separated values, got {}",
            parts.len()
        )));
    }
    let mut out = [0.0; N];
    for (i, part) in parts.iter().enumerate() {
        out[i] = part
            .parse()
            .map_err(|_| CliError::Validation(format!("{what}: cannot parse '{part}'")))?;
    }
    Ok(out)
}

fn parse_link(text: &str) -> CliResult<LinkFunction> {
    text.parse::<LinkFunction>().map_err(CliError::from)
}

/// Rounds to 12 significant decimal digits for stable JSON output.
fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() || !(1e-300..1e300).contains(&x.abs()) {
        return x;
    }
    let exp = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(11 - exp);
    (x * scale).round() / scale
}

fn json_num(x: f64) -> Value {
    json!(sig12(x))
}

fn json_vec(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| json_num(x)).collect())
}

fn emit(value: &Value) {
    println!("{value}");
}

/// Weights from --w, or from --beta and --link.
fn weights_from_args(
    w: Option<String>,
    beta: Option<String>,
    link: Option<String>,
    config: &HashMap<String, String>,
) -> CliResult<WeightVector> {
    let w = resolve(w, config, "w")?;
    let beta = resolve(beta, config, "beta")?;
    let link = resolve(link, config, "link")?;
    match (w, beta) {
        (Some(_), Some(_)) => Err(CliError::Validation(
            "--w and --beta are mutually exclusive".into(),
        )),
        (Some(text), None) => {
            let parts: [f64; 4] = parse_list(&text, "--w")?;
            if parts.iter().any(|&x| x <= 0.0) {
                return Err(CliError::Validation(
                    "--w components must be strictly positive".into(),
                ));
            }
            WeightVector::new(parts).map_err(CliError::from)
        }
        (None, Some(text)) => {
            let link_name =
                link.ok_or_else(|| CliError::Validation("--beta requires --link".into()))?;
            let link = parse_link(&link_name)?;
            let b: [f64; 3] = parse_list(&text, "--beta")?;
            let beta = BetaVector::new(b[0], b[1], b[2])?;
            Ok(weights_from_beta(link, &beta))
        }
        (None, None) => Err(CliError::Validation(
            "exactly one of --w or --beta is required".into(),
        )),
    }
}

fn cmd_solve(args: SolveArgs, config: &HashMap<String, String>) -> CliResult<()> {
    let w = weights_from_args(args.w, args.beta, args.link, config)?;
    let n = resolve(args.n, config, "n")?;
    let v: VarianceVector = variance_from_weight(&w)?;
    let sol = solve(&v, &SolverConfig::default())?;
    let det = det_criterion(&w, &sol.p)?;
    let mut out = json!({
        "p": json_vec(&sol.p.as_array()),
        "L": json_num(sol.l_max),
        "det": json_num(det),
        "branch": sol.branch.to_string(),
    });
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Validation("--n must be at least 1".into()));
        }
        let units = allocate(&sol.p, n);
        out["allocation"] = json!(units.to_vec());
    }
    emit(&out);
    Ok(())
}

fn cmd_fit(args: FitArgs, config: &HashMap<String, String>) -> CliResult<()> {
    let data: PathBuf = resolve(args.data, config, "data")?
        .ok_or_else(|| CliError::Validation("--data FILE is required".into()))?;
    let link = parse_link(
        &resolve(args.link, config, "link")?
            .ok_or_else(|| CliError::Validation("--link is required".into()))?,
    )?;
    let table = BinomialTable::from_csv_path(&data)?;
    let fit = analyze(&table, link)?;
    if !fit.boundary_cells.is_empty() {
        eprintln!(
            "optdesign: warning: boundary cell(s) {:?} (observed proportion 0 or 1); \
             estimates may be unstable",
            fit.boundary_cells
        );
    }
    emit(&json!({
        "beta": json_vec(&[fit.beta.b0, fit.beta.b1, fit.beta.b2]),
        "w": json_vec(&fit.w_hat.as_array()),
        "p_opt": json_vec(&fit.p_opt.as_array()),
        "det_opt": json_num(fit.det_opt),
        "det_uniform": json_num(fit.det_uniform),
        "uniform_efficiency": json_num(fit.uniform_efficiency),
        "iterations": fit.iterations,
        "converged": fit.converged,
        "boundary_cells": fit.boundary_cells,
    }));
    Ok(())
}

fn cmd_robustness(args: RobustnessArgs, config: &HashMap<String, String>) -> CliResult<()> {
    let w_text: String = resolve(args.w, config, "w")?
        .ok_or_else(|| CliError::Validation("--w W1,W2,W3,W4 is required".into()))?;
    let parts: [f64; 4] = parse_list(&w_text, "--w")?;
    if parts.iter().any(|&x| x <= 0.0) {
        return Err(CliError::Validation(
            "--w components must be strictly positive".into(),
        ));
    }
    let w = WeightVector::new(parts)?;
    let v_c = variance_from_weight(&w)?;
    let p_c = solve(&v_c, &SolverConfig::default())?.p;

    let unbounded = args.unbounded || config_get::<bool>(config, "unbounded")?.unwrap_or(false);
    let vlow = resolve(args.vlow, config, "vlow")?;
    let vhigh = resolve(args.vhigh, config, "vhigh")?;

    let report = if unbounded {
        json!({
            "r_max": json_num(r_max_unbounded(&p_c, &v_c)),
            "case": RmaxCase::Unbounded.to_string(),
            "attaining_vt": Value::Null,
            "theta": Value::Null,
            "theta_star": json_num(theta_star()),
        })
    } else {
        let (Some(a), Some(b)) = (vlow, vhigh) else {
            return Err(CliError::Validation(
                "either --unbounded or both --vlow and --vhigh are required".into(),
            ));
        };
        let range = RangeSpec::bounded(a, b)?;
        let rep = r_max(&p_c, &v_c, &range)?;
        json!({
            "r_max": json_num(rep.value),
            "case": rep.case.to_string(),
            "attaining_vt": rep.attaining_vt.map(|vt| json_vec(&vt)).unwrap_or(Value::Null),
            "theta": json_num(range.theta()),
            "theta_star": json_num(theta_star()),
        })
    };
    emit(&report);
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, config: &HashMap<String, String>) -> CliResult<()> {
    let link = parse_link(
        &resolve(args.link, config, "link")?
            .ok_or_else(|| CliError::Validation("--link is required".into()))?,
    )?;
    let seed = resolve(args.seed, config, "seed")?.unwrap_or(0);
    let mut study = StudyConfig::new(link, seed);
    if let Some(n) = resolve(args.n, config, "n")? {
        study.n_samples = n;
    }
    if let Some(wlow) = resolve(args.wlow, config, "wlow")? {
        study.w_low = wlow;
    }
    if let Some(whigh) = resolve(args.whigh, config, "whigh")? {
        study.w_high = whigh;
    }
    study.retain_losses = args.full || config_get::<bool>(config, "full")?.unwrap_or(false);
    study.validate().map_err(CliError::from)?;

    let out_dir: PathBuf = match resolve(args.out, config, "out")? {
        Some(dir) => dir,
        None => std::env::var_os(ENV_OUT_DIR)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    };

    let result = run_study(&study)?;
    optdesign_core::export_study(&result, &out_dir)?;

    let mut files = vec!["samples.csv".to_string(), "summary.csv".to_string()];
    if study.retain_losses {
        files.push("losses.csv".to_string());
    }
    emit(&json!({
        "out_dir": out_dir.display().to_string(),
        "files": files,
        "n_samples": study.n_samples,
        "seed": seed,
        "saturated_fraction": json_num(result.saturated_fraction),
        "failures": result.failures.len(),
    }));
    Ok(())
}

fn cmd_curve(args: CurveArgs, config: &HashMap<String, String>) -> CliResult<()> {
    let link = parse_link(
        &resolve(args.link, config, "link")?
            .ok_or_else(|| CliError::Validation("--link is required".into()))?,
    )?;
    let from = resolve(args.from, config, "from")?.unwrap_or(-6.0);
    let to = resolve(args.to, config, "to")?.unwrap_or(6.0);
    let steps = resolve(args.steps, config, "steps")?.unwrap_or(121);
    if steps < 1 {
        return Err(CliError::Validation("--steps must be at least 1".into()));
    }
    if !(from.is_finite() && to.is_finite()) || from > to {
        return Err(CliError::Validation(format!(
            "bad grid range [{from}, {to}]"
        )));
    }
    let grid: Vec<f64> = if steps == 1 {
        vec![from]
    } else {
        (0..steps)
            .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
            .collect()
    };
    let points = weight_curve(link, &grid)?;
    // 15 significant digits per column
    println!("eta,mu,w");
    for pt in points {
        println!("{:.14e},{:.14e},{:.14e}", pt.eta, pt.mu, pt.w);
    }
    Ok(())
}
