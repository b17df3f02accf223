//! `shf`: evaluate special functions and kernels, tabulate kernels and run
//! verification experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shf_core::kernels::{build_kernel_grid, k_kernel, p_kernel, DisorderParam, GridSpec};
use shf_core::specfun::{volterra_nu_eval, volterra_nu_prime_eval};
use shf_harness::{run_and_write, ExperimentConfig, HarnessError, KernelCache, Overrides, CACHE_ENV, EXPERIMENTS};

const PASS: u8 = 0;
const FAIL: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "shf", version, about = "Critical 2d stochastic heat flow laboratory")]
struct Cli {
    /// Worker threads for parallel sections [default: available cores]
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print "a,value,rel_err" for the Volterra function ν(a) or ν′(a)
    Nu(NuArgs),
    /// Print "K,P" for the kernels K_t^ϑ(x, y) and P_t^ϑ(x, y), or write a kernel table
    Kernel(KernelArgs),
    /// Run a verification experiment; exit 0 if every check passes, 1 otherwise
    Check(CheckArgs),
    /// Print the default configuration file of an experiment, with parameter units
    Defaults(DefaultsArgs),
}

#[derive(Args)]
struct NuArgs {
    /// Argument a (dimensionless, a > 0)
    #[arg(long, allow_negative_numbers = true)]
    a: f64,
    /// Evaluate the derivative ν′(a) instead of ν(a)
    #[arg(long)]
    prime: bool,
    /// Largest acceptable relative error estimate (dimensionless); exceeding it exits with 1
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args)]
struct KernelArgs {
    /// Time t (time units, t > 0)
    #[arg(long, allow_negative_numbers = true)]
    t: f64,
    /// Disorder parameter ϑ (dimensionless)
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    /// Point x as "x1,x2" (length)
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true, required_unless_present = "table", conflicts_with = "table")]
    x: Option<[f64; 2]>,
    /// Point y as "y1,y2" (length)
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true, required_unless_present = "table", conflicts_with = "table")]
    y: Option<[f64; 2]>,
    /// Write K on a log-spaced radial grid to this binary file, with a JSON sidecar at <PATH>.json
    #[arg(long, value_name = "PATH")]
    table: Option<PathBuf>,
    /// Smallest table radius (length)
    #[arg(long, default_value_t = 1e-4, requires = "table")]
    r_min: f64,
    /// Largest table radius (length)
    #[arg(long, default_value_t = 16.0, requires = "table")]
    r_max: f64,
    /// Number of table radii (count)
    #[arg(long, default_value_t = 121, requires = "table")]
    points: usize,
}

#[derive(Args)]
struct CheckArgs {
    /// Experiment name
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(EXPERIMENTS))]
    experiment: String,
    /// TOML configuration file; values override the defaults
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Random seed (integer); overrides the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving the run directories; overrides the config file
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Parameter override KEY=VALUE in TOML syntax, repeatable; units as in `shf defaults`
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_assignment)]
    set: Vec<(String, String)>,
    /// Kernel table cache directory
    #[arg(long, value_name = "DIR", env = CACHE_ENV)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct DefaultsArgs {
    /// Experiment name
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(EXPERIMENTS))]
    experiment: String,
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got '{s}'"));
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}"));
    Ok([num(parts[0])?, num(parts[1])?])
}

fn parse_assignment(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected KEY=VALUE, got '{s}'")),
    }
}

fn nu(args: &NuArgs) -> Result<u8, String> {
    let eval = if args.prime { volterra_nu_prime_eval(args.a) } else { volterra_nu_eval(args.a) };
    let e = eval.map_err(|e| e.to_string())?;
    println!("{},{:.17e},{:.3e}", args.a, e.value, e.rel_error_estimate);
    if e.rel_error_estimate > args.tol {
        eprintln!("relative error estimate {:.3e} exceeds --tol {:.3e}", e.rel_error_estimate, args.tol);
        return Ok(FAIL);
    }
    Ok(PASS)
}

fn kernel(args: &KernelArgs) -> Result<u8, String> {
    let theta = DisorderParam::new(args.theta);
    if let Some(path) = &args.table {
        let spec = GridSpec::new(args.r_min, args.r_max, args.points).map_err(|e| e.to_string())?;
        let grid = build_kernel_grid(args.t, theta, &spec).map_err(|e| e.to_string())?;
        grid.save(path).map_err(|e| e.to_string())?;
        println!("{}", path.display());
        println!("{}", shf_core::io::sidecar_path(path).display());
        return Ok(PASS);
    }
    let (x, y) = (args.x.expect("required by clap"), args.y.expect("required by clap"));
    let k = k_kernel(args.t, theta, x, y).map_err(|e| e.to_string())?;
    let p = p_kernel(args.t, theta, x, y).map_err(|e| e.to_string())?;
    println!("{k:.17e},{p:.17e}");
    Ok(PASS)
}

fn check(args: &CheckArgs) -> Result<u8, String> {
    let over = Overrides { seed: args.seed, output_dir: args.output_dir.clone(), params: args.set.clone() };
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::load(Some(&args.experiment), path, &over),
        None => ExperimentConfig::resolve(Some(&args.experiment), None, &over),
    }
    .map_err(|e| e.to_string())?;
    let cache = match &args.cache_dir {
        Some(d) => KernelCache::new(d),
        None => KernelCache::from_env(),
    };
    let (report, dir) = run_and_write(&cfg, &cache).map_err(|e| match e {
        HarnessError::Config(m) => format!("config error: {m}"),
        other => other.to_string(),
    })?;
    for c in &report.body.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        println!("{verdict} {}: value {:.6e}, tolerance {:.3e}", c.name, c.value, c.tolerance);
    }
    for name in ["report.json", "checks.csv", "results.csv"] {
        println!("{}", dir.join(name).display());
    }
    if report.passed() {
        Ok(PASS)
    } else {
        for c in report.failed_checks() {
            eprintln!("failed check: {}", c.name);
        }
        Ok(FAIL)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(USAGE);
        }
    }
    let result = match &cli.command {
        Command::Nu(a) => nu(a),
        Command::Kernel(a) => kernel(a),
        Command::Check(a) => check(a),
        Command::Defaults(a) => ExperimentConfig::defaults(&a.experiment).map(|c| {
            print!("{}", c.to_toml_documented());
            PASS
        }).map_err(|e| e.to_string()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE)
        }
    }
}
