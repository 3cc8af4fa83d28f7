use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mixscal::runner::{model_catalog, run, CheckKind, RunConfig, RunError};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Verify mixed scalar curvature identities, integral formulas and variations on model manifolds.
#[derive(Parser, Debug)]
#[command(name = "mixscal", version)]
struct Args {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH", required_unless_present = "list_models")]
    config: Option<PathBuf>,
    /// Comma-separated suites: identity, integral, variation, euler-lagrange, semi-symmetric, all.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    checks: Option<Vec<CheckKind>>,
    /// Quadrature nodes per axis.
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
    /// Seed for sample points and variation families.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Report path; standard output when absent from both flag and config.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, value_name = "W", default_value_t = 1)]
    workers: usize,
    /// Print the built-in models and exit.
    #[arg(long)]
    list_models: bool,
}

fn load(args: &Args) -> Result<RunConfig, RunError> {
    let path = args.config.as_ref().expect("clap enforces --config");
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_toml(&text)
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    if let Some(c) = &args.checks {
        cfg.checks = c.clone();
    }
    if let Some(g) = args.grid {
        cfg.grid = g;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.out.is_some() {
        cfg.output = args.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(args: &Args) -> Result<bool, RunError> {
    let cfg = load(args)?;
    if args.workers == 0 {
        return Err(RunError::Config("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .map_err(|e| RunError::Config(e.to_string()))?;
    let report = pool.install(|| run(&cfg))?;
    let json = report.to_json() + "\n";
    match &cfg.output {
        Some(p) => fs::write(p, &json)
            .map_err(|e| RunError::Config(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{json}"),
    }
    let mut err = std::io::stderr().lock();
    for c in &report.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(err, "{verdict} {:<48} {:>12.3e} (tol {:.1e})", c.id, c.value, c.tolerance);
    }
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_models {
        for (name, params) in model_catalog() {
            println!("{name:<24} {params}");
        }
        return ExitCode::SUCCESS;
    }
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("mixscal: {e}");
            ExitCode::from(match e {
                RunError::Config(_) => EXIT_CONFIG,
                RunError::Numerical(_) => EXIT_NUMERICAL,
            })
        }
    }
}
