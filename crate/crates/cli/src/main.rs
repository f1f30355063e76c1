//! dotlab: solve divergence-regularized transport instances and run the
//! sampling experiments around them.
//!
//! Exit codes: 0 success, 2 validation failure (every violation listed),
//! 3 solver non-convergence, 4 experiment aborted by the replicate
//! exclusion threshold, 1 anything else (including invariant-suite
//! failures from `check`). Experiment runs write the report CSV plus a
//! `<output>.meta.json` side file carrying the seed, a config echo, the
//! wall time, and a machine-readable error record when something failed.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{CommandKind, ConfigFile, Loaded, PopulationSpec, SolveSection};
use dotlab_core::stats::{StatsError, StatsProblem};
use dotlab_core::{io, recover_plan, solve_scaled, SolverError};

#[derive(Parser)]
#[command(name = "dotlab", version, about = "Divergence-regularized transport toolbox")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and optionally write potentials/plan CSVs
    Solve(SolveArgs),
    /// Error-decay experiment driven by a config file
    Rate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Central-limit experiment driven by a config file
    Clt {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the randomized invariant suite
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// Config file; replaces all direct flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Measure CSV (columns x1..xd,weight)
    #[arg(long)]
    mu: Option<PathBuf>,
    /// Measure CSV (columns x1..xd,weight)
    #[arg(long)]
    nu: Option<PathBuf>,
    /// "euclidean" or a dense cost CSV path
    #[arg(long)]
    cost: Option<String>,
    /// Divergence name (entropic, power:p=<real>)
    #[arg(long)]
    div: Option<String>,
    /// Regularization strength (default 1)
    #[arg(long)]
    epsilon: Option<f64>,
    /// Write the coupling here (columns i,j,mass,density)
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Write the potentials here (columns side,index,value)
    #[arg(long)]
    potentials: Option<PathBuf>,
}

#[derive(serde::Serialize)]
struct ErrorRecord {
    kind: &'static str,
    message: String,
}

#[derive(serde::Serialize)]
struct Metadata<'a> {
    seed: u64,
    config: &'a str,
    wall_time_seconds: f64,
    error: Option<ErrorRecord>,
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve(args) => run_solve(&args),
        Command::Rate { config } => run_experiment(CommandKind::Rate, &config),
        Command::Clt { config } => run_experiment(CommandKind::Clt, &config),
        Command::Check { seed } => run_check(seed),
    };
    ExitCode::from(code)
}

/// DOTLAB_THREADS caps the worker pool; default is available parallelism.
fn init_threads() {
    let Ok(raw) = std::env::var("DOTLAB_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(k) if k > 0 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
        _ => eprintln!("warning: ignoring DOTLAB_THREADS={raw:?} (want a positive integer)"),
    }
}

fn report_violations(violations: &[String]) -> u8 {
    for v in violations {
        eprintln!("config error: {v}");
    }
    eprintln!("{} validation error(s)", violations.len());
    2
}

fn load_config_file(path: &Path, kind: CommandKind) -> Result<Loaded, u8> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("config error: cannot read {}: {e}", path.display());
        2u8
    })?;
    let cfg = config::parse(&text).map_err(|e| {
        eprintln!("config parse error: {e}");
        2u8
    })?;
    config::load(&cfg, kind).map_err(|violations| report_violations(&violations))
}

fn write_metadata(anchor: &Path, seed: u64, echo: &str, started: Instant, error: Option<ErrorRecord>) {
    let meta = Metadata {
        seed,
        config: echo,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        error,
    };
    let path = PathBuf::from(format!("{}.meta.json", anchor.display()));
    match serde_json::to_string_pretty(&meta) {
        Ok(text) => {
            if let Err(e) = fs::write(&path, text) {
                eprintln!("warning: cannot write metadata {}: {e}", path.display());
            }
        }
        Err(e) => eprintln!("warning: cannot serialize metadata: {e}"),
    }
}

fn solve_flags_to_config(args: &SolveArgs) -> Result<ConfigFile, Vec<String>> {
    let mut violations = Vec::new();
    if args.mu.is_none() {
        violations.push("--mu <csv> is required (or use --config)".to_owned());
    }
    if args.nu.is_none() {
        violations.push("--nu <csv> is required (or use --config)".to_owned());
    }
    if args.cost.is_none() {
        violations.push("--cost <csv|euclidean> is required (or use --config)".to_owned());
    }
    if args.div.is_none() {
        violations.push(format!(
            "--div <name> is required; known: {}",
            config::KNOWN_DIVERGENCES
        ));
    }
    if !violations.is_empty() {
        return Err(violations);
    }
    let as_spec = |p: &PathBuf| PopulationSpec {
        csv: Some(p.clone()),
        grid: None,
        atoms: None,
        weights: None,
    };
    Ok(ConfigFile {
        command: None,
        divergence: args.div.clone(),
        epsilon: args.epsilon,
        cost: args.cost.clone(),
        seed: None,
        output: None,
        mu: args.mu.as_ref().map(as_spec),
        nu: args.nu.as_ref().map(as_spec),
        rate: None,
        clt: None,
        solve: Some(SolveSection {
            plan: args.plan.clone(),
            potentials: args.potentials.clone(),
            ..SolveSection::default()
        }),
    })
}

fn run_solve(args: &SolveArgs) -> u8 {
    let loaded = if let Some(path) = &args.config {
        let direct_flags = args.mu.is_some()
            || args.nu.is_some()
            || args.cost.is_some()
            || args.div.is_some()
            || args.epsilon.is_some()
            || args.plan.is_some()
            || args.potentials.is_some();
        if direct_flags {
            return report_violations(&["--config replaces the direct flags; pass one or the other"
                .to_owned()]);
        }
        match load_config_file(path, CommandKind::Solve) {
            Ok(l) => l,
            Err(code) => return code,
        }
    } else {
        let cfg = match solve_flags_to_config(args) {
            Ok(c) => c,
            Err(violations) => return report_violations(&violations),
        };
        match config::load(&cfg, CommandKind::Solve) {
            Ok(l) => l,
            Err(violations) => return report_violations(&violations),
        }
    };

    let anchor = loaded.potentials_out.clone().or_else(|| loaded.plan_out.clone());
    let started = Instant::now();
    let sol = match solve_scaled(&loaded.mu, &loaded.nu, &loaded.cost, &loaded.div, &loaded.solve_cfg)
    {
        Ok(sol) => sol,
        Err(e) => {
            let (code, kind) = match &e {
                SolverError::NotConverged { .. } => (3u8, "not_converged"),
                SolverError::InvalidConfig(_) => (2, "validation"),
                _ => (1, "solver"),
            };
            eprintln!("solve failed: {e}");
            if let Some(anchor) = &anchor {
                write_metadata(
                    anchor,
                    loaded.seed,
                    &loaded.echo,
                    started,
                    Some(ErrorRecord {
                        kind,
                        message: e.to_string(),
                    }),
                );
            }
            return code;
        }
    };

    println!(
        "dual value {} ({} sweeps, max residual {:.3e})",
        sol.dual_value,
        sol.iterations,
        sol.max_residual()
    );
    if let Some(path) = &loaded.potentials_out {
        if let Err(e) = io::write_potentials_csv(path, &sol.f, &sol.g) {
            eprintln!("cannot write potentials: {e}");
            return 1;
        }
        println!("wrote potentials to {}", path.display());
    }
    if let Some(path) = &loaded.plan_out {
        let plan = recover_plan(&sol, &loaded.mu, &loaded.nu, &loaded.cost, &loaded.div);
        if let Err(e) = io::write_plan_csv(path, &plan) {
            eprintln!("cannot write plan: {e}");
            return 1;
        }
        println!("wrote plan to {}", path.display());
    }
    if let Some(anchor) = &anchor {
        write_metadata(anchor, loaded.seed, &loaded.echo, started, None);
    }
    0
}

fn stats_error_code(e: &StatsError) -> (u8, &'static str) {
    match e {
        StatsError::Solver(SolverError::NotConverged { .. }) => (3, "not_converged"),
        StatsError::Solver(SolverError::InvalidConfig(_)) => (2, "validation"),
        StatsError::ExperimentAborted { .. } => (4, "aborted"),
        StatsError::InvalidParams(_) => (2, "validation"),
        StatsError::ZeroVariance { .. } => (1, "zero_variance"),
        _ => (1, "error"),
    }
}

fn run_experiment(kind: CommandKind, path: &Path) -> u8 {
    let loaded = match load_config_file(path, kind) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let output = loaded.output.clone().expect("validated");
    let problem = StatsProblem {
        pop_mu: &loaded.mu,
        pop_nu: &loaded.nu,
        cost: &loaded.cost,
        div: &loaded.div,
        epsilon: loaded.epsilon,
    };
    let started = Instant::now();

    // summary text on success, (exit code, error kind, message) otherwise
    let outcome: Result<String, (u8, &'static str, String)> = match kind {
        CommandKind::Rate => {
            let params = loaded.rate_params.as_ref().expect("validated");
            match problem.rate_experiment(params) {
                Ok(report) => io::write_rate_report_csv(&output, &report)
                    .map_err(|e| (1, "io", e.to_string()))
                    .map(|()| match report.fitted_slope {
                        Some(slope) => format!(
                            "fitted slope {slope:.4} (stderr {:.4}), {} replicates excluded",
                            report.slope_stderr.unwrap_or(f64::NAN),
                            report.excluded
                        ),
                        None => "degenerate zero-error report; slope undefined".to_owned(),
                    }),
                Err(e) => {
                    let (code, kind) = stats_error_code(&e);
                    Err((code, kind, e.to_string()))
                }
            }
        }
        CommandKind::Clt => {
            let params = loaded.clt_params.as_ref().expect("validated");
            match problem.clt_experiment(params) {
                Ok(report) => {
                    for w in &report.warnings {
                        eprintln!("warning: {w}");
                    }
                    io::write_clt_report_csv(&output, &report)
                        .map_err(|e| (1, "io", e.to_string()))
                        .map(|()| {
                            format!(
                                "ks distance {:.4} over {} replicates (sigma_sq exact {:.6e})",
                                report.ks_distance,
                                report.standardized.len(),
                                report.sigma_sq_exact
                            )
                        })
                }
                Err(e) => {
                    let (code, kind) = stats_error_code(&e);
                    Err((code, kind, e.to_string()))
                }
            }
        }
        CommandKind::Solve => unreachable!("solve runs through run_solve"),
    };

    match outcome {
        Ok(summary) => {
            println!("{summary}");
            println!("wrote report to {}", output.display());
            write_metadata(&output, loaded.seed, &loaded.echo, started, None);
            0
        }
        Err((code, kind, message)) => {
            eprintln!("experiment failed: {message}");
            write_metadata(
                &output,
                loaded.seed,
                &loaded.echo,
                started,
                Some(ErrorRecord { kind, message }),
            );
            code
        }
    }
}

fn run_check(seed: u64) -> u8 {
    let results = dotlab_core::run_invariant_suite(seed);
    let mut all_passed = true;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", r.name, r.detail);
        all_passed &= r.passed;
    }
    if all_passed {
        println!("all {} checks passed (seed {seed})", results.len());
        0
    } else {
        eprintln!("invariant suite failed");
        1
    }
}
