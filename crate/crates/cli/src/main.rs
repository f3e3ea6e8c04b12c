//! `rgne`: run, sweep and inspect worst-case equilibrium scenarios.
//!
//! Exit codes: 0 success, 2 config error, 3 non-convergence, 4 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rgne_core::game::Ellipsoid;
use rgne_core::harness::{
    builtin_names, cmd_approx, cmd_run, cmd_sweep, resolve_out_dir, ApproxRequest, ConfigError, Overrides,
    ScenarioConfig,
};
use rgne_core::polytope::Spacing;
use rgne_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(name = "rgne", version, about = "Worst-case generalized Nash equilibria under polytope approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the dynamics once and write the trajectory and reports.
    Run(ScenarioArgs),
    /// Run one point per vertex count of the [sweep] table and write sweep.csv.
    Sweep(ScenarioArgs),
    /// Build an inscribed polytope of an ellipsoid and report its metrics.
    Approx(ApproxArgs),
    /// Check a scenario file and print every issue found.
    Validate(ScenarioArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory; overrides RGNE_OUT_DIR and the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Phase of the first polygon vertex, in radians.
    #[arg(long, allow_negative_numbers = true)]
    phase: Option<f64>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct ApproxArgs {
    /// Ellipsoid center, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    center: Vec<f64>,
    /// Ellipsoid semiaxes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    semiaxes: Vec<f64>,
    /// Vertex count of the inscribed regular polygon (planar only).
    #[arg(long)]
    vertices: Option<usize>,
    /// Support-gap refinement steps applied after the initial polytope.
    #[arg(long, default_value_t = 0)]
    refine: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    phase: f64,
    /// Space vertices by equal arc length instead of equal parameter angle.
    #[arg(long)]
    arc_length: bool,
    #[arg(long, default_value_t = 128)]
    reference_vertices: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &ScenarioArgs) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = match (&args.config, &args.scenario) {
        (Some(path), _) => ScenarioConfig::from_path(path)?,
        (None, Some(name)) => ScenarioConfig::builtin(name)?,
        (None, None) => {
            return Err(ConfigError {
                issues: vec![rgne_core::harness::ConfigIssue {
                    field: "config".into(),
                    message: format!("pass --config <file> or --scenario <name> (built in: {})", builtin_names().join(", ")),
                    line: None,
                }],
            })
        }
    };
    Overrides { seed: args.seed, phase: args.phase, step_size: args.step_size, tol: args.tol }.apply(&mut cfg)?;
    Ok(cfg)
}

fn failure(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_NUMERIC),
    }
}

fn config_failure(e: &ConfigError) -> ExitCode {
    eprint!("{e}");
    ExitCode::from(EXIT_CONFIG)
}

fn run(args: ScenarioArgs) -> ExitCode {
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    let out = resolve_out_dir(args.out.as_deref(), Some(&cfg));
    match cmd_run(&cfg, &out) {
        Ok(o) => {
            println!("converged: {}", o.converged());
            println!("steps: {}  t: {}  |y'|: {:.3e}", o.trajectory.steps, o.trajectory.final_time(), o.trajectory.final_deriv_norm());
            println!("kkt max residual: {:.3e}", o.kkt.max());
            println!("empirical eps (ellipsoid): {:.6}", o.epsilon.empirical());
            println!("empirical eps (polytope): {:.3e}", o.epsilon.polytope.empirical());
            println!("true worst-case violation: {:.6}", o.epsilon.true_violation);
            println!("artifacts: {}", out.display());
            if o.converged() {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: dynamics did not reach tol = {:e} by t = {}", cfg.integrator.tol, cfg.integrator.max_time);
                ExitCode::from(EXIT_NOT_CONVERGED)
            }
        }
        Err(e) => failure(&e),
    }
}

fn sweep(args: ScenarioArgs) -> ExitCode {
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    let out = resolve_out_dir(args.out.as_deref(), Some(&cfg));
    match cmd_sweep(&cfg, &out) {
        Ok(rows) => {
            println!("{:>8} {:>12} {:>12} {:>12} {:>12} {:>10}", "vertices", "hausdorff", "delta", "eps", "violation", "status");
            for r in &rows {
                println!(
                    "{:>8} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>10}",
                    r.vertices, r.hausdorff, r.delta_angular, r.eps_ellipsoid, r.violation, r.status
                );
            }
            println!("table: {}", out.join("sweep.csv").display());
            if rows.iter().any(|r| r.status.starts_with("error")) {
                ExitCode::from(EXIT_NUMERIC)
            } else if rows.iter().any(|r| !r.ok()) {
                ExitCode::from(EXIT_NOT_CONVERGED)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => failure(&e),
    }
}

fn approx(args: ApproxArgs) -> ExitCode {
    let ell = match Ellipsoid::new(DVector::from_vec(args.center), DVector::from_vec(args.semiaxes)) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut req = ApproxRequest::new(ell);
    req.vertices = args.vertices;
    req.refine_steps = args.refine;
    req.phase = args.phase;
    req.spacing = if args.arc_length { Spacing::ArcLength } else { Spacing::ParameterAngle };
    req.reference_vertices = args.reference_vertices;
    let out = resolve_out_dir(args.out.as_deref(), None);
    match cmd_approx(&req, &out) {
        Ok(o) => {
            print!("{}", o.metrics_text());
            println!("polytope: {}", out.join("polytope.txt").display());
            ExitCode::SUCCESS
        }
        Err(e @ (Error::InvalidArgument(_) | Error::TooFewVertices { .. } | Error::InvalidSemiaxes)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => failure(&e),
    }
}

fn validate(args: ScenarioArgs) -> ExitCode {
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    if let Err(e) = cfg.build_game() {
        return failure(&e);
    }
    println!("ok: {} ({} players)", cfg.name.as_deref().unwrap_or("scenario"), cfg.game.players);
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Approx(a) => approx(a),
        Command::Validate(a) => validate(a),
    }
}
