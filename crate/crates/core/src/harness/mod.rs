//! Scenario files, the built-in benchmark, and the run / sweep / approx
//! pipelines behind the command-line tool. Every artifact is plain text:
//! CSV for tables, `key = value` blocks for reports.

mod approx;
mod config;
mod table;

pub use approx::{cmd_approx, ApproxOutcome, ApproxRequest};
pub use config::{
    builtin_names, builtin_source, ApproxSpec, BoxSpec, ConfigError, ConfigIssue, Coords, CostKind, CostSpec,
    EllipsoidSpec, Family, GameSpec, GraphKind, GraphSpec, OutputSpec, ScenarioConfig, SweepSpec, UncertaintySpec,
    VerifySpec,
};
pub use table::Table;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::dynamics::{run_dynamics, SwarmTrajectory};
use crate::error::{Error, Result};
use crate::game::UncertainGame;
use crate::polytope::{approx_metrics, PlayerBoundInput, Polytope};
use crate::transform::ExtendedGame;
use crate::verify::{bound_report, kkt_residuals, lipschitz_estimate, EpsilonReport, KktReport};

/// Environment variable that overrides the output directory of a config.
pub const OUT_DIR_ENV: &str = "RGNE_OUT_DIR";

pub const INIT_CONVENTION: &str =
    "x_i(0) = box projection of the preferred profile, sigma_i(0) = 0, (x_i, sigma_i) projected onto Omega_i; lambda(0) = 0; zeta(0) = 0";

/// Command-line overrides applied on top of a scenario file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub phase: Option<f64>,
    pub step_size: Option<f64>,
    pub tol: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> std::result::Result<(), ConfigError> {
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.verify.best_response.seed = s;
        }
        if let Some(p) = self.phase {
            cfg.approximation.phase = p;
        }
        if let Some(h) = self.step_size {
            cfg.integrator.step_size = h;
        }
        if let Some(t) = self.tol {
            cfg.integrator.tol = t;
        }
        cfg.validate()
    }
}

/// `flag`, then `$RGNE_OUT_DIR`, then the config's `output.dir`, then `out`.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: Option<&ScenarioConfig>) -> PathBuf {
    if let Some(f) = flag {
        return f.to_path_buf();
    }
    if let Some(env) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    cfg.and_then(|c| c.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

/// Everything a single run produces.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub game: UncertainGame,
    pub polytopes: Vec<Polytope>,
    pub trajectory: SwarmTrajectory,
    pub trajectory_csv: Vec<u8>,
    pub kkt: KktReport,
    pub epsilon: EpsilonReport,
    /// `max_i lambda_i - min_i lambda_i` at the endpoint.
    pub consensus_spread: f64,
    pub wall_time: f64,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.trajectory.converged
    }

    /// The endpoint's strategy profile.
    pub fn profile(&self) -> Vec<DVector<f64>> {
        let n = self.game.dim();
        self.trajectory.final_state().z.iter().map(|z| z.rows(0, n).into_owned()).collect()
    }
}

/// `sqrt(sum_i diam(Theta_i)^2)`, the diameter of the joint strategy box.
/// Used as the common radius `r` of the perturbation bound.
pub fn bound_radius(game: &UncertainGame) -> f64 {
    game.boxes().iter().map(|b| b.diameter().powi(2)).sum::<f64>().sqrt()
}

/// Lipschitz estimates of every player's cost.
pub fn lipschitz_all(game: &UncertainGame, cfg: &ScenarioConfig) -> Result<Vec<f64>> {
    (0..game.n_players())
        .into_par_iter()
        .map(|i| lipschitz_estimate(game, i, cfg.verify.lipschitz_samples, cfg.seed.wrapping_add(i as u64)))
        .collect()
}

fn bound_inputs(cfg: &ScenarioConfig, polys: &[Polytope], references: &[Polytope]) -> Result<Vec<PlayerBoundInput>> {
    let ells = cfg.ellipsoids()?;
    ells.iter()
        .zip(polys)
        .zip(references)
        .map(|((e, p), r)| {
            let m = approx_metrics(e, p, r, cfg.verify.hausdorff_samples.max(8 * p.facet_count()), None)?;
            Ok(PlayerBoundInput {
                facets: r.facet_count(),
                theta: m.max_angle,
                hausdorff: m.hausdorff,
                curvature: m.curvature,
                constant: cfg.verify.bound_constant,
            })
        })
        .collect()
}

/// Builds the polytopes and the extended game, runs the dynamics and
/// evaluates both reports. `vertices` overrides the configured vertex count;
/// `lipschitz` reuses estimates computed earlier.
pub fn run_scenario(cfg: &ScenarioConfig, vertices: Option<usize>, lipschitz: Option<&[f64]>) -> Result<RunOutcome> {
    let start = Instant::now();
    let game = cfg.build_game()?;
    let polytopes = cfg.build_polytopes(vertices)?;
    let eg = ExtendedGame::new(&game, polytopes.clone(), cfg.budget_split())?;
    let init = eg.default_init()?;
    let mut trajectory = run_dynamics(&eg, &init, &cfg.integrator)?;
    let end = trajectory.final_state().clone();
    if cfg.verify.lyapunov {
        trajectory.attach_lyapunov(&eg, &end)?;
    }
    let mut trajectory_csv = Vec::new();
    trajectory.write_csv(&eg, &mut trajectory_csv)?;
    let kkt = kkt_residuals(&eg, &end)?;
    let consensus_spread = end.lambda.max() - end.lambda.min();
    let wall_dynamics = start.elapsed().as_secs_f64();

    let references = cfg.reference_polytopes()?;
    let inputs = bound_inputs(cfg, &polytopes, &references)?;
    let lipschitz = match lipschitz {
        Some(l) => l.to_vec(),
        None => lipschitz_all(&game, cfg)?,
    };
    let bound = bound_report(inputs, bound_radius(&game), cfg.verify.mu, lipschitz)?;
    let profile: Vec<DVector<f64>> = end.z.iter().map(|z| z.rows(0, game.dim()).into_owned()).collect();
    let epsilon = EpsilonReport::assemble(&game, &polytopes, &profile, bound, &cfg.verify.best_response)?;
    drop(eg);
    Ok(RunOutcome {
        game,
        polytopes,
        trajectory,
        trajectory_csv,
        kkt,
        epsilon,
        consensus_spread,
        wall_time: wall_dynamics,
    })
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

/// Runs a scenario and writes `trajectory.csv`, `kkt.txt`, `epsilon.txt`,
/// `lyapunov.csv` (when evaluated), `polytopes.txt`, `metadata.txt` and the
/// effective `config.toml` into `out`.
pub fn cmd_run(cfg: &ScenarioConfig, out: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out)?;
    let outcome = run_scenario(cfg, None, None)?;
    write(out, "trajectory.csv", &outcome.trajectory_csv)?;
    write(out, "kkt.txt", outcome.kkt.to_key_value())?;
    write(out, "epsilon.txt", outcome.epsilon.to_key_value())?;
    if let Some(v) = &outcome.trajectory.lyapunov {
        let mut t = Table::new(vec!["t".into(), "lyapunov".into()]);
        for (time, value) in outcome.trajectory.times.iter().zip(v) {
            t.push(vec![format!("{time:?}"), format!("{value:?}")]);
        }
        t.write_path(&out.join("lyapunov.csv"))?;
    }
    let mut polys = String::new();
    for (i, p) in outcome.polytopes.iter().enumerate() {
        let _ = writeln!(polys, "# player {}", i + 1);
        polys.push_str(&p.to_text());
    }
    write(out, "polytopes.txt", polys)?;
    write(out, "metadata.txt", metadata(cfg, &outcome))?;
    write(out, "config.toml", cfg.to_toml())?;
    Ok(outcome)
}

fn metadata(cfg: &ScenarioConfig, o: &RunOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario = {}", cfg.name.as_deref().unwrap_or("custom"));
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "facets = {}", o.polytopes.iter().map(|p| p.facet_count().to_string()).collect::<Vec<_>>().join(","));
    let _ = writeln!(s, "init = {INIT_CONVENTION}");
    let _ = writeln!(s, "converged = {}", o.converged());
    let _ = writeln!(s, "steps = {}", o.trajectory.steps);
    let _ = writeln!(s, "final_time = {:?}", o.trajectory.final_time());
    let _ = writeln!(s, "final_deriv_norm = {:e}", o.trajectory.final_deriv_norm());
    let _ = writeln!(s, "consensus_spread = {:e}", o.consensus_spread);
    let _ = writeln!(s, "slater_margin = {:e}", o.game.slater().margin);
    let _ = writeln!(s, "wall_time_s = {:.3}", o.wall_time);
    s
}

/// One row of the sweep table.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub vertices: usize,
    /// Facets of the angular reference.
    pub q: usize,
    pub hausdorff: f64,
    pub theta: f64,
    pub delta_angular: f64,
    pub delta_hausdorff: Option<f64>,
    pub eps_ellipsoid: f64,
    pub eps_polytope: f64,
    pub violation: f64,
    pub steps: usize,
    pub wall_time: f64,
    /// `converged`, `not_converged`, or `error: <message>`.
    pub status: String,
}

impl SweepRow {
    pub const HEADER: [&'static str; 12] = [
        "vertices",
        "q",
        "hausdorff",
        "theta",
        "delta_angular",
        "delta_hausdorff",
        "eps_ellipsoid",
        "eps_polytope",
        "true_violation",
        "steps",
        "wall_time_s",
        "status",
    ];

    fn failed(vertices: usize, message: String) -> Self {
        Self {
            vertices,
            q: 0,
            hausdorff: f64::NAN,
            theta: f64::NAN,
            delta_angular: f64::NAN,
            delta_hausdorff: None,
            eps_ellipsoid: f64::NAN,
            eps_polytope: f64::NAN,
            violation: f64::NAN,
            steps: 0,
            wall_time: 0.0,
            status: format!("error: {message}"),
        }
    }

    pub fn ok(&self) -> bool {
        self.status == "converged"
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.vertices.to_string(),
            self.q.to_string(),
            format!("{:?}", self.hausdorff),
            format!("{:?}", self.theta),
            format!("{:?}", self.delta_angular),
            self.delta_hausdorff.map(|d| format!("{d:?}")).unwrap_or_default(),
            format!("{:?}", self.eps_ellipsoid),
            format!("{:?}", self.eps_polytope),
            format!("{:?}", self.violation),
            self.steps.to_string(),
            format!("{:.3}", self.wall_time),
            self.status.clone(),
        ]
    }
}

impl SweepRow {
    /// Summarizes a run; `h` and `theta` are maxima over players.
    pub fn from_outcome(vertices: usize, o: &RunOutcome) -> Self {
        let inputs = &o.epsilon.bound.inputs;
        Self {
            vertices,
            q: inputs.iter().map(|p| p.facets).max().unwrap_or(0),
            hausdorff: inputs.iter().map(|p| p.hausdorff).fold(0.0, f64::max),
            theta: inputs.iter().map(|p| p.theta).fold(0.0, f64::max),
            delta_angular: o.epsilon.bound.delta.angular,
            delta_hausdorff: o.epsilon.bound.delta.hausdorff,
            eps_ellipsoid: o.epsilon.empirical(),
            eps_polytope: o.epsilon.polytope.empirical(),
            violation: o.epsilon.true_violation,
            steps: o.trajectory.steps,
            wall_time: o.wall_time,
            status: if o.converged() { "converged".into() } else { "not_converged".into() },
        }
    }
}

fn sweep_point(cfg: &ScenarioConfig, v: usize, lipschitz: &[f64]) -> SweepRow {
    match run_scenario(cfg, Some(v), Some(lipschitz)) {
        Ok(o) => SweepRow::from_outcome(v, &o),
        Err(e) => {
            log::error!("sweep point v = {v} failed: {e}");
            SweepRow::failed(v, e.to_string().replace(['\n', ','], " "))
        }
    }
}

/// Runs every vertex count of the sweep. A failing point is recorded in its
/// row and the sweep continues. Rows follow the order of the sweep list.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<Vec<SweepRow>> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config(ConfigError { issues: vec![missing_sweep()] }))?;
    let game = cfg.build_game()?;
    let lipschitz = lipschitz_all(&game, cfg)?;
    let rows = if spec.parallel {
        spec.vertices.par_iter().map(|v| sweep_point(cfg, *v, &lipschitz)).collect()
    } else {
        spec.vertices.iter().map(|v| sweep_point(cfg, *v, &lipschitz)).collect()
    };
    Ok(rows)
}

fn missing_sweep() -> ConfigIssue {
    ConfigIssue { field: "sweep".into(), message: "the config has no [sweep] table".into(), line: None }
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(SweepRow::HEADER.iter().map(|s| s.to_string()).collect());
    for r in rows {
        t.push(r.record());
    }
    t
}

/// Runs the sweep and writes `sweep.csv` into `out`.
pub fn cmd_sweep(cfg: &ScenarioConfig, out: &Path) -> Result<Vec<SweepRow>> {
    fs::create_dir_all(out)?;
    let rows = run_sweep(cfg)?;
    sweep_table(&rows).write_path(&out.join("sweep.csv"))?;
    write(out, "config.toml", cfg.to_toml())?;
    Ok(rows)
}
