use std::fmt;
use std::path::PathBuf;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::IntegratorConfig;
use crate::game::{BoxSet, CommGraph, CostModel, DemandResponse, Ellipsoid, UncertainGame, UncertaintySet};
use crate::polytope::{cross_polytope_seed, inscribe_regular, refine_by_support_gap, Polytope, Spacing};
use crate::transform::BudgetSplit;
use crate::verify::BestResponseOptions;

/// One named validation problem in a scenario config.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigIssue {
    /// Dotted path of the offending field, e.g. `game.budget`.
    pub field: String,
    pub message: String,
    /// 1-based line in the source document, when known.
    pub line: Option<usize>,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// Every problem found while reading or validating a config.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} issue{}):", self.issues.len(), if self.issues.len() == 1 { "" } else { "s" })?;
        for i in &self.issues {
            writeln!(f, "  {i}")?;
        }
        Ok(())
    }
}

impl ConfigError {
    fn single(field: &str, message: impl Into<String>) -> Self {
        Self { issues: vec![ConfigIssue { field: field.into(), message: message.into(), line: None }] }
    }
}

/// A scalar applied to every coordinate, or one value per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coords {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Coords {
    fn expand(&self, dim: usize) -> Option<Vec<f64>> {
        match self {
            Coords::Scalar(v) => Some(vec![*v; dim]),
            Coords::Vector(v) if v.len() == dim => Some(v.clone()),
            Coords::Vector(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Coords,
    pub upper: Coords,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Ring,
    Path,
    Complete,
    Edges,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub kind: GraphKind,
    /// 1-based player pairs, used when `kind = "edges"`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<[usize; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    DemandResponse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub model: CostKind,
    /// Preferred profiles, one per player. Defaults to `w_i = (N/2 - i) 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipsoidSpec {
    pub center: Vec<f64>,
    pub semiaxes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintySpec {
    /// Shared by every player unless `players` is given.
    pub center: Vec<f64>,
    pub semiaxes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub players: Option<Vec<EllipsoidSpec>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub players: usize,
    pub dim: usize,
    pub budget: f64,
    pub boxes: BoxSpec,
    pub graph: GraphSpec,
    pub cost: CostSpec,
    pub uncertainty: UncertaintySpec,
    /// Per-player budget shares; an equal split when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shares: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Inscribed `v`-gons of a planar ellipse.
    #[default]
    Regular,
    /// Support-gap refinement of the inscribed cross-polytope.
    Refine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxSpec {
    pub family: Family,
    pub vertices: usize,
    pub phase: f64,
    pub spacing: Spacing,
    pub refine_steps: usize,
}

impl Default for ApproxSpec {
    fn default() -> Self {
        Self { family: Family::Regular, vertices: 4, phase: 0.0, spacing: Spacing::ParameterAngle, refine_steps: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub vertices: Vec<usize>,
    /// Run sweep points on the rayon pool. Rows stay ordered by position in `vertices`.
    #[serde(default)]
    pub parallel: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub best_response: BestResponseOptions,
    pub lipschitz_samples: usize,
    /// Facet count of the fine regular polygon used as the angular reference.
    pub reference_vertices: usize,
    pub hausdorff_samples: usize,
    /// Per-player constant `c_i` of the perturbation bound.
    pub bound_constant: f64,
    /// Constant of the symbolic epsilon bound; reported, never used numerically.
    pub mu: f64,
    /// Evaluate the Lyapunov function along the trajectory against its endpoint.
    pub lyapunov: bool,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            best_response: BestResponseOptions::default(),
            lipschitz_samples: 1000,
            reference_vertices: 128,
            hausdorff_samples: 4096,
            bound_constant: 1.0,
            mu: 1.0,
            lyapunov: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub game: GameSpec,
    #[serde(default)]
    pub approximation: ApproxSpec,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_seed() -> u64 {
    7
}

const BUILTIN: &[(&str, &str)] = &[("demo-demand-response", include_str!("../../../../configs/demand_response.toml"))];

/// Names of the scenarios compiled into the library.
pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

/// Source text of a built-in scenario.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// Line of `key` inside the table `[section]`, by a plain text scan.
fn locate(source: &str, field: &str) -> Option<usize> {
    let (section, key) = match field.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", field),
    };
    let key = key.split('[').next().unwrap_or(key);
    let mut current = String::new();
    let mut header_line = None;
    for (n, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == field {
                header_line = Some(n + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(n + 1);
                }
            }
        }
    }
    header_line
}

struct Issues<'s> {
    source: Option<&'s str>,
    list: Vec<ConfigIssue>,
}

impl Issues<'_> {
    fn push(&mut self, field: &str, message: impl Into<String>) {
        let line = self.source.and_then(|s| locate(s, field));
        self.list.push(ConfigIssue { field: field.into(), message: message.into(), line });
    }

    fn check(&mut self, ok: bool, field: &str, message: impl Into<String>) {
        if !ok {
            self.push(field, message);
        }
    }
}

impl ScenarioConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(source: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(source).map_err(|e| {
            let line = e.span().map(|s| line_of(source, s.start));
            let message = e.message().to_string();
            // serde reports the failing key in the message when it knows it
            let field = message
                .split('`')
                .nth(1)
                .filter(|_| message.starts_with("unknown field") || message.starts_with("missing field"))
                .unwrap_or("document")
                .to_string();
            ConfigError { issues: vec![ConfigIssue { field, message, line }] }
        })?;
        cfg.validate_with(Some(source))?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::single("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&source)
    }

    pub fn builtin(name: &str) -> Result<Self, ConfigError> {
        let source = builtin_source(name).ok_or_else(|| {
            ConfigError::single("scenario", format!("unknown scenario `{name}` (known: {})", builtin_names().join(", ")))
        })?;
        Self::from_toml(source)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_with(None)
    }

    fn validate_with(&self, source: Option<&str>) -> Result<(), ConfigError> {
        let mut is = Issues { source, list: Vec::new() };
        let g = &self.game;
        let n = g.players;
        let dim = g.dim;
        is.check(n >= 1, "game.players", "need at least one player");
        is.check(dim >= 1, "game.dim", "dimension must be at least 1");
        is.check(g.budget.is_finite(), "game.budget", "budget must be finite");

        let lower = g.boxes.lower.expand(dim);
        let upper = g.boxes.upper.expand(dim);
        is.check(lower.is_some(), "game.boxes.lower", format!("expected a scalar or {dim} values"));
        is.check(upper.is_some(), "game.boxes.upper", format!("expected a scalar or {dim} values"));
        if let (Some(l), Some(u)) = (&lower, &upper) {
            let ok = l.iter().zip(u).all(|(a, b)| a.is_finite() && b.is_finite() && a < b);
            is.check(ok, "game.boxes", "bounds must be finite with lower < upper");
        }

        match g.graph.kind {
            GraphKind::Edges => {
                for (k, e) in g.graph.edges.iter().enumerate() {
                    let field = format!("game.graph.edges[{k}]");
                    if e[0] == 0 || e[1] == 0 || e[0] > n || e[1] > n {
                        is.push(&field, format!("players are numbered 1..={n}"));
                    } else if e[0] == e[1] {
                        is.push(&field, "self loops are not allowed");
                    }
                }
                if n > 1 && g.graph.edges.is_empty() {
                    is.push("game.graph.edges", "edge list is empty");
                }
            }
            _ => is.check(g.graph.edges.is_empty(), "game.graph.edges", "edges are only read when kind = \"edges\""),
        }
        if is.list.iter().all(|i| !i.field.starts_with("game.graph") && i.field != "game.players") {
            if let Err(e) = self.build_graph() {
                is.push("game.graph", e.to_string());
            }
        }

        if let Some(nom) = &g.cost.nominal {
            is.check(nom.len() == n, "game.cost.nominal", format!("expected {n} profiles, got {}", nom.len()));
            let ok = nom.iter().all(|w| w.len() == dim && w.iter().all(|v| v.is_finite()));
            is.check(ok, "game.cost.nominal", format!("every profile needs {dim} finite values"));
        }

        let ellipsoid_ok = |e: &EllipsoidSpec| {
            e.center.len() == dim
                && e.semiaxes.len() == dim
                && e.center.iter().all(|v| v.is_finite())
                && e.semiaxes.iter().all(|v| v.is_finite() && *v > 0.0)
        };
        let shared = EllipsoidSpec { center: g.uncertainty.center.clone(), semiaxes: g.uncertainty.semiaxes.clone() };
        is.check(
            ellipsoid_ok(&shared),
            "game.uncertainty.semiaxes",
            format!("center and semiaxes need {dim} values; semiaxes must be positive"),
        );
        if let Some(list) = &g.uncertainty.players {
            is.check(list.len() == n, "game.uncertainty.players", format!("expected {n} ellipsoids, got {}", list.len()));
            for (k, e) in list.iter().enumerate() {
                is.check(ellipsoid_ok(e), &format!("game.uncertainty.players[{k}]"), "bad center or semiaxes");
            }
        }

        if let Some(s) = &g.shares {
            is.check(s.len() == n, "game.shares", format!("expected {n} shares, got {}", s.len()));
            let sum: f64 = s.iter().sum();
            is.check(
                (sum - g.budget).abs() <= 1e-9 * g.budget.abs().max(1.0),
                "game.shares",
                format!("shares sum to {sum}, not the budget {}", g.budget),
            );
        }

        let a = &self.approximation;
        match a.family {
            Family::Regular => {
                is.check(dim == 2, "approximation.family", "the regular family needs dim = 2; use \"refine\"");
                is.check(a.vertices >= 3, "approximation.vertices", "need at least 3 vertices");
                is.check(a.phase.is_finite(), "approximation.phase", "phase must be finite");
            }
            Family::Refine => {}
        }

        if let Err(e) = self.integrator.validate() {
            is.push("integrator", e.to_string());
        }

        if let Some(sw) = &self.sweep {
            is.check(!sw.vertices.is_empty(), "sweep.vertices", "sweep list is empty");
            is.check(sw.vertices.iter().all(|v| *v >= 3), "sweep.vertices", "every vertex count must be at least 3");
            is.check(self.approximation.family == Family::Regular, "sweep", "sweeps use the regular family");
        }

        let v = &self.verify;
        is.check(v.lipschitz_samples >= 100, "verify.lipschitz_samples", "need at least 100 samples");
        is.check(v.reference_vertices >= 3, "verify.reference_vertices", "need at least 3 vertices");
        is.check(v.hausdorff_samples >= 8, "verify.hausdorff_samples", "need at least 8 samples");
        is.check(v.bound_constant.is_finite() && v.bound_constant > 0.0, "verify.bound_constant", "must be positive");
        is.check(v.mu.is_finite() && v.mu > 0.0, "verify.mu", "must be positive");
        let br = &v.best_response;
        is.check(br.iterations >= 1, "verify.best_response.iterations", "must be at least 1");
        is.check(br.cut_tol.is_finite() && br.cut_tol >= 0.0, "verify.best_response.cut_tol", "must be nonnegative");

        if is.list.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues: is.list })
        }
    }

    fn build_graph(&self) -> crate::Result<CommGraph> {
        let n = self.game.players;
        match self.game.graph.kind {
            GraphKind::Ring => CommGraph::ring(n),
            GraphKind::Path => CommGraph::path(n),
            GraphKind::Complete => CommGraph::complete(n),
            GraphKind::Edges => {
                let edges: Vec<(usize, usize)> = self.game.graph.edges.iter().map(|e| (e[0] - 1, e[1] - 1)).collect();
                CommGraph::from_edges(n, &edges)
            }
        }
    }

    /// Ellipsoid of every player.
    pub fn ellipsoids(&self) -> crate::Result<Vec<Ellipsoid>> {
        let u = &self.game.uncertainty;
        let make = |c: &[f64], s: &[f64]| Ellipsoid::new(DVector::from_row_slice(c), DVector::from_row_slice(s));
        match &u.players {
            Some(list) => list.iter().map(|e| make(&e.center, &e.semiaxes)).collect(),
            None => {
                let e = make(&u.center, &u.semiaxes)?;
                Ok(vec![e; self.game.players])
            }
        }
    }

    pub fn build_game(&self) -> crate::Result<UncertainGame> {
        let g = &self.game;
        let (n, dim) = (g.players, g.dim);
        let bad = |f: &str| crate::Error::Config(ConfigError::single(f, "invalid"));
        let lower = DVector::from_vec(g.boxes.lower.expand(dim).ok_or_else(|| bad("game.boxes.lower"))?);
        let upper = DVector::from_vec(g.boxes.upper.expand(dim).ok_or_else(|| bad("game.boxes.upper"))?);
        let boxes = vec![BoxSet::new(lower, upper)?; n];
        let cost = match g.cost.model {
            CostKind::DemandResponse => CostModel::DemandResponse(match &g.cost.nominal {
                Some(nom) => DemandResponse::new(nom.iter().map(|w| DVector::from_row_slice(w)).collect()),
                None => DemandResponse::staggered(n, dim),
            }),
        };
        let uncertainty: Vec<UncertaintySet> = self.ellipsoids()?.into_iter().map(Into::into).collect();
        UncertainGame::new(boxes, cost, uncertainty, g.budget, self.build_graph()?)
    }

    pub fn budget_split(&self) -> BudgetSplit {
        match &self.game.shares {
            Some(s) => BudgetSplit::Custom(s.clone()),
            None => BudgetSplit::Equal,
        }
    }

    /// Inscribed polytopes per the approximation spec; `vertices` overrides
    /// the vertex count of the regular family.
    pub fn build_polytopes(&self, vertices: Option<usize>) -> crate::Result<Vec<Polytope>> {
        let a = &self.approximation;
        self.ellipsoids()?
            .iter()
            .map(|e| match a.family {
                Family::Regular => inscribe_regular(e, vertices.unwrap_or(a.vertices), a.phase, a.spacing),
                Family::Refine => refine_by_support_gap(e, &cross_polytope_seed(e)?, a.refine_steps),
            })
            .collect()
    }

    /// Fine inscribed polytopes used as the angular reference: the regular
    /// `reference_vertices`-gon in the plane, otherwise the refinement seed
    /// refined by `reference_vertices` steps.
    pub fn reference_polytopes(&self) -> crate::Result<Vec<Polytope>> {
        let a = &self.approximation;
        let v = self.verify.reference_vertices;
        self.ellipsoids()?
            .iter()
            .map(|e| match a.family {
                Family::Regular => inscribe_regular(e, v, a.phase, a.spacing),
                Family::Refine => refine_by_support_gap(e, &cross_polytope_seed(e)?, v.max(a.refine_steps)),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOURCE: &str = include_str!("../../../../configs/demand_response.toml");

    #[test]
    fn builtin_scenario_parses() {
        let cfg = ScenarioConfig::builtin("demo-demand-response").unwrap();
        assert_eq!(cfg.game.players, 10);
        assert_eq!(cfg.game.budget, 10.0);
        assert_eq!(cfg.sweep.as_ref().unwrap().vertices, vec![3, 4, 6, 8, 10, 12]);
        assert!((cfg.approximation.phase - std::f64::consts::FRAC_PI_6).abs() < 1e-15);
        let game = cfg.build_game().unwrap();
        assert!(game.slater().satisfied);
        assert_eq!(cfg.build_polytopes(None).unwrap()[0].facet_count(), 4);
        assert!(ScenarioConfig::builtin("nope").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ScenarioConfig::builtin("demo-demand-response").unwrap();
        let again = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again.to_toml(), cfg.to_toml());
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let src = SOURCE.replace("kind = \"ring\"", "kind = \"edges\"\nedges = [[1, 2], [3, 4]]");
        let err = ScenarioConfig::from_toml(&src).unwrap_err();
        assert_eq!(err.issues.len(), 1);
        assert_eq!(err.issues[0].field, "game.graph");
        assert!(err.issues[0].message.contains("connected"), "{}", err.issues[0].message);
    }

    #[test]
    fn every_semantic_issue_is_reported() {
        let src = SOURCE
            .replace("budget = 10.0", "budget = inf")
            .replace("semiaxes = [3.0, 2.0]", "semiaxes = [3.0, -2.0]")
            .replace("vertices = 4", "vertices = 2")
            .replace("step_size = 0.01", "step_size = 0.0")
            .replace("lipschitz_samples = 1000", "lipschitz_samples = 5");
        let err = ScenarioConfig::from_toml(&src).unwrap_err();
        let fields: Vec<&str> = err.issues.iter().map(|i| i.field.as_str()).collect();
        for f in [
            "game.budget",
            "game.uncertainty.semiaxes",
            "approximation.vertices",
            "integrator",
            "verify.lipschitz_samples",
        ] {
            assert!(fields.contains(&f), "{f} missing from {fields:?}");
        }
        let budget = err.issues.iter().find(|i| i.field == "game.budget").unwrap();
        assert_eq!(budget.line, Some(SOURCE.lines().position(|l| l.starts_with("budget")).unwrap() + 1));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let src = SOURCE.replace("players = 10", "players = \"ten\"");
        let err = ScenarioConfig::from_toml(&src).unwrap_err();
        let want = SOURCE.lines().position(|l| l.starts_with("players")).unwrap() + 1;
        assert_eq!(err.issues[0].line, Some(want));

        let src = SOURCE.replace("seed = 7", "seed = 7\ncolour = 1");
        let err = ScenarioConfig::from_toml(&src).unwrap_err();
        assert_eq!(err.issues[0].field, "colour");

        let err = ScenarioConfig::from_toml("seed = 1").unwrap_err();
        assert_eq!(err.issues[0].field, "game");
        assert!(ScenarioConfig::from_toml("[[[").is_err());
    }

    #[test]
    fn custom_shares_must_sum_to_budget() {
        let src = SOURCE.replace("budget = 10.0", "budget = 10.0\nshares = [1.0, 1.0]");
        let err = ScenarioConfig::from_toml(&src).unwrap_err();
        assert_eq!(err.issues.len(), 2);
        assert!(err.issues.iter().all(|i| i.field == "game.shares"));
    }

    #[test]
    fn refine_family_works_in_three_dimensions() {
        let src = r#"
[game]
players = 2
dim = 3
budget = 5.0
boxes = { lower = -1.0, upper = [1.0, 2.0, 3.0] }
graph = { kind = "path" }
cost = { model = "demand_response" }
uncertainty = { center = [0.0, 0.0, 0.0], semiaxes = [1.0, 2.0, 0.5] }

[approximation]
family = "refine"
refine_steps = 4
"#;
        let cfg = ScenarioConfig::from_toml(src).unwrap();
        let polys = cfg.build_polytopes(None).unwrap();
        assert_eq!(polys[0].vertex_count(), 10);
        cfg.build_game().unwrap();
    }
}
