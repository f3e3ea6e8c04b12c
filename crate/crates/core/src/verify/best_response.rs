use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::game::{worst_case_term, BoxSet, SupportFunction, UncertainGame};
use crate::polytope::Polytope;

/// Which worst case defines a player's feasible deviations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintModel {
    /// Worst case over the inscribed polytopes (the game actually solved).
    PolytopeWorstCase,
    /// Worst case over the original uncertainty sets.
    EllipsoidWorstCase,
}

impl ConstraintModel {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintModel::PolytopeWorstCase => "polytope",
            ConstraintModel::EllipsoidWorstCase => "ellipsoid",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BestResponseStatus {
    Converged,
    /// Cut or iteration budget exhausted; the value is an upper bound on the optimum.
    NotConverged,
    /// No feasible deviation exists.
    Infeasible,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BestResponseOptions {
    /// Random starting points in addition to the current strategy.
    pub restarts: usize,
    /// Projected-gradient iterations per start.
    pub iterations: usize,
    /// Accepted violation of the worst-case constraint.
    pub cut_tol: f64,
    pub max_cuts: usize,
    pub seed: u64,
}

impl Default for BestResponseOptions {
    fn default() -> Self {
        Self { restarts: 5, iterations: 5000, cut_tol: 1e-9, max_cuts: 200, seed: 7 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BestResponse {
    pub player: usize,
    pub status: BestResponseStatus,
    pub point: Option<Vec<f64>>,
    /// `J_i` at the candidate equilibrium.
    pub current: f64,
    /// `J_i` at the best response (`+inf` when infeasible).
    pub best: f64,
    /// Budget left to the player: `b - sum_{j != i} G_j(x_j)`.
    pub residual_budget: f64,
}

impl BestResponse {
    /// `J_i(x*) - J_i(best response)`. Negative when `x*_i` itself violates
    /// the model's constraint and every feasible deviation costs more.
    pub fn signed_gap(&self) -> f64 {
        self.current - self.best
    }

    /// `|signed_gap|`, infinite when no deviation is feasible.
    pub fn eps(&self) -> f64 {
        match self.status {
            BestResponseStatus::Infeasible => f64::INFINITY,
            _ => self.signed_gap().abs(),
        }
    }
}

/// Best responses of all players under one constraint model.
#[derive(Clone, Debug, Serialize)]
pub struct EpsFragment {
    pub model: ConstraintModel,
    pub players: Vec<BestResponse>,
}

impl EpsFragment {
    pub fn per_player(&self) -> Vec<f64> {
        self.players.iter().map(BestResponse::eps).collect()
    }

    /// `max_i eps_i`.
    pub fn empirical(&self) -> f64 {
        self.players.iter().map(BestResponse::eps).fold(0.0, f64::max)
    }

    /// `max_i [J_i(x*) - J_i(best response)]^+`.
    pub fn one_sided(&self) -> f64 {
        self.players
            .iter()
            .filter(|p| p.status != BestResponseStatus::Infeasible)
            .map(|p| p.signed_gap().max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn all_converged(&self) -> bool {
        self.players.iter().all(|p| p.status == BestResponseStatus::Converged)
    }
}

fn support_of(
    game: &UncertainGame,
    polys: &[Polytope],
    model: ConstraintModel,
    j: usize,
    x: &DVector<f64>,
) -> Result<f64> {
    match model {
        ConstraintModel::PolytopeWorstCase => worst_case_term(&polys[j], x),
        ConstraintModel::EllipsoidWorstCase => worst_case_term(&game.uncertainty()[j], x),
    }
}

/// Minimizes `J_i(., x_{-i})` over `{y in Theta_i : G_i(y) <= b - sum_{j != i} G_j(x_j)}`
/// where `G_j` is the worst-case load under `model`.
///
/// The nonlinear constraint is handled by cutting planes `w^T y <= r` with
/// `w` the maximizer defining `G_i(y)` (all polytope vertices at once for the
/// polytope model). Each relaxed problem is solved by projected gradient with
/// backtracking from the current strategy and `restarts` seeded random points.
pub fn best_response(
    game: &UncertainGame,
    polys: &[Polytope],
    x: &[DVector<f64>],
    i: usize,
    model: ConstraintModel,
    opts: &BestResponseOptions,
) -> Result<BestResponse> {
    check_dim(game.n_players(), x.len())?;
    check_dim(game.n_players(), polys.len())?;
    let mut residual_budget = game.budget();
    for (j, xj) in x.iter().enumerate() {
        if j != i {
            residual_budget -= support_of(game, polys, model, j, xj)?;
        }
    }
    let current = game.cost(i, x)?;
    let bx = &game.boxes()[i];
    let set: &dyn SupportFunction = match model {
        ConstraintModel::PolytopeWorstCase => &polys[i],
        ConstraintModel::EllipsoidWorstCase => &game.uncertainty()[i],
    };
    let mut cuts: Vec<DVector<f64>> = match model {
        ConstraintModel::PolytopeWorstCase => polys[i].vertices().to_vec(),
        ConstraintModel::EllipsoidWorstCase => Vec::new(),
    };
    let mut profile = x.to_vec();
    let objective = |y: &DVector<f64>, profile: &mut Vec<DVector<f64>>| -> Result<(f64, DVector<f64>)> {
        profile[i] = y.clone();
        Ok((game.cost(i, profile)?, game.player_gradient(i, profile)?))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut starts = vec![x[i].clone()];
    for _ in 0..opts.restarts {
        starts.push(DVector::from_fn(bx.dim(), |k, _| rng.random_range(bx.lower()[k]..=bx.upper()[k])));
    }

    let mut last: Option<(DVector<f64>, f64)> = None;
    for _ in 0..=opts.max_cuts {
        let region = Region::new(bx, &cuts, residual_budget);
        if region.is_empty() {
            return Ok(BestResponse {
                player: i,
                status: BestResponseStatus::Infeasible,
                point: None,
                current,
                best: f64::INFINITY,
                residual_budget,
            });
        }
        let mut best: Option<(DVector<f64>, f64)> = None;
        for s in &starts {
            let start = region.project(s)?;
            let (y, v) = projected_gradient(&region, start, opts.iterations, |y| objective(y, &mut profile))?;
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((y, v));
            }
        }
        let (y, v) = best.expect("at least one start");
        let load = worst_case_term(set, &y)?;
        // the relaxed problems are convex, so later rounds only warm start
        starts = vec![y.clone(), x[i].clone()];
        if load <= residual_budget + opts.cut_tol {
            return Ok(BestResponse {
                player: i,
                status: BestResponseStatus::Converged,
                point: Some(y.iter().copied().collect()),
                current,
                best: v,
                residual_budget,
            });
        }
        // any point of the set gives a valid cut; at y = 0 the maximizer is undefined
        let w = if y.iter().all(|v| *v == 0.0) {
            set.arg_support(&DVector::from_fn(y.len(), |k, _| if k == 0 { 1.0 } else { 0.0 }))?
        } else {
            set.arg_support(&y)?
        };
        cuts.push(w);
        last = Some((y, v));
    }
    let (y, v) = last.expect("loop ran at least once");
    Ok(BestResponse {
        player: i,
        status: BestResponseStatus::NotConverged,
        point: Some(y.iter().copied().collect()),
        current,
        best: v,
        residual_budget,
    })
}

/// Best responses of every player (evaluated concurrently, reported in player order).
pub fn best_response_eps(
    game: &UncertainGame,
    polys: &[Polytope],
    x: &[DVector<f64>],
    model: ConstraintModel,
    opts: &BestResponseOptions,
) -> Result<EpsFragment> {
    let players: Result<Vec<BestResponse>> =
        (0..game.n_players()).into_par_iter().map(|i| best_response(game, polys, x, i, model, opts)).collect();
    let players = players?;
    for p in &players {
        if p.status == BestResponseStatus::NotConverged {
            log::warn!("best response of player {} did not converge; its gap is a lower bound", p.player + 1);
        }
    }
    Ok(EpsFragment { model, players })
}

/// `box ∩ {w_k^T y <= r}`. In the plane the region is kept as an explicit
/// convex polygon so projections are exact; otherwise Dykstra is used.
struct Region {
    rows: DMatrix<f64>,
    rhs: DVector<f64>,
    polygon: Option<Vec<[f64; 2]>>,
    empty: bool,
}

impl Region {
    fn new(bx: &BoxSet, cuts: &[DVector<f64>], r: f64) -> Self {
        let n = bx.dim();
        let m = cuts.len() + 2 * n;
        let mut rows = DMatrix::zeros(m, n);
        let mut rhs = DVector::zeros(m);
        for (k, w) in cuts.iter().enumerate() {
            rows.row_mut(k).copy_from(&w.transpose());
            rhs[k] = r;
        }
        for k in 0..n {
            rows[(cuts.len() + 2 * k, k)] = 1.0;
            rhs[cuts.len() + 2 * k] = bx.upper()[k];
            rows[(cuts.len() + 2 * k + 1, k)] = -1.0;
            rhs[cuts.len() + 2 * k + 1] = -bx.lower()[k];
        }
        let polygon = (n == 2).then(|| {
            let (l, u) = (bx.lower(), bx.upper());
            let mut poly = vec![[l[0], l[1]], [u[0], l[1]], [u[0], u[1]], [l[0], u[1]]];
            for w in cuts {
                poly = clip(&poly, [w[0], w[1]], r);
                if poly.is_empty() {
                    break;
                }
            }
            poly
        });
        let empty = match &polygon {
            Some(p) => p.is_empty(),
            None => least_distance(&rows, &rhs, &bx.center()).is_none(),
        };
        Self { rows, rhs, polygon, empty }
    }

    fn is_empty(&self) -> bool {
        self.empty
    }

    fn contains(&self, y: &DVector<f64>) -> bool {
        (&self.rows * y - &self.rhs).iter().all(|v| *v <= 0.0)
    }

    fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if self.contains(y) {
            return Ok(y.clone());
        }
        match &self.polygon {
            Some(poly) => Ok(nearest_on_polygon(poly, [y[0], y[1]])),
            None => least_distance(&self.rows, &self.rhs, y)
                .ok_or_else(|| Error::InvalidArgument("best-response region is empty".into())),
        }
    }
}

/// Exact projection of `p` onto `{y : G y <= h}` as a least-distance problem,
/// solved through its nonnegative least-squares dual (Lawson and Hanson).
/// `None` when the set is empty.
fn least_distance(g: &DMatrix<f64>, h: &DVector<f64>, p: &DVector<f64>) -> Option<DVector<f64>> {
    let (m, n) = g.shape();
    // y = p + x with -G x >= G p - h; E = [-G^T; (G p - h)^T], f = e_{n+1}
    let gh = g * p - h;
    let mut e = DMatrix::zeros(n + 1, m);
    for j in 0..m {
        for k in 0..n {
            e[(k, j)] = -g[(j, k)];
        }
        e[(n, j)] = gh[j];
    }
    let mut f = DVector::zeros(n + 1);
    f[n] = 1.0;
    let u = nnls(&e, &f);
    let r = &e * u - f;
    let scale = r[n];
    if r.norm() < 1e-12 || scale.abs() < 1e-14 {
        return None;
    }
    Some(p - r.rows(0, n) / scale)
}

/// Lawson-Hanson active-set solver for `min |E u - f|` subject to `u >= 0`.
fn nnls(e: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let m = e.ncols();
    let tol = 1e-12 * e.norm().max(1.0);
    let mut u = DVector::zeros(m);
    let mut passive = vec![false; m];
    let solve = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..m).filter(|j| passive[*j]).collect();
        let sub = e.select_columns(&idx);
        let sol = sub.svd(true, true).solve(f, 1e-14).unwrap_or_else(|_| DVector::zeros(idx.len()));
        let mut z = DVector::zeros(m);
        for (k, j) in idx.iter().enumerate() {
            z[*j] = sol[k];
        }
        z
    };
    for _ in 0..3 * m + 10 {
        let w = e.transpose() * (f - e * &u);
        let Some(t) = (0..m).filter(|j| !passive[*j] && w[*j] > tol).max_by(|a, b| w[*a].total_cmp(&w[*b])) else {
            break;
        };
        passive[t] = true;
        loop {
            let z = solve(&passive);
            if (0..m).filter(|j| passive[*j]).all(|j| z[j] > 0.0) {
                u = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in (0..m).filter(|j| passive[*j] && z[*j] <= 0.0) {
                alpha = alpha.min(u[j] / (u[j] - z[j]));
            }
            u += (&z - &u) * alpha;
            for j in 0..m {
                if passive[j] && u[j] <= tol {
                    passive[j] = false;
                    u[j] = 0.0;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    u
}

/// Sutherland-Hodgman clip of a convex polygon by `a^T y <= r`.
fn clip(poly: &[[f64; 2]], a: [f64; 2], r: f64) -> Vec<[f64; 2]> {
    let side = |p: &[f64; 2]| a[0] * p[0] + a[1] * p[1] - r;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let (p, q) = (poly[k], poly[(k + 1) % poly.len()]);
        let (sp, sq) = (side(&p), side(&q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn nearest_on_polygon(poly: &[[f64; 2]], y: [f64; 2]) -> DVector<f64> {
    let mut best = (f64::INFINITY, poly[0]);
    for k in 0..poly.len() {
        let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let len2 = e[0] * e[0] + e[1] * e[1];
        let t = if len2 > 0.0 { (((y[0] - a[0]) * e[0] + (y[1] - a[1]) * e[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let p = [a[0] + t * e[0], a[1] + t * e[1]];
        let d = (p[0] - y[0]).powi(2) + (p[1] - y[1]).powi(2);
        if d < best.0 {
            best = (d, p);
        }
    }
    DVector::from_vec(vec![best.1[0], best.1[1]])
}

/// Projected gradient with backtracking on the quadratic upper model.
/// A step that fails the test at round-off level ends the search.
fn projected_gradient<F>(region: &Region, start: DVector<f64>, iterations: usize, mut f: F) -> Result<(DVector<f64>, f64)>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let mut y = start;
    let (mut val, mut grad) = f(&y)?;
    let mut step = 1.0;
    for _ in 0..iterations {
        let mut accepted = None;
        for _ in 0..60 {
            let cand = region.project(&(&y - &grad * step))?;
            let d = &cand - &y;
            let (cv, cg) = f(&cand)?;
            if cv <= val + grad.dot(&d) + d.norm_squared() / (2.0 * step) {
                accepted = Some((cand, cv, cg, d.norm()));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cv, cg, moved)) = accepted else { break };
        y = cand;
        val = cv;
        grad = cg;
        if moved <= 1e-10 * y.norm().max(1.0) {
            break;
        }
        step *= 2.0;
    }
    Ok((y, val))
}
