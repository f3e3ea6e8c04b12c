use std::fmt::Write as _;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{best_response_eps, BestResponseOptions, ConstraintModel, EpsFragment};
use crate::error::{Error, Result};
use crate::game::{central_difference, UncertainGame};
use crate::polytope::{delta_bound, DeltaBound, PlayerBoundInput, Polytope};

/// The bound on epsilon as a composition of class-K functions. These exist
/// by converse Lyapunov arguments but have no closed form, so the bound is
/// carried symbolically and never evaluated.
pub const ALPHA_COMPOSITION: &str = "eps <= 2 * lipschitz_i * alpha1^-1(alpha2(alpha3^-1(delta * alpha4(r) / mu)))";

/// Lower estimate of the Lipschitz constant of `J_i` over the box product.
///
/// Sample pairs are drawn from one seeded stream, so a larger `samples`
/// evaluates a superset of pairs and the estimate never decreases. Even pairs
/// are independent uniform points; odd pairs are a uniform point and a short
/// step along the full gradient of `J_i`, which captures the local slope.
pub fn lipschitz_estimate(game: &UncertainGame, i: usize, samples: usize, seed: u64) -> Result<f64> {
    if samples < 100 {
        return Err(Error::InvalidArgument(format!("lipschitz estimate needs at least 100 samples, got {samples}")));
    }
    if i >= game.n_players() {
        return Err(Error::InvalidArgument(format!("player {i} does not exist")));
    }
    let boxes = game.boxes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<DVector<f64>> {
        boxes
            .iter()
            .map(|b| DVector::from_fn(b.dim(), |k, _| rng.random_range(b.lower()[k]..=b.upper()[k])))
            .collect()
    };
    let cost = |p: &[DVector<f64>]| game.cost(i, p).unwrap_or(f64::NAN);
    let step = 1e-3 * boxes.iter().map(|b| b.diameter()).fold(0.0, f64::max).max(1e-12);
    let mut best: f64 = 0.0;
    for k in 0..samples {
        let x = draw(&mut rng);
        let y = if k % 2 == 0 {
            draw(&mut rng)
        } else {
            let grad: Vec<DVector<f64>> = (0..x.len()).map(|j| central_difference(cost, j, &x)).collect();
            let norm = grad.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            x.iter().zip(&grad).map(|(xj, gj)| xj + gj * (step / norm)).collect()
        };
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
        if dist > 0.0 {
            let q = (game.cost(i, &x)? - game.cost(i, &y)?).abs() / dist;
            if q.is_finite() {
                best = best.max(q);
            }
        }
    }
    Ok(best)
}

/// Inputs of the perturbation bound together with the resulting `delta`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub inputs: Vec<PlayerBoundInput>,
    pub r: f64,
    /// Carried for completeness; it only enters the symbolic bound.
    pub mu: f64,
    pub lipschitz: Vec<f64>,
    pub delta: DeltaBound,
    pub composition: &'static str,
}

pub fn bound_report(inputs: Vec<PlayerBoundInput>, r: f64, mu: f64, lipschitz: Vec<f64>) -> Result<BoundReport> {
    if lipschitz.len() != inputs.len() {
        return Err(Error::DimensionMismatch { expected: inputs.len(), found: lipschitz.len() });
    }
    let delta = delta_bound(&inputs, r)?;
    if !delta.vacuous_players.is_empty() {
        log::warn!("hausdorff form of delta is vacuous for players {:?} (h * nu >= 2)", delta.vacuous_players);
    }
    Ok(BoundReport { inputs, r, mu, lipschitz, delta, composition: ALPHA_COMPOSITION })
}

/// Empirical epsilon of a candidate equilibrium under both constraint models,
/// the true worst-case violation against the original sets, and the bound inputs.
#[derive(Clone, Debug, Serialize)]
pub struct EpsilonReport {
    pub ellipsoid: EpsFragment,
    pub polytope: EpsFragment,
    pub bound: BoundReport,
    /// `[sum_i max_{w in M_i} w^T x_i - b]^+`.
    pub true_violation: f64,
}

impl EpsilonReport {
    pub fn assemble(
        game: &UncertainGame,
        polys: &[Polytope],
        x: &[DVector<f64>],
        bound: BoundReport,
        opts: &BestResponseOptions,
    ) -> Result<Self> {
        let ellipsoid = best_response_eps(game, polys, x, ConstraintModel::EllipsoidWorstCase, opts)?;
        let polytope = best_response_eps(game, polys, x, ConstraintModel::PolytopeWorstCase, opts)?;
        let true_violation = (game.worst_case_lhs(x)? - game.budget()).max(0.0);
        Ok(Self { ellipsoid, polytope, bound, true_violation })
    }

    /// Headline epsilon: measured against the original uncertainty sets.
    pub fn empirical(&self) -> f64 {
        self.ellipsoid.empirical()
    }

    pub fn per_player(&self) -> Vec<f64> {
        self.ellipsoid.per_player()
    }

    pub fn to_key_value(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "empirical_eps = {:e}", self.empirical());
        let _ = writeln!(s, "per_player_eps = {}", list(&self.per_player()));
        let _ = writeln!(s, "one_sided_eps = {:e}", self.ellipsoid.one_sided());
        let _ = writeln!(s, "polytope_eps = {:e}", self.polytope.empirical());
        let _ = writeln!(s, "polytope_per_player_eps = {}", list(&self.polytope.per_player()));
        let _ = writeln!(s, "best_response_converged = {}", self.ellipsoid.all_converged() && self.polytope.all_converged());
        let _ = writeln!(s, "delta_angular = {:e}", self.bound.delta.angular);
        match self.bound.delta.hausdorff {
            Some(d) => {
                let _ = writeln!(s, "delta_hausdorff = {d:e}");
            }
            None => {
                let _ = writeln!(s, "delta_hausdorff = vacuous");
            }
        }
        let _ = writeln!(s, "true_worst_case_violation = {:e}", self.true_violation);
        let _ = writeln!(s, "lipschitz = {}", list(&self.bound.lipschitz));
        let _ = writeln!(s, "r = {:e}", self.bound.r);
        let _ = writeln!(s, "mu = {:e}", self.bound.mu);
        let _ = writeln!(s, "facets = {}", self.bound.inputs.iter().map(|p| p.facets.to_string()).collect::<Vec<_>>().join(","));
        let _ = writeln!(s, "theta = {}", list(&self.bound.inputs.iter().map(|p| p.theta).collect::<Vec<_>>()));
        let _ = writeln!(s, "hausdorff = {}", list(&self.bound.inputs.iter().map(|p| p.hausdorff).collect::<Vec<_>>()));
        let _ = writeln!(s, "bound = {}", self.bound.composition);
        s
    }

    pub fn csv_header() -> &'static [&'static str] {
        &[
            "eps_ellipsoid",
            "eps_polytope",
            "eps_one_sided",
            "delta_angular",
            "delta_hausdorff",
            "true_violation",
            "lipschitz_max",
        ]
    }

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            format!("{:e}", self.empirical()),
            format!("{:e}", self.polytope.empirical()),
            format!("{:e}", self.ellipsoid.one_sided()),
            format!("{:e}", self.bound.delta.angular),
            self.bound.delta.hausdorff.map(|d| format!("{d:e}")).unwrap_or_default(),
            format!("{:e}", self.true_violation),
            format!("{:e}", self.bound.lipschitz.iter().cloned().fold(0.0, f64::max)),
        ]
    }
}
