//! Certificates for computed equilibria: first-order residuals of the
//! extended game, best-response gaps against the original uncertain game,
//! a centralized reference solver, and the approximation-bound report.

mod best_response;
mod centralized;
mod report;

pub use best_response::{
    best_response, best_response_eps, BestResponse, BestResponseOptions, BestResponseStatus, ConstraintModel,
    EpsFragment,
};
pub use centralized::{solve_centralized, CentralizedOptions, CentralizedSolution};
pub use report::{bound_report, lipschitz_estimate, BoundReport, EpsilonReport, ALPHA_COMPOSITION};

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{check_dim, Result};
use crate::transform::{ExtendedGame, ExtendedState};

/// First-order residuals of a candidate equilibrium.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KktReport {
    /// `|z - P_Omega(z - g(z) - B^T lambda)|`.
    pub stationarity: f64,
    /// `[1^T (B z - b)]^+`.
    pub primal_feasibility: f64,
    /// `|(B z - b)^T lambda|`.
    pub complementarity: f64,
    /// `|L lambda|`.
    pub consensus: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal_feasibility).max(self.complementarity).max(self.consensus)
    }

    pub fn to_key_value(&self) -> String {
        format!(
            "stationarity = {:e}\nprimal_feasibility = {:e}\ncomplementarity = {:e}\nconsensus = {:e}\n",
            self.stationarity, self.primal_feasibility, self.complementarity, self.consensus
        )
    }
}

pub fn kkt_residuals(eg: &ExtendedGame, state: &ExtendedState) -> Result<KktReport> {
    eg.check_state(state)?;
    let profile = state.profile(eg);
    let mut stat = 0.0;
    for i in 0..eg.n_players() {
        let g = eg.player_gradient(i, &profile)?;
        let pre = &state.z[i] - g - eg.b_row(i) * state.lambda[i];
        stat += (&state.z[i] - eg.project_omega(i, &pre)?).norm_squared();
    }
    let gap = eg.load_gap(state);
    Ok(KktReport {
        stationarity: stat.sqrt(),
        primal_feasibility: gap.sum().max(0.0),
        complementarity: gap.dot(&state.lambda).abs(),
        consensus: eg.game().graph().laplacian_apply(&state.lambda).norm(),
    })
}

/// Completes `(z, mu 1)` to a full state by choosing `zeta` so that the
/// multiplier dynamics are at rest: `L zeta = (B z - b) - mean(B z - b) 1`.
pub fn equilibrium_completion(eg: &ExtendedGame, z: Vec<DVector<f64>>, mu: f64) -> Result<ExtendedState> {
    let n_players = eg.n_players();
    check_dim(n_players, z.len())?;
    let mut state = ExtendedState { z, lambda: DVector::from_element(n_players, mu), zeta: DVector::zeros(n_players) };
    eg.check_state(&state)?;
    let gap = eg.load_gap(&state);
    let centered = gap.add_scalar(-gap.mean());
    state.zeta = eg.game().graph().laplacian_solve(&centered);
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run_dynamics, swarm_derivative, IntegratorConfig};
    use crate::testing::{benchmark_game, benchmark_polys};
    use crate::transform::BudgetSplit;

    #[test]
    fn converged_run_passes_kkt() {
        let g = benchmark_game(10.0);
        let eg = ExtendedGame::new(&g, benchmark_polys(4), BudgetSplit::Equal).unwrap();
        let traj = run_dynamics(&eg, &eg.default_init().unwrap(), &IntegratorConfig::default()).unwrap();
        assert!(traj.converged);
        let k = kkt_residuals(&eg, traj.final_state()).unwrap();
        assert!(k.max() < 1e-3, "{k:?}");
    }

    #[test]
    fn consensus_residual_is_laplacian_product() {
        let g = benchmark_game(10.0);
        let eg = ExtendedGame::new(&g, benchmark_polys(4), BudgetSplit::Equal).unwrap();
        let mut s = eg.default_init().unwrap();
        s.lambda = DVector::from_fn(10, |i, _| (i % 3) as f64);
        let k = kkt_residuals(&eg, &s).unwrap();
        let direct = (g.graph().laplacian() * &s.lambda).norm();
        assert!((k.consensus - direct).abs() < 1e-14);
        assert!(k.consensus > 0.0);
        s.lambda.fill(0.0);
        assert_eq!(kkt_residuals(&eg, &s).unwrap().complementarity, 0.0);
    }

    #[test]
    fn completion_of_a_centralized_solution_is_a_rest_point() {
        let g = benchmark_game(10.0);
        let eg = ExtendedGame::new(&g, benchmark_polys(4), BudgetSplit::Equal).unwrap();
        let sol = solve_centralized(&eg, &CentralizedOptions { tol: 1e-11, ..Default::default() }).unwrap();
        assert!(sol.converged);
        let s = equilibrium_completion(&eg, sol.z.clone(), sol.mu).unwrap();
        let k = kkt_residuals(&eg, &s).unwrap();
        assert!(k.max() < 1e-8, "{k:?}");
        let d = swarm_derivative(&eg, &s, false).unwrap();
        assert!(d.flatten().norm() < 1e-6);
    }
}
