//! Distributed projected dynamics on the extended game, simulated in
//! synchronous rounds:
//!
//! ```text
//! z_i'      = P_Omega_i(z_i - g_i(z) - B_i^T lambda_i) - z_i
//! lambda_i' = [lambda_i + B_i z_i - b_i - (L lambda)_i - (L zeta)_i]^+ - lambda_i
//! zeta_i'   = (L lambda)_i
//! ```

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::{ExtendedGame, ExtendedState};

/// Local state of one agent.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub z: DVector<f64>,
    pub lambda: f64,
    pub zeta: f64,
}

/// What agent `i` receives from neighbor `j`: `(lambda_j, zeta_j)` and the edge weight `a_ij`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborSignal {
    pub lambda: f64,
    pub zeta: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentDerivative {
    pub z: DVector<f64>,
    pub lambda: f64,
    pub zeta: f64,
}

/// Right-hand side for agent `i`. `observed_x` is the strategy profile the
/// agent sees; only the blocks entering its own cost gradient are read, and
/// its own block is taken from `local`.
pub fn agent_step(
    eg: &ExtendedGame,
    i: usize,
    local: &AgentState,
    observed_x: &[DVector<f64>],
    neighbors: &[NeighborSignal],
) -> Result<AgentDerivative> {
    let n = eg.dim();
    let mut profile = observed_x.to_vec();
    profile[i] = local.z.rows(0, n).into_owned();
    let g = eg.player_gradient(i, &profile)?;
    let pre = &local.z - g - eg.b_row(i) * local.lambda;
    let dz = eg.project_omega(i, &pre)? - &local.z;
    let (mut l_lambda, mut l_zeta) = (0.0, 0.0);
    for nb in neighbors {
        l_lambda += nb.weight * (local.lambda - nb.lambda);
        l_zeta += nb.weight * (local.zeta - nb.zeta);
    }
    let inner = local.lambda + eg.load(i, &local.z) - eg.shares()[i] - l_lambda - l_zeta;
    Ok(AgentDerivative { z: dz, lambda: inner.max(0.0) - local.lambda, zeta: l_lambda })
}

/// One synchronous round: every agent evaluates [`agent_step`] on the same
/// snapshot. The result does not depend on `parallel`.
pub fn swarm_derivative(eg: &ExtendedGame, state: &ExtendedState, parallel: bool) -> Result<ExtendedState> {
    eg.check_state(state)?;
    let profile = state.profile(eg);
    let graph = eg.game().graph();
    let one = |i: usize| -> Result<AgentDerivative> {
        let local = AgentState { z: state.z[i].clone(), lambda: state.lambda[i], zeta: state.zeta[i] };
        let neighbors: Vec<NeighborSignal> = graph
            .neighbors(i)
            .iter()
            .map(|&(j, w)| NeighborSignal { lambda: state.lambda[j], zeta: state.zeta[j], weight: w })
            .collect();
        agent_step(eg, i, &local, &profile, &neighbors)
    };
    let parts: Result<Vec<AgentDerivative>> = if parallel {
        (0..eg.n_players()).into_par_iter().map(one).collect()
    } else {
        (0..eg.n_players()).map(one).collect()
    };
    let parts = parts?;
    Ok(ExtendedState {
        lambda: DVector::from_iterator(parts.len(), parts.iter().map(|p| p.lambda)),
        zeta: DVector::from_iterator(parts.len(), parts.iter().map(|p| p.zeta)),
        z: parts.into_iter().map(|p| p.z).collect(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Euler,
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub step_size: f64,
    pub max_time: f64,
    /// Stop once `|y'| <= tol`.
    pub tol: f64,
    pub scheme: Scheme,
    /// Record every `record_stride`-th step (the first and last are always kept).
    pub record_stride: usize,
    pub divergence_limit: f64,
    /// Evaluate agents of a round on the rayon pool.
    pub parallel: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            max_time: 2000.0,
            tol: 1e-4,
            scheme: Scheme::Euler,
            record_stride: 10,
            divergence_limit: 1e8,
            parallel: false,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.step_size) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {}", self.step_size)));
        }
        if !positive(self.max_time) {
            return Err(Error::InvalidArgument(format!("max time must be positive, got {}", self.max_time)));
        }
        if !positive(self.tol) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidArgument("record stride must be at least 1".into()));
        }
        if !positive(self.divergence_limit) {
            return Err(Error::InvalidArgument("divergence limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SwarmTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ExtendedState>,
    pub deriv_norms: Vec<f64>,
    /// `V(t)` against a reference, filled in by [`SwarmTrajectory::attach_lyapunov`].
    pub lyapunov: Option<Vec<f64>>,
    pub steps: usize,
    pub converged: bool,
}

impl SwarmTrajectory {
    pub fn final_state(&self) -> &ExtendedState {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory always holds the initial time")
    }

    pub fn final_deriv_norm(&self) -> f64 {
        *self.deriv_norms.last().expect("trajectory always holds one derivative")
    }

    /// Evaluates `V` at every recorded state against `reference`.
    pub fn attach_lyapunov(&mut self, eg: &ExtendedGame, reference: &ExtendedState) -> Result<()> {
        let v: Result<Vec<f64>> = self.states.iter().map(|s| lyapunov_value(eg, s, reference)).collect();
        self.lyapunov = Some(v?);
        Ok(())
    }

    /// `t,deriv_norm,x_<i>_<k>...,sigma_<i>_<l>...,lambda_<i>...,zeta_<i>...`
    /// with 1-based player and component indices.
    pub fn csv_header(eg: &ExtendedGame) -> Vec<String> {
        let mut h = vec!["t".to_string(), "deriv_norm".to_string()];
        for i in 0..eg.n_players() {
            h.extend((0..eg.dim()).map(|k| format!("x_{}_{}", i + 1, k + 1)));
        }
        for i in 0..eg.n_players() {
            h.extend((0..eg.facets(i)).map(|l| format!("sigma_{}_{}", i + 1, l + 1)));
        }
        h.extend((0..eg.n_players()).map(|i| format!("lambda_{}", i + 1)));
        h.extend((0..eg.n_players()).map(|i| format!("zeta_{}", i + 1)));
        h
    }

    pub fn write_csv<W: Write>(&self, eg: &ExtendedGame, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::csv_header(eg))?;
        let n = eg.dim();
        for ((t, d), s) in self.times.iter().zip(&self.deriv_norms).zip(&self.states) {
            let mut row = vec![*t, *d];
            for z in &s.z {
                row.extend(z.rows(0, n).iter());
            }
            for z in &s.z {
                row.extend(z.rows(n, z.len() - n).iter());
            }
            row.extend(s.lambda.iter());
            row.extend(s.zeta.iter());
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn axpy(y: &ExtendedState, h: f64, d: &ExtendedState) -> ExtendedState {
    ExtendedState {
        z: y.z.iter().zip(&d.z).map(|(a, b)| a + b * h).collect(),
        lambda: &y.lambda + &d.lambda * h,
        zeta: &y.zeta + &d.zeta * h,
    }
}

fn norm(s: &ExtendedState) -> f64 {
    (s.z.iter().map(|z| z.norm_squared()).sum::<f64>() + s.lambda.norm_squared() + s.zeta.norm_squared()).sqrt()
}

/// Integrates the dynamics from `init` until `|y'| <= tol` or `max_time`.
/// After every step each `z_i` is projected back onto `Omega_i` and `lambda`
/// is clamped at zero. Exceeding `max_time` is reported through
/// `converged = false`, not as an error.
pub fn run_dynamics(eg: &ExtendedGame, init: &ExtendedState, cfg: &IntegratorConfig) -> Result<SwarmTrajectory> {
    cfg.validate()?;
    eg.check_state(init)?;
    let h = cfg.step_size;
    let max_steps = (cfg.max_time / h).ceil() as usize;
    let mut y = init.clone();
    let mut traj = SwarmTrajectory {
        times: Vec::new(),
        states: Vec::new(),
        deriv_norms: Vec::new(),
        lyapunov: None,
        steps: 0,
        converged: false,
    };
    let mut step = 0usize;
    loop {
        let k1 = swarm_derivative(eg, &y, cfg.parallel)?;
        let dn = norm(&k1);
        let t = step as f64 * h;
        let done = dn <= cfg.tol || step >= max_steps;
        if step.is_multiple_of(cfg.record_stride) || done {
            traj.times.push(t);
            traj.states.push(y.clone());
            traj.deriv_norms.push(dn);
        }
        if !dn.is_finite() {
            return Err(Error::Diverged { time: t, norm: dn, state: Box::new(y) });
        }
        if done {
            traj.converged = dn <= cfg.tol;
            traj.steps = step;
            if !traj.converged {
                log::warn!("dynamics stopped at t = {t} with |y'| = {dn:.3e} > {:.1e}", cfg.tol);
            }
            return Ok(traj);
        }
        let next = match cfg.scheme {
            Scheme::Euler => axpy(&y, h, &k1),
            Scheme::Rk4 => {
                let k2 = swarm_derivative(eg, &axpy(&y, h / 2.0, &k1), cfg.parallel)?;
                let k3 = swarm_derivative(eg, &axpy(&y, h / 2.0, &k2), cfg.parallel)?;
                let k4 = swarm_derivative(eg, &axpy(&y, h, &k3), cfg.parallel)?;
                let mut s = axpy(&y, h / 6.0, &k1);
                s = axpy(&s, h / 3.0, &k2);
                s = axpy(&s, h / 3.0, &k3);
                axpy(&s, h / 6.0, &k4)
            }
        };
        y = restore_feasibility(eg, next)?;
        step += 1;
        let yn = norm(&y);
        if yn.is_nan() || yn > cfg.divergence_limit {
            return Err(Error::Diverged { time: step as f64 * h, norm: yn, state: Box::new(y) });
        }
    }
}

fn restore_feasibility(eg: &ExtendedGame, mut y: ExtendedState) -> Result<ExtendedState> {
    for i in 0..y.z.len() {
        y.z[i] = eg.project_omega(i, &y.z[i])?;
    }
    y.lambda.apply(|l| *l = l.max(0.0));
    Ok(y)
}

/// `F(s) = (g(z) + B^T lambda, -B z + b + L lambda + L zeta, -L lambda)`.
fn lyapunov_operator(eg: &ExtendedGame, s: &ExtendedState) -> Result<ExtendedState> {
    let g = eg.extended_gradient(s)?;
    let blocks = crate::game::split(&g, &eg.block_lengths())?;
    let graph = eg.game().graph();
    let l_lambda = graph.laplacian_apply(&s.lambda);
    let l_zeta = graph.laplacian_apply(&s.zeta);
    let gap = eg.load_gap(s);
    Ok(ExtendedState {
        z: blocks.into_iter().enumerate().map(|(i, gi)| gi + eg.b_row(i) * s.lambda[i]).collect(),
        lambda: -gap + &l_lambda + l_zeta,
        zeta: -l_lambda,
    })
}

/// `V(s) = -<F(s), U(s) - s> - |U(s) - s|^2 / 2 + |s - s*|^2 / 2` with
/// `U(s)` the projection of `s - F(s)` onto `Omega x R_+^N x R^N`.
pub fn lyapunov_value(eg: &ExtendedGame, state: &ExtendedState, reference: &ExtendedState) -> Result<f64> {
    eg.check_state(state)?;
    eg.check_state(reference)?;
    let f = lyapunov_operator(eg, state)?;
    let pre = axpy(state, -1.0, &f);
    let mut u = ExtendedState {
        z: Vec::with_capacity(pre.z.len()),
        lambda: pre.lambda.map(|l| l.max(0.0)),
        zeta: pre.zeta.clone(),
    };
    for (i, zi) in pre.z.iter().enumerate() {
        u.z.push(eg.project_omega(i, zi)?);
    }
    let diff = u.flatten() - state.flatten();
    let fv = f.flatten();
    let dist = state.flatten() - reference.flatten();
    Ok(-fv.dot(&diff) - 0.5 * diff.norm_squared() + 0.5 * dist.norm_squared())
}
