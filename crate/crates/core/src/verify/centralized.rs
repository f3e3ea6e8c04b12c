use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::{ExtendedGame, ExtendedState};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CentralizedOptions {
    /// Stop once the natural residual `|w - P(w - F(w))|` is below this.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
}

impl Default for CentralizedOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 50_000, initial_step: 0.5 }
    }
}

#[derive(Clone, Debug)]
pub struct CentralizedSolution {
    pub z: Vec<DVector<f64>>,
    /// The single shared multiplier of the coupled constraint.
    pub mu: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Point `(z, mu)` of the variational inequality on `Omega x R_+` with
/// `F(z, mu) = (g(z) + mu B^T 1, b - sum_i B_i z_i)`.
#[derive(Clone)]
struct Point {
    z: Vec<DVector<f64>>,
    mu: f64,
}

impl Point {
    fn dist2(&self, other: &Point) -> f64 {
        self.z.iter().zip(&other.z).map(|(a, b)| (a - b).norm_squared()).sum::<f64>() + (self.mu - other.mu).powi(2)
    }
}

fn operator(eg: &ExtendedGame, p: &Point) -> Result<Point> {
    let profile: Vec<DVector<f64>> = p.z.iter().map(|zi| zi.rows(0, eg.dim()).into_owned()).collect();
    let z: Result<Vec<_>> = (0..eg.n_players())
        .map(|i| Ok(eg.player_gradient(i, &profile)? + eg.b_row(i) * p.mu))
        .collect();
    let slack = eg.shares().sum() - (0..eg.n_players()).map(|i| eg.load(i, &p.z[i])).sum::<f64>();
    Ok(Point { z: z?, mu: slack })
}

/// `P(p - t F)`.
fn step(eg: &ExtendedGame, p: &Point, f: &Point, t: f64) -> Result<Point> {
    let z: Result<Vec<_>> = (0..eg.n_players())
        .into_par_iter()
        .map(|i| eg.project_omega(i, &(&p.z[i] - &f.z[i] * t)))
        .collect();
    Ok(Point { z: z?, mu: (p.mu - t * f.mu).max(0.0) })
}

/// Reference solution of the extended game with a single multiplier, by
/// extragradient with a backtracked step (Khobotov rule).
///
/// Used to cross-check the distributed dynamics and as the reference point of
/// the Lyapunov function; it is not distributed.
pub fn solve_centralized(eg: &ExtendedGame, opts: &CentralizedOptions) -> Result<CentralizedSolution> {
    if !(opts.tol > 0.0 && opts.initial_step > 0.0 && opts.initial_step.is_finite()) {
        return Err(Error::InvalidArgument("centralized solver needs positive tol and step".into()));
    }
    let init = eg.default_init()?;
    let mut w = Point { z: init.z, mu: 0.0 };
    let mut t = opts.initial_step;
    let mut residual = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let fw = operator(eg, &w)?;
        let natural = step(eg, &w, &fw, 1.0)?;
        residual = w.dist2(&natural).sqrt();
        if residual <= opts.tol {
            return Ok(CentralizedSolution { z: w.z, mu: w.mu, iterations: iter, residual, converged: true });
        }
        let (y, fy) = loop {
            let y = step(eg, &w, &fw, t)?;
            let fy = operator(eg, &y)?;
            if t * fw.dist2(&fy).sqrt() <= 0.9 * w.dist2(&y).sqrt() || t < 1e-12 {
                break (y, fy);
            }
            t *= 0.5;
        };
        if w.dist2(&y) == 0.0 {
            break;
        }
        w = step(eg, &w, &fy, t)?;
        // let the step recover after a sharp region
        t = (t * 1.1).min(opts.initial_step);
    }
    log::warn!("centralized solver stopped at residual {residual:e} after {} iterations", opts.max_iter);
    Ok(CentralizedSolution { z: w.z, mu: w.mu, iterations: opts.max_iter, residual, converged: false })
}

impl CentralizedSolution {
    /// The solution as a state of the distributed dynamics with zero `zeta`.
    pub fn to_state(&self, eg: &ExtendedGame) -> Result<ExtendedState> {
        super::equilibrium_completion(eg, self.z.clone(), self.mu)
    }
}
