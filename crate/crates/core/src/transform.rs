//! The certain extended game obtained by dualizing each player's worst case
//! over its inscribed polytope: `z_i = (x_i, sigma_i)`, coupling row
//! `B_i = [0, d_i^T]`, and local set
//! `Omega_i = {(x, sigma) : x in Theta_i, sigma >= 0, A_i^T sigma = x}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::game::{stack, BoxSet, CostModel, UncertainGame};
use crate::polytope::text::write_matrix;
use crate::polytope::Polytope;

/// How the budget `b` is divided into local shares `b_i`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetSplit {
    /// `b_i = b / N`.
    #[default]
    Equal,
    /// Explicit shares; must sum to `b`.
    Custom(Vec<f64>),
}

/// Stopping rule of the Dykstra projection onto `Omega_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionSettings {
    pub max_iter: usize,
    /// Stop once successive iterates move less than this and the residual is met.
    pub step_tol: f64,
    /// Required `|A^T sigma - x|` on return.
    pub residual_tol: f64,
}

impl Default for ProjectionSettings {
    fn default() -> Self {
        Self { max_iter: 500, step_tol: 1e-11, residual_tol: 1e-9 }
    }
}

/// Projection onto `{C z = 0}` with `C = [-I, A^T]`, using the inverse of
/// `C C^T = I + A^T A` (an `n x n` SPD matrix).
#[derive(Clone, Debug)]
struct AffineProjector {
    n: usize,
    q: usize,
    /// `A`, row-major.
    a: Vec<f64>,
    /// `(I + A^T A)^{-1}`, row-major.
    gram_inv: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl AffineProjector {
    fn new(poly: &Polytope, bx: &BoxSet) -> Result<Self> {
        let n = poly.dim();
        let q = poly.facet_count();
        let a_mat = poly.normals();
        let gram = DMatrix::identity(n, n) + a_mat.transpose() * a_mat;
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::DegeneratePolytope("I + A^T A is not positive definite".into()))?;
        let inv = chol.inverse();
        Ok(Self {
            n,
            q,
            a: (0..q).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| a_mat[(r, c)]).collect(),
            gram_inv: (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| inv[(r, c)]).collect(),
            lower: bx.lower().iter().copied().collect(),
            upper: bx.upper().iter().copied().collect(),
        })
    }

    /// `C z = A^T sigma - x`, written into `out` (length n).
    fn constraint(&self, z: &[f64], out: &mut [f64]) {
        let (n, q) = (self.n, self.q);
        for k in 0..n {
            out[k] = -z[k];
        }
        for l in 0..q {
            let s = z[n + l];
            for k in 0..n {
                out[k] += self.a[l * n + k] * s;
            }
        }
    }

    fn residual(&self, z: &[f64]) -> f64 {
        let mut c = vec![0.0; self.n];
        self.constraint(z, &mut c);
        c.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// In-place projection onto the affine set.
    fn project_affine(&self, z: &mut [f64], cz: &mut [f64], w: &mut [f64]) {
        let (n, q) = (self.n, self.q);
        self.constraint(z, cz);
        for r in 0..n {
            w[r] = (0..n).map(|c| self.gram_inv[r * n + c] * cz[c]).sum();
        }
        // z -= C^T w, C^T w = (-w, A w)
        for k in 0..n {
            z[k] += w[k];
        }
        for l in 0..q {
            let aw: f64 = (0..n).map(|k| self.a[l * n + k] * w[k]).sum();
            z[n + l] -= aw;
        }
    }

    fn cone_violation(&self, z: &[f64]) -> f64 {
        let mut v = 0.0f64;
        for k in 0..self.n {
            v = v.max(self.lower[k] - z[k]).max(z[k] - self.upper[k]);
        }
        for s in &z[self.n..] {
            v = v.max(-s);
        }
        v
    }

    fn project(&self, input: &[f64], settings: &ProjectionSettings) -> Result<Vec<f64>> {
        let len = self.n + self.q;
        if self.cone_violation(input) <= 0.0 && self.residual(input) <= settings.residual_tol {
            return Ok(input.to_vec());
        }
        let mut x = input.to_vec();
        let mut p = vec![0.0; len];
        let mut corr = vec![0.0; len];
        let mut y = vec![0.0; len];
        let mut cz = vec![0.0; self.n];
        let mut w = vec![0.0; self.n];
        for _ in 0..settings.max_iter {
            // affine step
            for k in 0..len {
                y[k] = x[k] + p[k];
            }
            self.project_affine(&mut y, &mut cz, &mut w);
            for k in 0..len {
                p[k] = x[k] + p[k] - y[k];
            }
            // box x orthant step
            let mut moved = 0.0;
            for k in 0..len {
                let before = y[k] + corr[k];
                let after = if k < self.n {
                    before.clamp(self.lower[k], self.upper[k])
                } else {
                    before.max(0.0)
                };
                corr[k] = before - after;
                moved += (after - x[k]) * (after - x[k]);
                x[k] = after;
            }
            // the iterate can stall while the corrections still change
            if moved.sqrt() < settings.step_tol && self.residual(&x) <= settings.residual_tol {
                break;
            }
        }
        let residual = self.residual(&x);
        if residual <= settings.residual_tol {
            Ok(x)
        } else {
            Err(Error::ProjectionNotConverged { iterations: settings.max_iter, residual })
        }
    }
}

/// Full state `(z, lambda, zeta)` of the extended game.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedState {
    pub z: Vec<DVector<f64>>,
    pub lambda: DVector<f64>,
    pub zeta: DVector<f64>,
}

impl ExtendedState {
    pub fn x_block(&self, eg: &ExtendedGame, i: usize) -> DVector<f64> {
        self.z[i].rows(0, eg.dim()).into_owned()
    }

    pub fn sigma_block(&self, eg: &ExtendedGame, i: usize) -> DVector<f64> {
        self.z[i].rows(eg.dim(), eg.facets(i)).into_owned()
    }

    /// The strategy profile `(x_1, ..., x_N)`.
    pub fn profile(&self, eg: &ExtendedGame) -> Vec<DVector<f64>> {
        (0..self.z.len()).map(|i| self.x_block(eg, i)).collect()
    }

    /// `(z_1, ..., z_N, lambda, zeta)`.
    pub fn flatten(&self) -> DVector<f64> {
        let mut parts = self.z.clone();
        parts.push(self.lambda.clone());
        parts.push(self.zeta.clone());
        stack(&parts)
    }

    pub fn unflatten(eg: &ExtendedGame, v: &DVector<f64>) -> Result<Self> {
        let n_players = eg.n_players();
        check_dim(eg.state_len(), v.len())?;
        let mut at = 0;
        let mut z = Vec::with_capacity(n_players);
        for i in 0..n_players {
            let len = eg.block_len(i);
            z.push(v.rows(at, len).into_owned());
            at += len;
        }
        let lambda = v.rows(at, n_players).into_owned();
        let zeta = v.rows(at + n_players, n_players).into_owned();
        Ok(Self { z, lambda, zeta })
    }

    pub fn norm(&self) -> f64 {
        self.flatten().norm()
    }
}

/// The extended certain game built from an uncertain game and one inscribed
/// polytope per player.
#[derive(Clone, Debug)]
pub struct ExtendedGame<'a> {
    game: &'a UncertainGame,
    polys: Vec<Polytope>,
    shares: DVector<f64>,
    b_rows: Vec<DVector<f64>>,
    c_mats: Vec<DMatrix<f64>>,
    projectors: Vec<AffineProjector>,
    projection: ProjectionSettings,
}

impl<'a> ExtendedGame<'a> {
    pub fn new(game: &'a UncertainGame, polys: Vec<Polytope>, split: BudgetSplit) -> Result<Self> {
        let n_players = game.n_players();
        let n = game.dim();
        check_dim(n_players, polys.len())?;
        for p in &polys {
            check_dim(n, p.dim())?;
            if p.facet_count() == 0 {
                return Err(Error::EmptyPolytope);
            }
        }
        let shares = match split {
            BudgetSplit::Equal => DVector::from_element(n_players, game.budget() / n_players as f64),
            BudgetSplit::Custom(w) => {
                if w.len() != n_players {
                    return Err(Error::InvalidBudgetSplit(format!("{} shares for {n_players} players", w.len())));
                }
                let total: f64 = w.iter().sum();
                if (total - game.budget()).abs() > 1e-9 * game.budget().abs().max(1.0) {
                    return Err(Error::InvalidBudgetSplit(format!("shares sum to {total}, budget is {}", game.budget())));
                }
                DVector::from_vec(w)
            }
        };
        let mut b_rows = Vec::with_capacity(n_players);
        let mut c_mats = Vec::with_capacity(n_players);
        let mut projectors = Vec::with_capacity(n_players);
        for (p, bx) in polys.iter().zip(game.boxes()) {
            let q = p.facet_count();
            let mut b = DVector::zeros(n + q);
            b.rows_mut(n, q).copy_from(p.offsets());
            b_rows.push(b);
            let mut c = DMatrix::zeros(n, n + q);
            c.view_mut((0, 0), (n, n)).copy_from(&(-DMatrix::<f64>::identity(n, n)));
            c.view_mut((0, n), (n, q)).copy_from(&p.normals().transpose());
            c_mats.push(c);
            projectors.push(AffineProjector::new(p, bx)?);
        }
        Ok(Self { game, polys, shares, b_rows, c_mats, projectors, projection: ProjectionSettings::default() })
    }

    pub fn with_projection(mut self, settings: ProjectionSettings) -> Self {
        self.projection = settings;
        self
    }

    pub fn game(&self) -> &'a UncertainGame {
        self.game
    }

    pub fn polytopes(&self) -> &[Polytope] {
        &self.polys
    }

    pub fn n_players(&self) -> usize {
        self.game.n_players()
    }

    pub fn dim(&self) -> usize {
        self.game.dim()
    }

    /// `q_i`.
    pub fn facets(&self, i: usize) -> usize {
        self.polys[i].facet_count()
    }

    /// `n + q_i`.
    pub fn block_len(&self, i: usize) -> usize {
        self.dim() + self.facets(i)
    }

    pub fn block_lengths(&self) -> Vec<usize> {
        (0..self.n_players()).map(|i| self.block_len(i)).collect()
    }

    /// Length of the flattened `(z, lambda, zeta)`.
    pub fn state_len(&self) -> usize {
        self.block_lengths().iter().sum::<usize>() + 2 * self.n_players()
    }

    pub fn b_row(&self, i: usize) -> &DVector<f64> {
        &self.b_rows[i]
    }

    pub fn c_matrix(&self, i: usize) -> &DMatrix<f64> {
        &self.c_mats[i]
    }

    /// Local budget shares `b_i`.
    pub fn shares(&self) -> &DVector<f64> {
        &self.shares
    }

    pub fn projection_settings(&self) -> &ProjectionSettings {
        &self.projection
    }

    /// `B_i z_i = d_i^T sigma_i`.
    pub fn load(&self, i: usize, z_i: &DVector<f64>) -> f64 {
        self.b_rows[i].dot(z_i)
    }

    /// `B z - b`, one entry per player.
    pub fn load_gap(&self, state: &ExtendedState) -> DVector<f64> {
        DVector::from_fn(self.n_players(), |i, _| self.load(i, &state.z[i]) - self.shares[i])
    }

    /// Player `i`'s block of `g`: own cost gradient in `x_i`, zero in `sigma_i`.
    /// `profile` only needs the x-blocks that enter the cost of player `i`.
    pub fn player_gradient(&self, i: usize, profile: &[DVector<f64>]) -> Result<DVector<f64>> {
        let gx = self.game.player_gradient(i, profile)?;
        let mut g = DVector::zeros(self.block_len(i));
        g.rows_mut(0, self.dim()).copy_from(&gx);
        Ok(g)
    }

    /// Stacked `g(z)` over all players.
    pub fn extended_gradient(&self, state: &ExtendedState) -> Result<DVector<f64>> {
        self.check_state(state)?;
        let profile = state.profile(self);
        let blocks: Result<Vec<_>> = (0..self.n_players()).map(|i| self.player_gradient(i, &profile)).collect();
        Ok(stack(&blocks?))
    }

    /// Euclidean projection of `z_i` onto `Omega_i`.
    pub fn project_omega(&self, i: usize, z_i: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.block_len(i), z_i.len())?;
        let out = self.projectors[i].project(z_i.as_slice(), &self.projection)?;
        Ok(DVector::from_vec(out))
    }

    /// Largest violation of `Omega_i`: `|A^T sigma - x|` or a box/orthant excess.
    pub fn omega_residual(&self, i: usize, z_i: &DVector<f64>) -> f64 {
        let p = &self.projectors[i];
        p.residual(z_i.as_slice()).max(p.cone_violation(z_i.as_slice()))
    }

    /// Feasible starting state: `x_i` = box projection of the nominal demand
    /// (box center for custom costs), `sigma_i = 0`, both projected onto
    /// `Omega_i`; `lambda = 0`, `zeta = 0`.
    pub fn default_init(&self) -> Result<ExtendedState> {
        let n = self.dim();
        let mut z = Vec::with_capacity(self.n_players());
        for (i, bx) in self.game.boxes().iter().enumerate() {
            let x0 = match self.game.cost_model() {
                CostModel::DemandResponse(m) => bx.project(&m.nominal()[i])?,
                CostModel::Custom(_) => bx.center(),
            };
            let mut zi = DVector::zeros(self.block_len(i));
            zi.rows_mut(0, n).copy_from(&x0);
            z.push(self.project_omega(i, &zi)?);
        }
        let n_players = self.n_players();
        Ok(ExtendedState { z, lambda: DVector::zeros(n_players), zeta: DVector::zeros(n_players) })
    }

    pub fn check_state(&self, state: &ExtendedState) -> Result<()> {
        check_dim(self.n_players(), state.z.len())?;
        for (i, zi) in state.z.iter().enumerate() {
            check_dim(self.block_len(i), zi.len())?;
        }
        check_dim(self.n_players(), state.lambda.len())?;
        check_dim(self.n_players(), state.zeta.len())
    }

    /// Dimensions, shares, and every `B_i`, `C_i` in the plain-text matrix format.
    pub fn to_text(&self) -> String {
        let mut out = format!("# extended game players={} dim={}\n", self.n_players(), self.dim());
        write_matrix(&mut out, "shares", &DMatrix::from_row_slice(1, self.n_players(), self.shares.as_slice()));
        for i in 0..self.n_players() {
            let b = &self.b_rows[i];
            write_matrix(&mut out, &format!("B_{i}"), &DMatrix::from_row_slice(1, b.len(), b.as_slice()));
            write_matrix(&mut out, &format!("C_{i}"), &self.c_mats[i]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{CommGraph, DemandResponse, Ellipsoid, SupportFunction};
    use crate::polytope::{inscribe_regular, Spacing};
    use crate::testing::{benchmark_game, benchmark_polys};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_square() -> UncertainGame {
        UncertainGame::new(
            vec![BoxSet::uniform(2, -15.0, 20.0).unwrap()],
            CostModel::DemandResponse(DemandResponse::staggered(1, 2)),
            vec![Ellipsoid::ellipse(3.0, 2.0, 2.0, 2.0).unwrap().into()],
            10.0,
            CommGraph::ring(1).unwrap(),
        )
        .unwrap()
    }

    fn square() -> Polytope {
        inscribe_regular(&Ellipsoid::ellipse(3.0, 2.0, 2.0, 2.0).unwrap(), 4, 0.0, Spacing::ParameterAngle).unwrap()
    }

    #[test]
    fn block_shapes() {
        let g = single_square();
        let eg = ExtendedGame::new(&g, vec![square()], BudgetSplit::Equal).unwrap();
        assert_eq!(eg.b_row(0).len(), 6);
        assert_eq!(eg.b_row(0).rows(0, 2), DVector::zeros(2));
        let c = eg.c_matrix(0);
        assert_eq!(c.shape(), (2, 6));
        assert_eq!(c.view((0, 0), (2, 2)), -DMatrix::<f64>::identity(2, 2));
        assert_eq!(eg.state_len(), 6 + 2);
    }

    #[test]
    fn equal_split_sums_to_budget() {
        for b in [10.0, -3.7, 1e6 / 7.0] {
            let g = benchmark_game(b);
            let eg = ExtendedGame::new(&g, benchmark_polys(4), BudgetSplit::Equal).unwrap();
            assert!((eg.shares().sum() - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn custom_split_is_validated() {
        let g = benchmark_game(10.0);
        let bad = ExtendedGame::new(&g, benchmark_polys(4), BudgetSplit::Custom(vec![2.0; 10]));
        assert!(matches!(bad, Err(Error::InvalidBudgetSplit(_))));
        let mut w = vec![0.0; 10];
        w[3] = 10.0;
        assert!(ExtendedGame::new(&g, benchmark_polys(4), BudgetSplit::Custom(w)).is_ok());
    }

    /// `min {d^T s : A^T s = x, s >= 0}` for a polygon, by enumerating
    /// all basic solutions (pairs of facets).
    fn lp_by_bases(p: &Polytope, x: &DVector<f64>) -> f64 {
        let q = p.facet_count();
        let mut best = f64::INFINITY;
        for j in 0..q {
            for k in j + 1..q {
                let m = nalgebra::Matrix2::new(p.normals()[(j, 0)], p.normals()[(k, 0)], p.normals()[(j, 1)], p.normals()[(k, 1)]);
                if let Some(inv) = m.try_inverse() {
                    let s = inv * nalgebra::Vector2::new(x[0], x[1]);
                    if s[0] >= -1e-12 && s[1] >= -1e-12 {
                        best = best.min(p.offsets()[j] * s[0] + p.offsets()[k] * s[1]);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn dual_value_equals_polytope_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = Ellipsoid::ellipse(3.0, 2.0, 2.0, 2.0).unwrap();
        for v in [3, 4, 7] {
            let p = inscribe_regular(&e, v, 0.3, Spacing::ParameterAngle).unwrap();
            for _ in 0..20 {
                // a point on the boundary of [-15, 20]^2
                let t: f64 = rng.random_range(-15.0..20.0);
                let x = match rng.random_range(0..4) {
                    0 => DVector::from_vec(vec![-15.0, t]),
                    1 => DVector::from_vec(vec![20.0, t]),
                    2 => DVector::from_vec(vec![t, -15.0]),
                    _ => DVector::from_vec(vec![t, 20.0]),
                };
                let lp = lp_by_bases(&p, &x);
                let support = p.vertices().iter().map(|w| w.dot(&x)).fold(f64::NEG_INFINITY, f64::max);
                assert!((lp - support).abs() < 1e-9 * support.abs().max(1.0), "{lp} vs {support}");
            }
        }
    }

    /// Exact projection onto `Omega` for one player by active-set enumeration:
    /// every choice of active bounds, solve the equality-constrained QP, keep
    /// the feasible KKT point.
    fn qp_oracle(p: &Polytope, bx: &BoxSet, y: &DVector<f64>) -> DVector<f64> {
        let n = p.dim();
        let q = p.facet_count();
        let len = n + q;
        // each coordinate: free, at lower, at upper (x) / free, at zero (sigma)
        let choices: Vec<usize> = (0..len).map(|k| if k < n { 3 } else { 2 }).collect();
        let total: usize = choices.iter().product();
        let mut best: Option<(f64, DVector<f64>)> = None;
        for code in 0..total {
            let mut c = code;
            let mut fixed: Vec<(usize, f64)> = Vec::new();
            for (k, &m) in choices.iter().enumerate() {
                let pick = c % m;
                c /= m;
                match (k < n, pick) {
                    (true, 1) => fixed.push((k, bx.lower()[k])),
                    (true, 2) => fixed.push((k, bx.upper()[k])),
                    (false, 1) => fixed.push((k, 0.0)),
                    _ => {}
                }
            }
            // equality constraints: C z = 0 and z_k = value for fixed k
            let rows = n + fixed.len();
            let mut e = DMatrix::zeros(rows, len);
            let mut rhs = DVector::zeros(rows);
            for r in 0..n {
                e[(r, r)] = -1.0;
                for l in 0..q {
                    e[(r, n + l)] = p.normals()[(l, r)];
                }
            }
            for (r, &(k, v)) in fixed.iter().enumerate() {
                e[(n + r, k)] = 1.0;
                rhs[n + r] = v;
            }
            // min 1/2 |z - y|^2 s.t. E z = rhs via the KKT system
            let mut kkt = DMatrix::zeros(len + rows, len + rows);
            kkt.view_mut((0, 0), (len, len)).fill_with_identity();
            kkt.view_mut((0, len), (len, rows)).copy_from(&e.transpose());
            kkt.view_mut((len, 0), (rows, len)).copy_from(&e);
            let mut r = DVector::zeros(len + rows);
            r.rows_mut(0, len).copy_from(y);
            r.rows_mut(len, rows).copy_from(&rhs);
            let Some(sol) = kkt.clone().lu().solve(&r) else { continue };
            if (&kkt * &sol - &r).norm() > 1e-8 {
                continue;
            }
            let z = sol.rows(0, len).into_owned();
            let feasible = (0..n).all(|k| z[k] >= bx.lower()[k] - 1e-9 && z[k] <= bx.upper()[k] + 1e-9)
                && (n..len).all(|k| z[k] >= -1e-9);
            if feasible {
                let dist = (&z - y).norm_squared();
                if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                    best = Some((dist, z));
                }
            }
        }
        best.unwrap().1
    }

    #[test]
    fn projection_matches_active_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let e = Ellipsoid::ellipse(3.0, 2.0, 2.0, 2.0).unwrap();
        let g = single_square();
        let bx = g.boxes()[0].clone();
        for _ in 0..50 {
            let p = inscribe_regular(&e, 4, rng.random_range(0.0..std::f64::consts::TAU), Spacing::ParameterAngle).unwrap();
            let eg = ExtendedGame::new(&g, vec![p.clone()], BudgetSplit::Equal).unwrap();
            let y = DVector::from_fn(6, |_, _| rng.random_range(-25.0..25.0));
            let got = eg.project_omega(0, &y).unwrap();
            let want = qp_oracle(&p, &bx, &y);
            assert!((&got - &want).norm() < 1e-7, "{got} vs {want}");
        }
    }

    #[test]
    fn feasible_input_is_unchanged() {
        let g = single_square();
        let eg = ExtendedGame::new(&g, vec![square()], BudgetSplit::Equal).unwrap();
        let y = DVector::from_vec(vec![3.0, -7.0, 1.0, 2.0, 0.5, 9.0]);
        let z = eg.project_omega(0, &y).unwrap();
        assert!(eg.omega_residual(0, &z) < 1e-9);
        let again = eg.project_omega(0, &z).unwrap();
        assert!((&again - &z).norm() < 1e-12);
    }

    #[test]
    fn gradient_sigma_blocks_are_zero() {
        let g = benchmark_game(10.0);
        let eg = ExtendedGame::new(&g, benchmark_polys(6), BudgetSplit::Equal).unwrap();
        let s = eg.default_init().unwrap();
        let grad = eg.extended_gradient(&s).unwrap();
        let base = g.pseudo_gradient(&s.profile(&eg)).unwrap();
        let blocks = crate::game::split(&grad, &eg.block_lengths()).unwrap();
        for (i, b) in blocks.iter().enumerate() {
            assert!(b.rows(2, 6).iter().all(|v| *v == 0.0));
            assert_eq!(b.rows(0, 2), base.rows(2 * i, 2));
        }
    }

    #[test]
    fn gradient_is_monotone_in_x_and_flat_in_sigma() {
        let g = benchmark_game(10.0);
        let eg = ExtendedGame::new(&g, benchmark_polys(4), BudgetSplit::Equal).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let base = eg.default_init().unwrap();
        for _ in 0..50 {
            let mut a = base.clone();
            let mut b = base.clone();
            for i in 0..10 {
                a.z[i] = DVector::from_fn(6, |_, _| rng.random_range(-15.0..20.0));
                b.z[i] = DVector::from_fn(6, |_, _| rng.random_range(-15.0..20.0));
            }
            let (ga, gb) = (eg.extended_gradient(&a).unwrap(), eg.extended_gradient(&b).unwrap());
            assert!((&ga - &gb).dot(&(a.flatten().rows(0, 60) - b.flatten().rows(0, 60))) > 0.0);
            // moving only sigma leaves g unchanged
            let mut c = a.clone();
            for i in 0..10 {
                c.z[i][3] += 1.0;
            }
            assert_eq!(eg.extended_gradient(&c).unwrap(), ga);
        }
    }

    #[test]
    fn feasible_points_satisfy_polytope_worst_case() {
        let g = benchmark_game(10.0);
        let polys = benchmark_polys(6);
        let eg = ExtendedGame::new(&g, polys.clone(), BudgetSplit::Equal).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let i = rng.random_range(0..10);
            let y = DVector::from_fn(8, |_, _| rng.random_range(-20.0..20.0));
            let z = eg.project_omega(i, &y).unwrap();
            let x = z.rows(0, 2).into_owned();
            if x.norm() == 0.0 {
                continue;
            }
            // weak duality: d^T sigma >= max over vertices of w^T x
            assert!(eg.load(i, &z) >= polys[i].support(&x).unwrap() - 1e-7);
        }
    }

    #[test]
    fn origin_is_feasible_when_box_contains_it() {
        let g = benchmark_game(10.0);
        let eg = ExtendedGame::new(&g, benchmark_polys(3), BudgetSplit::Equal).unwrap();
        let zero = DVector::zeros(eg.block_len(0));
        assert_eq!(eg.omega_residual(0, &zero), 0.0);
        assert_eq!(eg.project_omega(0, &zero).unwrap(), zero);
    }

    #[test]
    fn construction_is_deterministic() {
        let g = benchmark_game(10.0);
        let a = ExtendedGame::new(&g, benchmark_polys(8), BudgetSplit::Equal).unwrap().to_text();
        let b = ExtendedGame::new(&g, benchmark_polys(8), BudgetSplit::Equal).unwrap().to_text();
        assert_eq!(a, b);
        assert!(a.contains("# C_9 2x10"));
    }

    #[test]
    fn flatten_round_trip() {
        let g = benchmark_game(10.0);
        let eg = ExtendedGame::new(&g, benchmark_polys(5), BudgetSplit::Equal).unwrap();
        let mut s = eg.default_init().unwrap();
        s.lambda[2] = 0.5;
        s.zeta[7] = -1.0;
        let back = ExtendedState::unflatten(&eg, &s.flatten()).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn projection_is_idempotent_and_nonexpansive(
            a in proptest::collection::vec(-30.0f64..30.0, 8),
            b in proptest::collection::vec(-30.0f64..30.0, 8),
        ) {
            let g = benchmark_game(10.0);
            let eg = ExtendedGame::new(&g, benchmark_polys(6), BudgetSplit::Equal).unwrap();
            let (a, b) = (DVector::from_vec(a), DVector::from_vec(b));
            let pa = eg.project_omega(1, &a).unwrap();
            let pb = eg.project_omega(1, &b).unwrap();
            prop_assert!(eg.omega_residual(1, &pa) <= 1e-9);
            prop_assert!((eg.project_omega(1, &pa).unwrap() - &pa).norm() < 1e-9);
            prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-8);
        }
    }
}
