//! The uncertain game: players, local boxes, costs, uncertainty sets of the
//! coupled constraint `sum_i w_i^T x_i <= b`, and the communication graph.

mod boxset;
mod cost;
mod graph;
mod uncertainty;

pub use boxset::BoxSet;
pub use cost::{central_difference, CostModel, DemandResponse, PlayerCost};
pub use graph::CommGraph;
pub(crate) use uncertainty::ArcLengthTable;
pub use uncertainty::{worst_case_term, Ellipsoid, SupportFunction, UncertaintySet, VertexSet};

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};

/// Outcome of the strict-feasibility probe run at construction.
#[derive(Clone, Debug)]
pub struct SlaterCheck {
    pub satisfied: bool,
    /// Interior profile with the smallest worst-case load found.
    pub witness: Vec<DVector<f64>>,
    /// `b - worst_case_lhs(witness)`; positive when satisfied.
    pub margin: f64,
}

#[derive(Clone, Debug)]
pub struct UncertainGame {
    dim: usize,
    boxes: Vec<BoxSet>,
    cost: CostModel,
    uncertainty: Vec<UncertaintySet>,
    budget: f64,
    graph: CommGraph,
    slater: SlaterCheck,
}

impl UncertainGame {
    pub fn new(
        boxes: Vec<BoxSet>,
        cost: CostModel,
        uncertainty: Vec<UncertaintySet>,
        budget: f64,
        graph: CommGraph,
    ) -> Result<Self> {
        let players = boxes.len();
        if players == 0 {
            return Err(Error::InvalidArgument("game needs at least one player".into()));
        }
        let dim = boxes[0].dim();
        for b in &boxes {
            check_dim(dim, b.dim())?;
        }
        check_dim(players, uncertainty.len())?;
        for u in &uncertainty {
            check_dim(dim, u.dim())?;
        }
        check_dim(players, graph.node_count())?;
        cost.validate(players, dim)?;
        if !budget.is_finite() {
            return Err(Error::InvalidArgument("budget must be finite".into()));
        }
        let mut game = Self {
            dim,
            boxes,
            cost,
            uncertainty,
            budget,
            graph,
            slater: SlaterCheck { satisfied: false, witness: vec![], margin: f64::NAN },
        };
        game.slater = game.probe_slater()?;
        if !game.slater.satisfied {
            log::warn!(
                "no strictly feasible interior profile found (best margin {:.3e}); multipliers may be unbounded",
                game.slater.margin
            );
        }
        Ok(game)
    }

    pub fn n_players(&self) -> usize {
        self.boxes.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[BoxSet] {
        &self.boxes
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost
    }

    pub fn uncertainty(&self) -> &[UncertaintySet] {
        &self.uncertainty
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn graph(&self) -> &CommGraph {
        &self.graph
    }

    pub fn slater(&self) -> &SlaterCheck {
        &self.slater
    }

    fn check_profile(&self, x: &[DVector<f64>]) -> Result<()> {
        check_dim(self.n_players(), x.len())?;
        for xi in x {
            check_dim(self.dim, xi.len())?;
        }
        Ok(())
    }

    pub fn cost(&self, player: usize, x: &[DVector<f64>]) -> Result<f64> {
        self.check_profile(x)?;
        Ok(self.cost.cost(player, x))
    }

    /// Gradient of player `i`'s cost in its own block.
    pub fn player_gradient(&self, player: usize, x: &[DVector<f64>]) -> Result<DVector<f64>> {
        self.check_profile(x)?;
        Ok(self.cost.player_gradient(player, x))
    }

    /// Stacked own-block gradients `F(x)`, length `N n`.
    pub fn pseudo_gradient(&self, x: &[DVector<f64>]) -> Result<DVector<f64>> {
        self.check_profile(x)?;
        let blocks: Vec<_> = (0..self.n_players())
            .map(|i| self.cost.player_gradient(i, x))
            .collect();
        Ok(stack(&blocks))
    }

    /// `sum_i max_{w in M_i} w^T x_i`.
    pub fn worst_case_lhs(&self, x: &[DVector<f64>]) -> Result<f64> {
        self.check_profile(x)?;
        self.uncertainty
            .iter()
            .zip(x)
            .map(|(m, xi)| worst_case_term(m, xi))
            .sum()
    }

    /// Searches the interior of the box product for a profile with the
    /// smallest worst-case load. The load is separable and convex per player.
    fn probe_slater(&self) -> Result<SlaterCheck> {
        let mut witness = Vec::with_capacity(self.n_players());
        let mut load = 0.0;
        for (m, bx) in self.uncertainty.iter().zip(&self.boxes) {
            let inner = bx.shrunk(1.0 - 1e-6);
            let (x, g) = minimize_support_over_box(m, &inner)?;
            witness.push(x);
            load += g;
        }
        let margin = self.budget - load;
        let interior = witness.iter().zip(&self.boxes).all(|(x, b)| b.is_interior(x));
        Ok(SlaterCheck { satisfied: margin > 0.0 && interior, witness, margin })
    }
}

fn minimize_support_over_box(set: &dyn SupportFunction, bx: &BoxSet) -> Result<(DVector<f64>, f64)> {
    let dim = bx.dim();
    let mut candidates = vec![bx.center(), bx.project(&DVector::zeros(dim))?];
    if dim <= 10 {
        for mask in 0..(1usize << dim) {
            candidates.push(DVector::from_fn(dim, |k, _| {
                if mask >> k & 1 == 1 { bx.upper()[k] } else { bx.lower()[k] }
            }));
        }
    }
    let eval = |x: &DVector<f64>| worst_case_term(set, x);
    let mut best = candidates[0].clone();
    let mut best_val = eval(&best)?;
    for c in candidates.iter().skip(1) {
        let v = eval(c)?;
        if v < best_val {
            best_val = v;
            best = c.clone();
        }
    }
    // projected subgradient polish; the subgradient of the support function at x is argmax_w <w, x>
    let scale = bx.diameter().max(1e-12);
    let mut x = best.clone();
    for k in 0..500 {
        if x.iter().all(|v| *v == 0.0) {
            break;
        }
        let g = set.arg_support(&x)?;
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        x = bx.project(&(&x - &g * (scale / (gn * (k as f64 + 2.0)))))?;
        let v = eval(&x)?;
        if v < best_val {
            best_val = v;
            best = x.clone();
        }
    }
    Ok((best, best_val))
}

/// Concatenate per-player blocks into one vector.
pub fn stack(blocks: &[DVector<f64>]) -> DVector<f64> {
    let len = blocks.iter().map(|b| b.len()).sum();
    let mut out = DVector::zeros(len);
    let mut at = 0;
    for b in blocks {
        out.rows_mut(at, b.len()).copy_from(b);
        at += b.len();
    }
    out
}

/// Split a stacked vector into blocks of the given lengths.
pub fn split(v: &DVector<f64>, lengths: &[usize]) -> Result<Vec<DVector<f64>>> {
    check_dim(lengths.iter().sum(), v.len())?;
    let mut at = 0;
    Ok(lengths
        .iter()
        .map(|&len| {
            let b = v.rows(at, len).into_owned();
            at += len;
            b
        })
        .collect())
}
