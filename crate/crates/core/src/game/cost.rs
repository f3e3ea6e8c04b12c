use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{check_dim, Result};

/// A player's cost, evaluated on the full profile `x = (x_1, ..., x_N)`.
pub trait PlayerCost: Send + Sync + fmt::Debug {
    fn cost(&self, player: usize, profile: &[DVector<f64>]) -> f64;

    /// Gradient with respect to the player's own block. `None` selects a
    /// central finite-difference fallback.
    fn gradient(&self, _player: usize, _profile: &[DVector<f64>]) -> Option<DVector<f64>> {
        None
    }
}

/// Aggregative demand-response cost
/// `J_i = 1/2 |x_i - w_i|^2 - x_i^T p(Q(x))` with price `p = N (1 - Q)` and
/// aggregate `Q = (1/N) sum_j x_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct DemandResponse {
    nominal: Vec<DVector<f64>>,
}

impl DemandResponse {
    pub fn new(nominal: Vec<DVector<f64>>) -> Self {
        Self { nominal }
    }

    /// Nominal consumptions `w_i = (5 - i) 1` for players `i = 1..=players`.
    pub fn staggered(players: usize, dim: usize) -> Self {
        Self::new(
            (1..=players)
                .map(|i| DVector::from_element(dim, 5.0 - i as f64))
                .collect(),
        )
    }

    pub fn nominal(&self) -> &[DVector<f64>] {
        &self.nominal
    }

    fn price(&self, profile: &[DVector<f64>]) -> DVector<f64> {
        let n = profile.len() as f64;
        let dim = profile[0].len();
        let total = profile
            .iter()
            .fold(DVector::zeros(dim), |acc: DVector<f64>, x| acc + x);
        DVector::from_element(dim, n) - total
    }

    pub fn cost(&self, i: usize, profile: &[DVector<f64>]) -> f64 {
        let p = self.price(profile);
        0.5 * (&profile[i] - &self.nominal[i]).norm_squared() - profile[i].dot(&p)
    }

    /// `(x_i - w_i) - p + x_i`; the last term is `-(dp/dx_i)^T x_i` with `dp/dx_i = -I`.
    pub fn gradient(&self, i: usize, profile: &[DVector<f64>]) -> DVector<f64> {
        let p = self.price(profile);
        &profile[i] * 2.0 - &self.nominal[i] - p
    }
}

#[derive(Clone, Debug)]
pub enum CostModel {
    DemandResponse(DemandResponse),
    Custom(Arc<dyn PlayerCost>),
}

static FD_WARNED: AtomicBool = AtomicBool::new(false);

impl CostModel {
    pub fn cost(&self, player: usize, profile: &[DVector<f64>]) -> f64 {
        match self {
            CostModel::DemandResponse(m) => m.cost(player, profile),
            CostModel::Custom(c) => c.cost(player, profile),
        }
    }

    pub fn player_gradient(&self, player: usize, profile: &[DVector<f64>]) -> DVector<f64> {
        match self {
            CostModel::DemandResponse(m) => m.gradient(player, profile),
            CostModel::Custom(c) => c.gradient(player, profile).unwrap_or_else(|| {
                if !FD_WARNED.swap(true, Ordering::Relaxed) {
                    log::warn!("custom cost has no gradient; using central finite differences");
                }
                central_difference(|p| c.cost(player, p), player, profile)
            }),
        }
    }

    pub(crate) fn validate(&self, players: usize, dim: usize) -> Result<()> {
        if let CostModel::DemandResponse(m) = self {
            check_dim(players, m.nominal.len())?;
            for w in &m.nominal {
                check_dim(dim, w.len())?;
            }
        }
        Ok(())
    }
}

/// Central differences in the block of `player`, step `1e-5 * max(1, |x_k|)`.
pub fn central_difference<F>(f: F, player: usize, profile: &[DVector<f64>]) -> DVector<f64>
where
    F: Fn(&[DVector<f64>]) -> f64,
{
    let mut work = profile.to_vec();
    let dim = profile[player].len();
    DVector::from_iterator(
        dim,
        (0..dim).map(|k| {
            let x0 = profile[player][k];
            let h = 1e-5 * x0.abs().max(1.0);
            work[player][k] = x0 + h;
            let up = f(&work);
            work[player][k] = x0 - h;
            let down = f(&work);
            work[player][k] = x0;
            (up - down) / (2.0 * h)
        }),
    )
}
