use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};

/// Axis-aligned box `{x : lower <= x <= upper}`, the local action set of one player.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxSet {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidBox("zero-dimensional box".into()));
        }
        for (k, (lo, hi)) in lower.iter().zip(upper.iter()).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidBox(format!("bound {k} is not finite")));
            }
            if lo > hi {
                return Err(Error::InvalidBox(format!(
                    "lower bound {lo} exceeds upper bound {hi} in component {k}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(DVector::from_element(dim, lo), DVector::from_element(dim, hi))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    /// Componentwise clamp onto the box.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = x.clone();
        self.clamp_slice(out.as_mut_slice());
        Ok(out)
    }

    pub(crate) fn clamp_slice(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(self.lower.iter()).zip(self.upper.iter()) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol)
    }

    pub fn is_interior(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (lo, hi))| *v > *lo && *v < *hi)
    }

    /// Box scaled about its center by `factor` (used to stay off the boundary).
    pub fn shrunk(&self, factor: f64) -> BoxSet {
        let c = self.center();
        BoxSet {
            lower: &c + (&self.lower - &c) * factor,
            upper: &c + (&self.upper - &c) * factor,
        }
    }

    pub fn diameter(&self) -> f64 {
        (&self.upper - &self.lower).norm()
    }
}
