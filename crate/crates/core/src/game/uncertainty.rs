//! Convex uncertainty sets described by their support functions.
//!
//! Ellipsoids are native. Anything else enters through [`SupportFunction`]:
//! the approximation and verification machinery only ever asks a set for
//! `g(u) = max <u, w>` and for a maximizer `w`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};

/// Support function of a compact convex set in `R^n`.
pub trait SupportFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// `max { <u, w> : w in set }`. `u` must be nonzero.
    fn support(&self, u: &DVector<f64>) -> Result<f64>;

    /// A maximizer of `<u, w>` over the set, on its boundary.
    fn arg_support(&self, u: &DVector<f64>) -> Result<DVector<f64>>;
}

fn nonzero(u: &DVector<f64>) -> Result<()> {
    if u.iter().all(|v| *v == 0.0) {
        Err(Error::ZeroDirection)
    } else {
        Ok(())
    }
}

/// Axis-aligned ellipsoid `{x : sum_k (x_k - c_k)^2 / v_k^2 <= 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    center: DVector<f64>,
    semiaxes: DVector<f64>,
}

impl Ellipsoid {
    pub fn new(center: DVector<f64>, semiaxes: DVector<f64>) -> Result<Self> {
        check_dim(center.len(), semiaxes.len())?;
        if semiaxes.is_empty() || semiaxes.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidSemiaxes);
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("ellipsoid center is not finite".into()));
        }
        Ok(Self { center, semiaxes })
    }

    /// Planar ellipse with semiaxes `(a, b)` centred at `(cx, cy)`.
    pub fn ellipse(a: f64, b: f64, cx: f64, cy: f64) -> Result<Self> {
        Self::new(DVector::from_vec(vec![cx, cy]), DVector::from_vec(vec![a, b]))
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn semiaxes(&self) -> &DVector<f64> {
        &self.semiaxes
    }

    /// `sum_k ((x_k - c_k)/v_k)^2 - 1`; zero on the boundary, negative inside.
    pub fn membership_residual(&self, x: &DVector<f64>) -> f64 {
        x.iter()
            .zip(self.center.iter().zip(self.semiaxes.iter()))
            .map(|(x, (c, v))| ((x - c) / v).powi(2))
            .sum::<f64>()
            - 1.0
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.membership_residual(x) <= tol
    }

    /// Boundary point at parameter angle `phi` of a planar ellipse.
    pub fn boundary_point(&self, phi: f64) -> DVector<f64> {
        debug_assert_eq!(self.dim(), 2);
        DVector::from_vec(vec![
            self.center[0] + self.semiaxes[0] * phi.cos(),
            self.center[1] + self.semiaxes[1] * phi.sin(),
        ])
    }

    /// Boundary point `c + diag(v) s` for a unit vector `s`.
    pub fn boundary_point_from_sphere(&self, s: &DVector<f64>) -> DVector<f64> {
        &self.center + self.semiaxes.component_mul(s)
    }

    /// Largest normal curvature of the boundary, `max_k v_k / min_k v_k^2`.
    pub fn max_curvature(&self) -> f64 {
        let vmax = self.semiaxes.max();
        let vmin = self.semiaxes.min();
        vmax / (vmin * vmin)
    }

    /// Perimeter of a planar ellipse by composite Simpson quadrature.
    pub fn perimeter(&self) -> f64 {
        let grid = ArcLengthTable::new(self, 4096);
        grid.total()
    }
}

impl SupportFunction for Ellipsoid {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn support(&self, u: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        nonzero(u)?;
        Ok(self.center.dot(u) + self.semiaxes.component_mul(u).norm())
    }

    fn arg_support(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), u.len())?;
        nonzero(u)?;
        let scaled = self.semiaxes.component_mul(u);
        let s = self.semiaxes.component_mul(&scaled) / scaled.norm();
        Ok(&self.center + s)
    }
}

/// Cumulative arc length of a planar ellipse over the parameter angle.
pub(crate) struct ArcLengthTable {
    a: f64,
    b: f64,
    // cumulative length at phi_k = k * TAU / n, k = 0..=n
    cumulative: Vec<f64>,
}

impl ArcLengthTable {
    pub(crate) fn new(ell: &Ellipsoid, intervals: usize) -> Self {
        let (a, b) = (ell.semiaxes[0], ell.semiaxes[1]);
        let speed = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
        let h = TAU / intervals as f64;
        let mut cumulative = Vec::with_capacity(intervals + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for k in 0..intervals {
            let t0 = k as f64 * h;
            acc += h / 6.0 * (speed(t0) + 4.0 * speed(t0 + 0.5 * h) + speed(t0 + h));
            cumulative.push(acc);
        }
        Self { a, b, cumulative }
    }

    pub(crate) fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn speed(&self, t: f64) -> f64 {
        (self.a * self.a * t.sin().powi(2) + self.b * self.b * t.cos().powi(2)).sqrt()
    }

    /// Arc length from 0 to `phi` in `[0, TAU]`.
    pub(crate) fn length_at(&self, phi: f64) -> f64 {
        let n = self.cumulative.len() - 1;
        let h = TAU / n as f64;
        let k = ((phi / h).floor() as usize).min(n - 1);
        let t0 = k as f64 * h;
        let dt = phi - t0;
        let mid = t0 + 0.5 * dt;
        self.cumulative[k] + dt / 6.0 * (self.speed(t0) + 4.0 * self.speed(mid) + self.speed(phi))
    }

    /// Parameter angle at which the arc length from 0 equals `s` in `[0, total]`.
    pub(crate) fn angle_at(&self, s: f64) -> f64 {
        let n = self.cumulative.len() - 1;
        let h = TAU / n as f64;
        let k = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(k) => return k as f64 * h,
            Err(k) => k.clamp(1, n) - 1,
        };
        let (s0, s1) = (self.cumulative[k], self.cumulative[k + 1]);
        let mut t = k as f64 * h + h * (s - s0) / (s1 - s0);
        for _ in 0..8 {
            let f = self.length_at(t) - s;
            t -= f / self.speed(t);
        }
        t
    }
}

/// Polytopic uncertainty set given by a vertex list.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexSet {
    vertices: Vec<DVector<f64>>,
}

impl VertexSet {
    pub fn new(vertices: Vec<DVector<f64>>) -> Result<Self> {
        let first = vertices.first().ok_or(Error::TooFewVertices { min: 1, got: 0 })?;
        for v in &vertices {
            check_dim(first.len(), v.len())?;
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    fn best(&self, u: &DVector<f64>) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, v) in self.vertices.iter().enumerate() {
            let s = v.dot(u);
            if s > best.1 {
                best = (k, s);
            }
        }
        best
    }
}

impl SupportFunction for VertexSet {
    fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    fn support(&self, u: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        nonzero(u)?;
        Ok(self.best(u).1)
    }

    fn arg_support(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), u.len())?;
        nonzero(u)?;
        Ok(self.vertices[self.best(u).0].clone())
    }
}

/// Uncertainty set of one player.
#[derive(Clone, Debug)]
pub enum UncertaintySet {
    Ellipsoid(Ellipsoid),
    Vertices(VertexSet),
    Custom(Arc<dyn SupportFunction>),
}

impl UncertaintySet {
    pub fn as_ellipsoid(&self) -> Option<&Ellipsoid> {
        match self {
            UncertaintySet::Ellipsoid(e) => Some(e),
            _ => None,
        }
    }

    fn inner(&self) -> &dyn SupportFunction {
        match self {
            UncertaintySet::Ellipsoid(e) => e,
            UncertaintySet::Vertices(v) => v,
            UncertaintySet::Custom(c) => c.as_ref(),
        }
    }
}

impl From<Ellipsoid> for UncertaintySet {
    fn from(e: Ellipsoid) -> Self {
        UncertaintySet::Ellipsoid(e)
    }
}

impl SupportFunction for UncertaintySet {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn support(&self, u: &DVector<f64>) -> Result<f64> {
        self.inner().support(u)
    }

    fn arg_support(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.inner().arg_support(u)
    }
}

/// Worst case of `<w, x>` over the set, with the convention that it is 0 at `x = 0`.
pub fn worst_case_term(set: &dyn SupportFunction, x: &DVector<f64>) -> Result<f64> {
    check_dim(set.dim(), x.len())?;
    if x.iter().all(|v| *v == 0.0) {
        Ok(0.0)
    } else {
        set.support(x)
    }
}
