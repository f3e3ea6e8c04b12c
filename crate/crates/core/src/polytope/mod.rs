//! Inscribed polytopes of uncertainty sets, their refinement, and the
//! approximation metrics (Hausdorff distance, facet-normal angles, and the
//! resulting perturbation bound).

mod construct;
mod hull;
pub(crate) mod metrics;
pub(crate) mod text;

pub use construct::{cross_polytope_seed, inscribe_regular, refine_by_support_gap, refine_step, RefineStep, Spacing};
pub use metrics::{
    angular_metric, approx_metrics, delta_bound, hausdorff_by_support, hausdorff_to_ellipsoid, AngularMatch,
    ApproxMetrics, DeltaBound, PlayerBoundInput,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::game::SupportFunction;

/// Bounded polytope in paired representation: `{w : A w <= d}` with
/// unit-norm rows of `A`, together with the vertices that generate it.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    normals: DMatrix<f64>,
    offsets: DVector<f64>,
    vertices: Vec<DVector<f64>>,
    facet_vertices: Vec<Vec<usize>>,
}

impl Polytope {
    /// Convex polygon from planar points in convex position (any order).
    pub fn from_polygon(points: Vec<DVector<f64>>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::TooFewVertices { min: 3, got: points.len() });
        }
        for p in &points {
            check_dim(2, p.len())?;
        }
        let order = hull::ccw_order(&points);
        let vertices: Vec<_> = order.into_iter().map(|i| points[i].clone()).collect();
        let facets = hull::polygon_facets(&vertices)?;
        Ok(Self::assemble(vertices, facets))
    }

    /// Convex hull of points that are all extreme (e.g. boundary points of a
    /// strictly convex body). Planar input is routed to [`Polytope::from_polygon`].
    pub fn from_extreme_points(points: Vec<DVector<f64>>) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).ok_or(Error::TooFewVertices { min: 3, got: 0 })?;
        for p in &points {
            check_dim(dim, p.len())?;
        }
        match dim {
            0 | 1 => Err(Error::InvalidArgument("polytopes need dimension >= 2".into())),
            2 => Self::from_polygon(points),
            _ => {
                let facets = hull::hull_facets(&points)?;
                Ok(Self::assemble(points, facets))
            }
        }
    }

    /// Builds a polytope from explicit parts; rows of `normals` are normalized
    /// and `offsets` rescaled accordingly. No hull computation is performed.
    pub fn from_parts(
        normals: DMatrix<f64>,
        offsets: DVector<f64>,
        vertices: Vec<DVector<f64>>,
    ) -> Result<Self> {
        check_dim(normals.nrows(), offsets.len())?;
        if normals.nrows() == 0 {
            return Err(Error::EmptyPolytope);
        }
        let mut normals = normals;
        let mut offsets = offsets;
        for r in 0..normals.nrows() {
            let len = normals.row(r).norm();
            if len == 0.0 || !len.is_finite() {
                return Err(Error::DegeneratePolytope(format!("facet {r} has a zero normal")));
            }
            // already-unit rows are kept bit-for-bit
            if (len - 1.0).abs() > 4.0 * f64::EPSILON {
                normals.row_mut(r).scale_mut(1.0 / len);
                offsets[r] /= len;
            }
        }
        for v in &vertices {
            check_dim(normals.ncols(), v.len())?;
        }
        let facet_vertices = (0..normals.nrows())
            .map(|r| {
                vertices
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| (normals.row(r).dot(&v.transpose()) - offsets[r]).abs() < 1e-9)
                    .map(|(k, _)| k)
                    .collect()
            })
            .collect();
        Ok(Self { normals, offsets, vertices, facet_vertices })
    }

    fn assemble(vertices: Vec<DVector<f64>>, facets: Vec<hull::Facet>) -> Self {
        let dim = vertices[0].len();
        let q = facets.len();
        let normals = DMatrix::from_fn(q, dim, |r, c| facets[r].normal[c]);
        let offsets = DVector::from_iterator(q, facets.iter().map(|f| f.offset));
        let facet_vertices = facets
            .into_iter()
            .map(|mut f| {
                f.vertices.sort_unstable();
                f.vertices
            })
            .collect();
        Self { normals, offsets, vertices, facet_vertices }
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    pub fn facet_count(&self) -> usize {
        self.normals.nrows()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// `A`, one unit outward normal per row.
    pub fn normals(&self) -> &DMatrix<f64> {
        &self.normals
    }

    pub fn normal(&self, facet: usize) -> DVector<f64> {
        self.normals.row(facet).transpose()
    }

    /// `d`.
    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    /// Indices of the vertices lying on each facet.
    pub fn facet_vertices(&self) -> &[Vec<usize>] {
        &self.facet_vertices
    }

    pub fn contains(&self, w: &DVector<f64>, tol: f64) -> bool {
        (&self.normals * w - &self.offsets).iter().all(|s| *s <= tol)
    }

    /// Checks the representation invariants: unit rows, vertices inside
    /// every facet, and at least `dim` vertices on each facet.
    pub fn check_invariants(&self) -> Result<()> {
        for r in 0..self.facet_count() {
            let len = self.normals.row(r).norm();
            if (len - 1.0).abs() > 1e-12 {
                return Err(Error::DegeneratePolytope(format!("row {r} has norm {len}")));
            }
            if self.facet_vertices[r].len() < self.dim() {
                return Err(Error::DegeneratePolytope(format!("facet {r} carries fewer than {} vertices", self.dim())));
            }
        }
        for (k, v) in self.vertices.iter().enumerate() {
            if !self.contains(v, 1e-9) {
                return Err(Error::DegeneratePolytope(format!("vertex {k} violates a facet")));
            }
        }
        Ok(())
    }
}

impl SupportFunction for Polytope {
    fn dim(&self) -> usize {
        self.normals.ncols()
    }

    /// Vertex enumeration: `max_k <u, v_k>`.
    fn support(&self, u: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        if u.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroDirection);
        }
        Ok(self.vertices.iter().map(|v| v.dot(u)).fold(f64::NEG_INFINITY, f64::max))
    }

    fn arg_support(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), u.len())?;
        if u.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroDirection);
        }
        let mut best = (0, f64::NEG_INFINITY);
        for (k, v) in self.vertices.iter().enumerate() {
            let s = v.dot(u);
            if s > best.1 {
                best = (k, s);
            }
        }
        Ok(self.vertices[best.0].clone())
    }
}
