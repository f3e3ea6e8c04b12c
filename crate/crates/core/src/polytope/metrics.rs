use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::Polytope;
use crate::error::{check_dim, Error, Result};
use crate::game::{Ellipsoid, SupportFunction};

/// Hausdorff distance from an inscribed polytope to its ellipsoid.
///
/// Samples `samples` boundary points (uniform parameter angle in 2D,
/// seeded Gaussian directions otherwise) together with the support points
/// of every facet normal, and returns the largest distance to the polytope.
/// In 2D the distance is exact (nearest point on the boundary polyline).
pub fn hausdorff_to_ellipsoid(ell: &Ellipsoid, poly: &Polytope, samples: usize) -> Result<f64> {
    check_dim(ell.dim(), poly.dim())?;
    let min = 8 * poly.facet_count();
    if samples < min {
        return Err(Error::Undersampled { samples, min });
    }
    let mut points: Vec<DVector<f64>> = if ell.dim() == 2 {
        (0..samples).map(|k| ell.boundary_point(TAU * k as f64 / samples as f64)).collect()
    } else {
        sphere_samples(ell.dim(), samples, 0x5eed).iter().map(|s| ell.boundary_point_from_sphere(s)).collect()
    };
    for l in 0..poly.facet_count() {
        points.push(ell.arg_support(&poly.normal(l))?);
    }
    if ell.dim() == 2 {
        let edges = polygon_edges(poly);
        Ok(points
            .par_iter()
            .map(|p| if poly.contains(p, 0.0) { 0.0 } else { distance_to_edges(&edges, p) })
            .reduce(|| 0.0, f64::max))
    } else {
        let dists: Result<Vec<f64>> = points
            .par_iter()
            .map(|p| {
                if poly.contains(p, 0.0) {
                    Ok(0.0)
                } else {
                    let proj = project_onto_halfspaces(poly.normals(), poly.offsets(), p, 20_000, 1e-12)?;
                    Ok((p - proj).norm())
                }
            })
            .collect();
        Ok(dists?.into_iter().fold(0.0, f64::max))
    }
}

/// `max_u g_set(u) - g_poly(u)` over the given directions. For `poly`
/// inside `set` this is a lower bound on the Hausdorff distance, exact when
/// the maximizing direction is included.
pub fn hausdorff_by_support(set: &dyn SupportFunction, poly: &Polytope, directions: &[DVector<f64>]) -> Result<f64> {
    check_dim(set.dim(), poly.dim())?;
    let mut best = 0.0f64;
    for u in directions {
        let n = u.norm();
        if n == 0.0 {
            return Err(Error::ZeroDirection);
        }
        let u = u / n;
        best = best.max(set.support(&u)? - poly.support(&u)?);
    }
    Ok(best)
}

fn polygon_edges(poly: &Polytope) -> Vec<(DVector<f64>, DVector<f64>)> {
    poly.facet_vertices()
        .iter()
        .map(|f| (poly.vertices()[f[0]].clone(), poly.vertices()[f[1]].clone()))
        .collect()
}

fn distance_to_edges(edges: &[(DVector<f64>, DVector<f64>)], p: &DVector<f64>) -> f64 {
    edges
        .iter()
        .map(|(a, b)| {
            let e = b - a;
            let t = ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
            (p - (a + e * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Deterministic unit directions in `R^n` from a seeded Gaussian stream.
pub(crate) fn sphere_samples(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let len = v.norm();
        if len > 1e-12 {
            out.push(v / len);
        }
    }
    out
}

/// Euclidean projection onto `{w : A w <= d}` by Dykstra's cyclic method.
pub(crate) fn project_onto_halfspaces(
    a: &DMatrix<f64>,
    d: &DVector<f64>,
    p: &DVector<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<DVector<f64>> {
    let q = a.nrows();
    let mut x = p.clone();
    let mut corr = vec![DVector::zeros(p.len()); q];
    for _ in 0..max_iter {
        let prev = x.clone();
        for l in 0..q {
            let row = a.row(l).transpose();
            let y = &x + &corr[l];
            let viol = row.dot(&y) - d[l];
            let next = if viol > 0.0 { &y - &row * (viol / row.norm_squared()) } else { y.clone() };
            corr[l] = y - &next;
            x = next;
        }
        if (&x - &prev).norm() < tol {
            return Ok(x);
        }
    }
    let residual = (a * &x - d).iter().fold(0.0f64, |m, v| m.max(*v));
    if residual <= 1e-9 {
        Ok(x)
    } else {
        Err(Error::ProjectionNotConverged { iterations: max_iter, residual })
    }
}

/// Nearest-normal matching between the facet normals of two polytopes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngularMatch {
    /// Angle of each row of the polytope with more facets to its matched row.
    pub taus: Vec<f64>,
    /// Index of the matched row in the other polytope.
    pub matched: Vec<usize>,
    pub theta: f64,
    /// True when the rows come from the first argument (it has strictly more facets).
    pub rows_from_first: bool,
}

/// For each facet normal of the polytope with more facets (the second on
/// ties), the angle to the closest facet normal of the other one.
pub fn angular_metric(a: &Polytope, b: &Polytope) -> Result<AngularMatch> {
    check_dim(a.dim(), b.dim())?;
    if a.facet_count() == 0 || b.facet_count() == 0 {
        return Err(Error::EmptyPolytope);
    }
    let rows_from_first = a.facet_count() > b.facet_count();
    let (rows, pool) = if rows_from_first { (a, b) } else { (b, a) };
    let dots = rows.normals() * pool.normals().transpose();
    let mut taus = Vec::with_capacity(rows.facet_count());
    let mut matched = Vec::with_capacity(rows.facet_count());
    for l in 0..rows.facet_count() {
        let (mut j, mut best) = (0, f64::NEG_INFINITY);
        for k in 0..pool.facet_count() {
            if dots[(l, k)] > best {
                best = dots[(l, k)];
                j = k;
            }
        }
        taus.push(best.clamp(-1.0, 1.0).acos());
        matched.push(j);
    }
    let theta = taus.iter().cloned().fold(0.0, f64::max);
    Ok(AngularMatch { taus, matched, theta, rows_from_first })
}

/// Approximation quality of one inscribed polytope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproxMetrics {
    pub hausdorff: f64,
    pub max_angle: f64,
    pub facet_angles: Vec<f64>,
    pub curvature: f64,
    pub facet_count: usize,
}

/// Hausdorff distance to `ell` plus the angular metric against `reference`.
/// `curvature` defaults to the maximum boundary curvature of `ell`.
pub fn approx_metrics(
    ell: &Ellipsoid,
    poly: &Polytope,
    reference: &Polytope,
    samples: usize,
    curvature: Option<f64>,
) -> Result<ApproxMetrics> {
    let hausdorff = hausdorff_to_ellipsoid(ell, poly, samples)?;
    let m = angular_metric(poly, reference)?;
    Ok(ApproxMetrics {
        hausdorff,
        max_angle: m.theta,
        facet_angles: m.taus,
        curvature: curvature.unwrap_or_else(|| ell.max_curvature()),
        facet_count: poly.facet_count(),
    })
}

/// Per-player inputs of the perturbation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlayerBoundInput {
    pub facets: usize,
    pub theta: f64,
    pub hausdorff: f64,
    pub curvature: f64,
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaBound {
    /// `r * sum q_i c_i theta_i`.
    pub angular: f64,
    /// `r * sum q_i c_i / sqrt(2 / (h_i nu_i) - 1)`; `None` when some `h_i nu_i >= 2`.
    pub hausdorff: Option<f64>,
    pub vacuous_players: Vec<usize>,
}

pub fn delta_bound(inputs: &[PlayerBoundInput], r: f64) -> Result<DeltaBound> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidArgument(format!("bound radius must be positive, got {r}")));
    }
    let mut angular = 0.0;
    let mut hausdorff = 0.0;
    let mut vacuous_players = Vec::new();
    for (i, p) in inputs.iter().enumerate() {
        if !(0.0..FRAC_PI_2).contains(&p.theta) {
            return Err(Error::InvalidArgument(format!("player {i}: angle {} outside [0, pi/2)", p.theta)));
        }
        if !(p.constant.is_finite() && p.constant > 0.0) {
            return Err(Error::InvalidArgument(format!("player {i}: constant must be positive")));
        }
        if !(p.hausdorff >= 0.0 && p.curvature > 0.0) {
            return Err(Error::InvalidArgument(format!("player {i}: need h >= 0 and curvature > 0")));
        }
        let qc = p.facets as f64 * p.constant;
        angular += qc * p.theta;
        let hn = p.hausdorff * p.curvature;
        if hn >= 2.0 {
            vacuous_players.push(i);
        } else if hn > 0.0 {
            hausdorff += qc / (2.0 / hn - 1.0).sqrt();
        }
    }
    Ok(DeltaBound {
        angular: r * angular,
        hausdorff: vacuous_players.is_empty().then_some(r * hausdorff),
        vacuous_players,
    })
}
