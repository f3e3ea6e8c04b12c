//! Convex hulls of point sets whose points are all extreme (points on the
//! boundary of a strictly convex body). Planar hulls are angular sorts;
//! higher dimensions use incremental beneath-beyond with simplicial facets,
//! merged into H-representation facets afterwards.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) struct Facet {
    pub normal: DVector<f64>,
    pub offset: f64,
    pub vertices: Vec<usize>,
}

/// Counter-clockwise order of planar points around their centroid.
pub(crate) fn ccw_order(points: &[DVector<f64>]) -> Vec<usize> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        let ta = (points[a][1] - cy).atan2(points[a][0] - cx);
        let tb = (points[b][1] - cy).atan2(points[b][0] - cx);
        ta.partial_cmp(&tb).unwrap()
    });
    idx
}

/// Facets of a convex polygon whose vertices are given in counter-clockwise order.
pub(crate) fn polygon_facets(vertices: &[DVector<f64>]) -> Result<Vec<Facet>> {
    let v = vertices.len();
    let scale = vertices.iter().map(|p| p.amax()).fold(1.0, f64::max);
    let mut facets = Vec::with_capacity(v);
    for k in 0..v {
        let (a, b) = (&vertices[k], &vertices[(k + 1) % v]);
        let e = b - a;
        let len = e.norm();
        if len <= 1e-12 * scale {
            return Err(Error::DegeneratePolytope(format!("vertices {k} and {} coincide", (k + 1) % v)));
        }
        let normal = DVector::from_vec(vec![e[1] / len, -e[0] / len]);
        let offset = normal.dot(a);
        facets.push(Facet { normal, offset, vertices: vec![k, (k + 1) % v] });
    }
    // convexity: every vertex on the inner side of every edge
    for f in &facets {
        for (j, p) in vertices.iter().enumerate() {
            if f.normal.dot(p) > f.offset + 1e-9 * scale {
                return Err(Error::DegeneratePolytope(format!("vertex {j} lies outside an edge; points are not in convex position")));
            }
        }
    }
    Ok(facets)
}

/// Generalized cross product: unit normal of the hyperplane through `n` points in `R^n`.
fn hyperplane_normal(points: &[&DVector<f64>]) -> Option<DVector<f64>> {
    let n = points[0].len();
    let base = points[0];
    let diffs = DMatrix::from_fn(n - 1, n, |r, c| points[r + 1][c] - base[c]);
    let mut normal = DVector::zeros(n);
    for k in 0..n {
        let minor = diffs.clone().remove_column(k);
        let det = if n == 1 { 1.0 } else { minor.determinant() };
        normal[k] = if k % 2 == 0 { det } else { -det };
    }
    let len = normal.norm();
    let scale = diffs.iter().fold(0.0f64, |m, v| m.max(v.abs())).powi(n as i32 - 1);
    if len <= 1e-13 * scale.max(1e-300) {
        None
    } else {
        Some(normal / len)
    }
}

struct Simplex {
    normal: DVector<f64>,
    offset: f64,
    vertices: Vec<usize>,
}

fn oriented_simplex(points: &[DVector<f64>], vertices: Vec<usize>, interior: &DVector<f64>) -> Option<Simplex> {
    let refs: Vec<&DVector<f64>> = vertices.iter().map(|&i| &points[i]).collect();
    let mut normal = hyperplane_normal(&refs)?;
    let mut offset = normal.dot(refs[0]);
    if normal.dot(interior) > offset {
        normal = -normal;
        offset = -offset;
    }
    Some(Simplex { normal, offset, vertices })
}

/// Affinely independent starting simplex chosen greedily.
fn initial_simplex(points: &[DVector<f64>]) -> Result<Vec<usize>> {
    let n = points[0].len();
    let mut chosen = vec![0usize];
    let mut basis: Vec<DVector<f64>> = Vec::new();
    while chosen.len() < n + 1 {
        let origin = &points[chosen[0]];
        let mut best = (usize::MAX, 0.0);
        for (i, p) in points.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let mut r = p - origin;
            for b in &basis {
                r -= b * b.dot(&r);
            }
            let d = r.norm();
            if d > best.1 {
                best = (i, d);
            }
        }
        let scale = points.iter().map(|p| (p - origin).norm()).fold(0.0, f64::max);
        if best.0 == usize::MAX || best.1 <= 1e-9 * scale.max(1e-300) {
            return Err(Error::DegeneratePolytope("points do not span the space".into()));
        }
        let mut r = &points[best.0] - origin;
        for b in &basis {
            r -= b * b.dot(&r);
        }
        basis.push(r.normalize());
        chosen.push(best.0);
    }
    Ok(chosen)
}

/// Hull facets in `R^n`, `n >= 2`, for points that are all extreme.
pub(crate) fn hull_facets(points: &[DVector<f64>]) -> Result<Vec<Facet>> {
    let n = points[0].len();
    if points.len() < n + 1 {
        return Err(Error::TooFewVertices { min: n + 1, got: points.len() });
    }
    let start = initial_simplex(points)?;
    let interior = start.iter().fold(DVector::zeros(n), |acc: DVector<f64>, &i| acc + &points[i]) / (n + 1) as f64;
    let scale = points.iter().map(|p| (p - &interior).norm()).fold(0.0, f64::max);
    let eps = 1e-10 * scale;

    let mut simplices: Vec<Simplex> = Vec::new();
    for skip in 0..=n {
        let verts: Vec<usize> = start.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, &v)| v).collect();
        simplices.push(
            oriented_simplex(points, verts, &interior)
                .ok_or_else(|| Error::DegeneratePolytope("flat initial simplex".into()))?,
        );
    }

    for (p_idx, p) in points.iter().enumerate() {
        if start.contains(&p_idx) {
            continue;
        }
        let visible: Vec<bool> = simplices.iter().map(|s| s.normal.dot(p) - s.offset > eps).collect();
        if !visible.iter().any(|v| *v) {
            // inside or on the current hull; coplanar boundary points are absorbed by facet merging below
            continue;
        }
        // horizon ridges: (n-1)-subsets owned by exactly one visible simplex and one hidden simplex
        let mut ridge_count: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for (s, vis) in simplices.iter().zip(&visible) {
            for skip in 0..n {
                let mut ridge: Vec<usize> = s.vertices.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, &v)| v).collect();
                ridge.sort_unstable();
                let e = ridge_count.entry(ridge).or_insert((0, 0));
                if *vis {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        let mut horizon: Vec<Vec<usize>> = ridge_count
            .into_iter()
            .filter(|(_, (v, h))| *v == 1 && *h == 1)
            .map(|(r, _)| r)
            .collect();
        horizon.sort();
        let mut next: Vec<Simplex> = simplices
            .into_iter()
            .zip(visible)
            .filter(|(_, v)| !v)
            .map(|(s, _)| s)
            .collect();
        for mut ridge in horizon {
            ridge.push(p_idx);
            if let Some(s) = oriented_simplex(points, ridge, &interior) {
                next.push(s);
            }
        }
        simplices = next;
    }

    // merge coplanar simplices into facets
    let mut facets: Vec<Facet> = Vec::new();
    for s in simplices {
        if let Some(f) = facets
            .iter_mut()
            .find(|f| (&f.normal - &s.normal).norm() < 1e-9 && (f.offset - s.offset).abs() < 1e-9 * scale.max(1.0))
        {
            for v in s.vertices {
                if !f.vertices.contains(&v) {
                    f.vertices.push(v);
                }
            }
        } else {
            facets.push(Facet { normal: s.normal, offset: s.offset, vertices: s.vertices });
        }
    }
    for f in &mut facets {
        f.vertices.sort_unstable();
    }
    Ok(facets)
}
