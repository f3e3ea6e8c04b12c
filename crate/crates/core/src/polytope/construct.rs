use std::f64::consts::TAU;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::Polytope;
use crate::error::{Error, Result};
use crate::game::{ArcLengthTable, Ellipsoid, SupportFunction};

/// How vertices of the regular family are spaced along the ellipse.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    /// Equal steps of the parameter angle in `(c1 + v1 cos t, c2 + v2 sin t)`.
    #[default]
    ParameterAngle,
    /// Equal steps of boundary arc length, starting at parameter angle `phase`.
    ArcLength,
}

/// Inscribed `v`-gon of a planar ellipse, first vertex at parameter angle `phase`.
pub fn inscribe_regular(ell: &Ellipsoid, v: usize, phase: f64, spacing: Spacing) -> Result<Polytope> {
    if ell.dim() != 2 {
        return Err(Error::InvalidArgument(format!(
            "the regular family is planar; got a {}-dimensional ellipsoid",
            ell.dim()
        )));
    }
    if v < 3 {
        return Err(Error::TooFewVertices { min: 3, got: v });
    }
    if !phase.is_finite() {
        return Err(Error::InvalidArgument("phase must be finite".into()));
    }
    let angles: Vec<f64> = match spacing {
        Spacing::ParameterAngle => (0..v).map(|k| phase + TAU * k as f64 / v as f64).collect(),
        Spacing::ArcLength => {
            let table = ArcLengthTable::new(ell, 4096);
            let total = table.total();
            let start = table.length_at(phase.rem_euclid(TAU));
            (0..v)
                .map(|k| table.angle_at((start + total * k as f64 / v as f64).rem_euclid(total)))
                .collect()
        }
    };
    Polytope::from_polygon(angles.into_iter().map(|t| ell.boundary_point(t)).collect())
}

/// Inscribed cross-polytope: the maximizers of `+-e_k` for every axis.
pub fn cross_polytope_seed(set: &dyn SupportFunction) -> Result<Polytope> {
    let n = set.dim();
    let mut points = Vec::with_capacity(2 * n);
    for k in 0..n {
        for sign in [1.0, -1.0] {
            let mut u = DVector::zeros(n);
            u[k] = sign;
            points.push(set.arg_support(&u)?);
        }
    }
    Polytope::from_extreme_points(points)
}

/// One support-gap refinement step.
#[derive(Clone, Debug)]
pub struct RefineStep {
    pub facet: usize,
    pub gap: f64,
    pub point: DVector<f64>,
    pub polytope: Polytope,
}

const GAP_TOL: f64 = 1e-12;

/// Adds the boundary point of `set` that supports the facet normal with the
/// largest gap `g_set(a_l) - d_l` (lowest facet index on ties). `None` once
/// every gap is below `1e-12`.
pub fn refine_step(set: &dyn SupportFunction, poly: &Polytope) -> Result<Option<RefineStep>> {
    let mut best: Option<(usize, f64)> = None;
    for l in 0..poly.facet_count() {
        let gap = set.support(&poly.normal(l))? - poly.offsets()[l];
        if best.is_none_or(|(_, g)| gap > g) {
            best = Some((l, gap));
        }
    }
    let (facet, gap) = best.ok_or(Error::EmptyPolytope)?;
    if gap < GAP_TOL {
        return Ok(None);
    }
    let point = set.arg_support(&poly.normal(facet))?;
    let mut points = poly.vertices().to_vec();
    points.push(point.clone());
    let polytope = Polytope::from_extreme_points(points)?;
    Ok(Some(RefineStep { facet, gap, point, polytope }))
}

/// Runs up to `steps` refinement steps, stopping early once converged.
pub fn refine_by_support_gap(set: &dyn SupportFunction, poly: &Polytope, steps: usize) -> Result<Polytope> {
    let mut current = poly.clone();
    for _ in 0..steps {
        match refine_step(set, &current)? {
            Some(step) => current = step.polytope,
            None => break,
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn benchmark_ellipse() -> Ellipsoid {
        Ellipsoid::ellipse(3.0, 2.0, 2.0, 2.0).unwrap()
    }

    #[test]
    fn square_on_the_axes() {
        let p = inscribe_regular(&benchmark_ellipse(), 4, 0.0, Spacing::ParameterAngle).unwrap();
        let v = p.vertices();
        assert_eq!(v.len(), 4);
        // counter-clockwise starting from the most negative angle about the centroid
        let mut got: Vec<_> = v.iter().map(|x| (x[0], x[1])).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = vec![(5.0, 2.0), (2.0, 4.0), (-1.0, 2.0), (2.0, 0.0)];
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, w) in got.iter().zip(&want) {
            assert!((g.0 - w.0).abs() < 1e-12 && (g.1 - w.1).abs() < 1e-12);
        }
        p.check_invariants().unwrap();
        // vertex-enumeration oracle for the support along +x
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let by_vertices = v.iter().map(|x| x.dot(&u)).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(p.support(&u).unwrap(), 5.0);
        assert_eq!(by_vertices, 5.0);
    }

    #[test]
    fn unit_circle_hexagon_offsets() {
        let c = Ellipsoid::ellipse(1.0, 1.0, 0.0, 0.0).unwrap();
        let p = inscribe_regular(&c, 6, 0.0, Spacing::ParameterAngle).unwrap();
        for d in p.offsets().iter() {
            assert!((d - (PI / 6.0).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn vertices_are_inscribed_for_both_spacings() {
        let e = benchmark_ellipse();
        for spacing in [Spacing::ParameterAngle, Spacing::ArcLength] {
            for v in [3, 5, 12, 37] {
                let p = inscribe_regular(&e, v, 0.3, spacing).unwrap();
                p.check_invariants().unwrap();
                assert_eq!(p.facet_count(), v);
                for x in p.vertices() {
                    assert!(e.membership_residual(x).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn arc_length_spacing_gives_equal_arcs() {
        let e = benchmark_ellipse();
        let p = inscribe_regular(&e, 8, 0.0, Spacing::ArcLength).unwrap();
        let table = ArcLengthTable::new(&e, 4096);
        let mut s: Vec<f64> = p
            .vertices()
            .iter()
            .map(|x| table.length_at((x[1] - 2.0).atan2((x[0] - 2.0) * 2.0 / 3.0).rem_euclid(TAU)))
            .collect();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let step = table.total() / 8.0;
        for w in s.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-8);
        }
    }

    #[test]
    fn too_few_vertices() {
        assert!(matches!(
            inscribe_regular(&benchmark_ellipse(), 2, 0.0, Spacing::ParameterAngle),
            Err(Error::TooFewVertices { min: 3, got: 2 })
        ));
    }

    #[test]
    fn refinement_adds_the_maximal_gap_point() {
        let e = benchmark_ellipse();
        let square = inscribe_regular(&e, 4, 0.0, Spacing::ParameterAngle).unwrap();
        let step = refine_step(&e, &square).unwrap().unwrap();
        assert_eq!(step.polytope.vertex_count(), 5);
        // exhaustive oracle: gap per facet from densely sampled boundary supports
        let sampled_support = |u: &DVector<f64>| {
            (0..400_000)
                .map(|k| e.boundary_point(TAU * k as f64 / 400_000.0).dot(u))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let gaps: Vec<f64> = (0..4)
            .map(|l| sampled_support(&square.normal(l)) - square.offsets()[l])
            .collect();
        let best = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((step.gap - best).abs() < 1e-8);
        // the square is symmetric, so all four gaps tie and the lowest index wins
        assert!(gaps.iter().all(|g| (g - best).abs() < 1e-8));
        assert_eq!(step.facet, 0);
        assert!(e.membership_residual(&step.point).abs() < 1e-12);
        let u = square.normal(0);
        assert!((step.point.dot(&u) - e.support(&u).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn refinement_stops_when_converged() {
        // a polytope refined against itself has zero gap everywhere
        let e = benchmark_ellipse();
        let hexagon = inscribe_regular(&e, 6, 0.1, Spacing::ParameterAngle).unwrap();
        let same = refine_by_support_gap(&hexagon, &hexagon, 5).unwrap();
        assert_eq!(same, hexagon);
    }

    #[test]
    fn three_dimensional_refinement_stays_inscribed() {
        let e = Ellipsoid::new(DVector::from_vec(vec![1.0, 0.0, -1.0]), DVector::from_vec(vec![2.0, 1.0, 1.5])).unwrap();
        let seed = cross_polytope_seed(&e).unwrap();
        assert_eq!(seed.facet_count(), 8);
        let p = refine_by_support_gap(&e, &seed, 20).unwrap();
        p.check_invariants().unwrap();
        assert_eq!(p.vertex_count(), 26);
        for v in p.vertices() {
            assert!(e.membership_residual(v).abs() < 1e-9);
        }
    }
}
