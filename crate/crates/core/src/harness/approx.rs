use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::game::{Ellipsoid, SupportFunction};
use crate::polytope::{
    approx_metrics, cross_polytope_seed, inscribe_regular, refine_by_support_gap, ApproxMetrics, Polytope, Spacing,
};

/// What `approx` builds: a regular polygon, a refinement, or both (the
/// polygon, or the cross-polytope outside the plane, seeds the refinement).
#[derive(Clone, Debug)]
pub struct ApproxRequest {
    pub ellipsoid: Ellipsoid,
    pub vertices: Option<usize>,
    pub refine_steps: usize,
    pub phase: f64,
    pub spacing: Spacing,
    pub reference_vertices: usize,
    pub samples: usize,
}

impl ApproxRequest {
    pub fn new(ellipsoid: Ellipsoid) -> Self {
        Self {
            ellipsoid,
            vertices: None,
            refine_steps: 0,
            phase: 0.0,
            spacing: Spacing::ParameterAngle,
            reference_vertices: 128,
            samples: 4096,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ApproxOutcome {
    pub polytope: Polytope,
    pub reference: Polytope,
    pub metrics: ApproxMetrics,
}

impl ApproxOutcome {
    pub fn metrics_text(&self) -> String {
        let m = &self.metrics;
        let mut s = String::new();
        let _ = writeln!(s, "facets = {}", m.facet_count);
        let _ = writeln!(s, "vertices = {}", self.polytope.vertex_count());
        let _ = writeln!(s, "hausdorff = {:e}", m.hausdorff);
        let _ = writeln!(s, "theta = {:e}", m.max_angle);
        let _ = writeln!(s, "reference_facets = {}", self.reference.facet_count());
        let _ = writeln!(s, "curvature = {:e}", m.curvature);
        s
    }
}

pub fn build_approx(req: &ApproxRequest) -> Result<ApproxOutcome> {
    let e = &req.ellipsoid;
    let planar = e.dim() == 2;
    let seed = match (req.vertices, planar) {
        (Some(v), true) => inscribe_regular(e, v, req.phase, req.spacing)?,
        (None, true) => inscribe_regular(e, 4, req.phase, req.spacing)?,
        (Some(_), false) => {
            return Err(Error::InvalidArgument("vertex counts apply to planar ellipses; use refine steps".into()))
        }
        (None, false) => cross_polytope_seed(e)?,
    };
    let polytope = refine_by_support_gap(e, &seed, req.refine_steps)?;
    let reference = if planar {
        inscribe_regular(e, req.reference_vertices, req.phase, req.spacing)?
    } else {
        refine_by_support_gap(e, &cross_polytope_seed(e)?, req.reference_vertices.max(req.refine_steps))?
    };
    let samples = req.samples.max(8 * polytope.facet_count());
    let metrics = approx_metrics(e, &polytope, &reference, samples, None)?;
    Ok(ApproxOutcome { polytope, reference, metrics })
}

/// Builds the approximation and writes `polytope.txt` and `metrics.txt` into `out`.
pub fn cmd_approx(req: &ApproxRequest, out: &Path) -> Result<ApproxOutcome> {
    let outcome = build_approx(req)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("polytope.txt"), outcome.polytope.to_text())?;
    fs::write(out.join("metrics.txt"), outcome.metrics_text())?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn square_of_the_benchmark_ellipse() {
        let mut req = ApproxRequest::new(Ellipsoid::ellipse(3.0, 2.0, 2.0, 2.0).unwrap());
        req.vertices = Some(4);
        let o = build_approx(&req).unwrap();
        let mut v: Vec<(f64, f64)> = o.polytope.vertices().iter().map(|p| (p[0], p[1])).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [(-1.0, 2.0), (2.0, 0.0), (2.0, 4.0), (5.0, 2.0)];
        for (g, w) in v.iter().zip(want) {
            assert!((g.0 - w.0).abs() < 1e-12 && (g.1 - w.1).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_beats_the_square_tenfold() {
        let e = Ellipsoid::ellipse(3.0, 2.0, 2.0, 2.0).unwrap();
        let mut req = ApproxRequest::new(e);
        req.vertices = Some(4);
        let square = build_approx(&req).unwrap();
        req.refine_steps = 60;
        let refined = build_approx(&req).unwrap();
        assert!(refined.metrics.hausdorff * 10.0 <= square.metrics.hausdorff);
    }

    #[test]
    fn vertex_counts_are_planar_only() {
        let e = Ellipsoid::new(DVector::zeros(3), DVector::from_element(3, 1.0)).unwrap();
        let mut req = ApproxRequest::new(e);
        req.vertices = Some(6);
        assert!(build_approx(&req).is_err());
        req.vertices = None;
        req.refine_steps = 3;
        req.reference_vertices = 10;
        let o = build_approx(&req).unwrap();
        assert_eq!(o.polytope.vertex_count(), 9);
    }
}
