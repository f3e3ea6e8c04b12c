use crate::game::{BoxSet, CommGraph, CostModel, DemandResponse, Ellipsoid, UncertainGame};
use crate::polytope::{inscribe_regular, Polytope, Spacing};

pub(crate) fn benchmark_ellipse() -> Ellipsoid {
    Ellipsoid::ellipse(3.0, 2.0, 2.0, 2.0).unwrap()
}

/// Ten players, boxes `[-15, 20]^2`, ellipse `E_(3,2)(2,2)`, ring graph.
pub(crate) fn benchmark_game(budget: f64) -> UncertainGame {
    let n = 10;
    UncertainGame::new(
        vec![BoxSet::uniform(2, -15.0, 20.0).unwrap(); n],
        CostModel::DemandResponse(DemandResponse::staggered(n, 2)),
        vec![benchmark_ellipse().into(); n],
        budget,
        CommGraph::ring(n).unwrap(),
    )
    .unwrap()
}

pub(crate) fn benchmark_polys(v: usize) -> Vec<Polytope> {
    vec![inscribe_regular(&benchmark_ellipse(), v, 0.0, Spacing::ParameterAngle).unwrap(); 10]
}
