//! Fixtures shared by the benchmarks.

use netlwr_core::scenario::builtin;
use netlwr_core::{ConstraintBounds, FluxModel, JunctionSpec, Network, Scenario};

/// Junction, constraint bounds and initial data of a built-in scenario.
pub fn junction_problem(name: &str) -> (JunctionSpec, ConstraintBounds, Vec<f64>) {
    let s = builtin(name).expect("builtin scenario");
    let (_, spec, data) = s.junction_problem(None).expect("single junction");
    let bounds = ConstraintBounds::from_data(s.flux(), &spec, &data).expect("valid data");
    (spec, bounds, data)
}

/// A fully connected 4 x 4 junction with mixed demand and supply constraints.
pub fn dense_problem() -> (JunctionSpec, ConstraintBounds) {
    let rows = vec![
        vec![0.4, 0.1, 0.25, 0.3],
        vec![0.2, 0.3, 0.25, 0.2],
        vec![0.3, 0.2, 0.25, 0.1],
        vec![0.1, 0.4, 0.25, 0.4],
    ];
    let spec = JunctionSpec::new(&rows, &[0.4, 0.3, 0.2, 0.1]).expect("valid junction");
    let bounds = ConstraintBounds::new(vec![0.25, 0.2, 0.15, 0.25], vec![0.1, 0.25, 0.2, 0.05]).expect("valid bounds");
    (spec, bounds)
}

/// Built-in scenario with its network at `dx`.
pub fn network(name: &str, dx: f64) -> (Scenario, FluxModel, Network) {
    let s = builtin(name).and_then(|s| s.with_dx(dx)).expect("builtin scenario");
    let net = s.network().expect("network");
    let model = s.flux().clone();
    (s, model, net)
}
