//! Shared fixtures for the benchmarks.

use kirchhoff_core::{threshold_c1, Model, ProblemParams};

/// Two-branch instance at 1.5 c₁ used by the flow benchmark.
pub fn two_branch_params() -> ProblemParams {
    let (a, b, n, p) = (1.0, 0.01, 3, 4.0);
    let c1 = threshold_c1(a, b, n, p).expect("admissible");
    ProblemParams::new(a, b, 1.5 * c1, n, p).expect("admissible")
}

pub fn supercritical_model() -> Model {
    Model::new(1.0, 1.0, 3, 5.0).expect("admissible")
}
