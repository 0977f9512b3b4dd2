//! Normalized solutions of the Kirchhoff equation
//! `-(a + b‖∇u‖₂²)Δu + (V + λ)u = |u|^{p-2}u`, `‖u‖₂² = c²`.
//!
//! Regime classification, the Gagliardo-Nirenberg optimizer, the explicit
//! solution of the potential-free problem, radial quadrature, potential
//! hypotheses and bounds, and a normalized gradient flow.

pub mod error;
pub mod flow;
pub mod limit;
pub mod potential;
pub mod profile;
pub mod quadrature;
pub mod regimes;
pub mod report;
pub mod verify;

pub use error::{Error, ErrorKind, Result};
pub use flow::{default_initial, gaussian_initial, normalized_gradient_flow, FlowSchedule, FlowState};
pub use limit::{
    b_limit_check, build_solution, energy_ratio_check, fold_point, pohozaev_nehari_residuals,
    root_equation_solve, solve, sweep, BifurcationRow, BifurcationTable, Branch, FoldPoint, LimitBranch,
};
pub use potential::{
    dilation_path_bound, parse_potential, potential_pohozaev, sobolev_constant, validate_v1, validate_v2,
    validate_v5, HypothesisReport, PotentialSpec,
};
pub use profile::{
    gn_best_constant, qp_from_standard, qp_l2_norm, qp_profile, shoot_ground_state,
    standard_ground_state, GroundState, QpProfile, ShootingConfig,
};
pub use quadrature::{FunctionalValue, Norms, PdeResidual, RadialField};
pub use regimes::{
    classify, classify_model, derived_exponents, threshold_c0, threshold_c1, DerivedExponents,
    Model, ProblemParams, Regime, RegimeTag,
};
pub use verify::{verify_instance, Tolerances, VerifyReport};
