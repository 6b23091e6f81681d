//! Admissible speeds and profiles of traveling wavefronts for
//! `rho_t + f(rho)_x = (D(rho) rho_x)_x + g(rho)` when the diffusivity `D`
//! changes sign at `alpha` and the reaction `g` is bistable with interior
//! zero `gamma`.
//!
//! The profile equation is reduced through `z(phi) = D(phi) phi'` to
//! singular first-order problems whose solvability thresholds are found by
//! shooting and bisection.

pub mod coeffs;
pub mod conditions;
pub mod error;
pub mod golden;
pub mod numerics;
pub mod problem_file;
pub mod profile;
pub mod report;
pub mod scalar;
pub mod singular;
pub mod speeds;
pub mod thresholds;

pub use coeffs::{
    difference_quotient_sup, dini_estimate, parse_expression, validate_problem, CoefficientSet,
    DiniValue, Expr, Formula, Func, Function, Side, Kind, ValidationReport,
};
pub use error::{Error, Result};
pub use profile::{
    classify_at_alpha, extract_z, insert_plateau, reconstruct_profile, residual, ProfileCurve,
    SharpnessClass,
};
pub use singular::{
    compute_beta, compute_cstar, indicial_slopes, solve_zeta, SingularProblem, Transform, ZCurve,
};
pub use problem_file::ProblemFile;
pub use speeds::{admissible_speeds, direct_z, solve_c1star, solve_z_for_speed, GluedZ, SpeedReport, SpeedSet};
pub use thresholds::{compute_named_thresholds, threshold_bounds, ThresholdId, ThresholdSet};

/// Expression over double precision, the scalar every solver works in.
pub type Expression = Expr<f64>;
/// Expression over single precision, for evaluation only.
pub type Expression32 = Expr<f32>;

/// Solver knobs shared by every module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Bisection tolerance on speeds.
    pub tol: f64,
    /// Relative tolerance of the embedded Runge-Kutta pair.
    pub ode_rtol: f64,
    /// Factor multiplying `max |q|^(1/2)` to decide `z(sigma1) = 0`.
    pub zero_factor: f64,
    /// Uniform grid used for assumption checks and suprema.
    pub grid: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-6, ode_rtol: 1e-9, zero_factor: 1e-7, grid: 2048 }
    }
}
