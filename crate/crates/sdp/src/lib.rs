//! Semidefinite programs over complex Hermitian matrices with trace-linear
//! constraints, bisection for max-min fractional objectives, and rank-one recovery.
//!
//! ```
//! use nalgebra::DMatrix;
//! use num_complex::Complex64;
//! use sdr_core::{solve_sdp, ConstraintMatrix, Objective, Sense, TraceLpSdp};
//!
//! let eye = DMatrix::<Complex64>::identity(2, 2);
//! let mut p = TraceLpSdp::new(2, Objective::Maximize(eye.clone()));
//! p.push(ConstraintMatrix::Dense(eye), Sense::Le, 1.0);
//! let sol = solve_sdp(&p, 1e-8).unwrap();
//! assert!((sol.objective - 1.0).abs() < 1e-6);
//! ```

mod bisect;
mod factor;
mod ipm;
mod problem;
mod solver;

pub use bisect::{bisect_levels, bisect_maxmin, Bisection, LevelFamily};
pub use factor::{hermitian_eigen, psd_factorize, rank_one_recover, Recovery};
pub use problem::{
    Constraint, ConstraintMatrix, Objective, SdpSolution, SdpStatus, Sense, SolverSettings, TraceLpSdp,
};
pub use solver::{solve_sdp, solve_sdp_with};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest supported matrix dimension.
pub const MAX_DIMENSION: usize = 512;

#[derive(Debug, thiserror::Error)]
pub enum SdpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("dimension {0} exceeds the supported maximum of 512")]
    TooLarge(usize),
    #[error("matrix is indefinite (minimum eigenvalue {0:.3e})")]
    Indefinite(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("infeasible scenario: lower bisection level {0} is infeasible")]
    InfeasibleScenario(f64),
    #[error("bisection level appears unbounded (last bracket end {0})")]
    Unbounded(f64),
}
