//! IMEX-BDF time integration of one-dimensional linear hyperbolic relaxation
//! systems `U_t + A U_x = QU/ε` on a periodic domain, discretized in space by
//! a Fourier-Galerkin method.
//!
//! The crate provides the integrator (orders 1 to 4 with IMEX Runge-Kutta
//! starting values), an exact per-mode reference, a structural-stability
//! checker, the linearized ARZ, Broadwell and Grad models, and a harness for
//! convergence studies.

// `!(x > 0.0)` is used on purpose to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod harness;
pub mod integrator;
pub mod linalg;
pub mod models;
pub mod oracle;
pub mod spectral;
pub mod system;
pub mod theory;

pub use error::{Error, Result};
pub use harness::{
    compute_error, emit_table, run_convergence_study, ConvergenceTable, ExperimentConfig,
    ReferenceKind, TableFormat,
};
pub use integrator::{bdf_coefficients, run, ArsScheme, BdfCoefficients, SolverState, Startup};
pub use linalg::{ComplexMatrix, Matrix, RealMatrix};
pub use models::{initial_data, make_arz, make_broadwell, make_grad, ModelName, ModelSpec};
pub use oracle::exact_evolve;
pub use spectral::SpectralField;
pub use system::{
    check_structural_stability, CertificateReport, RelaxationSystem, StabilityWitness,
};
