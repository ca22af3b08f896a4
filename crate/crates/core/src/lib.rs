//! Nonlocal Poisson problems on an interval with volume constraints: kernels,
//! piecewise-constant Galerkin assembly, solvers, and continuous-dependence audits.

// `!(x > 0)`-style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discretize;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod identities;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod scalar;
pub mod solve;
pub mod stability;
pub mod twopoint;

pub use domain::{DomainSpec, Interval, Region};
pub use error::{Error, Result};
pub use kernels::{BondMode, KernelFamily, KernelSpec, KernelStats, NormalizedKernel};
pub use scalar::Scalar;
pub use twopoint::TwoPoint;
pub use discretize::{assemble, build_mesh, AssembledOperator, Field, Mesh};
pub use linalg::{DenseMatrix, Lu};
pub use solve::{
    solve_linear, solve_semilinear, CollarData, ForcingSpec, IterationMethod, LinearSystem, ProblemSpec,
    SemilinearOptions, SemilinearSolution,
};
pub use stability::{
    field_norm, poincare_constant, AuditContext, BoundReport, Estimate, HypothesisCheck, KernelVariant, Verdict,
};
pub use experiments::{emit_tables, run_preset, ExperimentResult, Overrides, Preset, PresetId};

pub type Field64 = Field<f64>;
pub type Mesh64 = Mesh<f64>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type DomainSpec64 = DomainSpec<f64>;
pub type ProblemSpec64 = ProblemSpec<f64>;
pub type BoundReport64 = BoundReport<f64>;
