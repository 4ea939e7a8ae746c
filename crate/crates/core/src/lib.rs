//! Shannon and Tsallis maximum-entropy densities and the closed-form change of
//! variables that carries one into the other with unchanged Lagrange
//! multipliers.

pub mod averaging;
pub mod density;
pub mod error;
pub mod exec;
pub mod maxent;
pub mod poly;
pub mod qkernel;
pub mod quad;
pub mod transform;

pub use density::{Density, DensityFn};
pub use error::{Error, ErrorCategory, Result};
pub use exec::Execution;
pub use qkernel::{q_exp, q_exp_deriv, q_exp_pow, q_log, QIndex, SupportInterval};
pub use quad::{integrate, integrate_between, integrate_vec, QuadEstimate, QuadratureSpec};
pub use transform::{
    expand_g_near_q1, g_near_q2, qexp_support, ConstraintFn, ConstraintKind, ConstraintSet, TransformMap,
    TransformSpec,
};
