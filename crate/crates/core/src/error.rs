use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Domain,
    Solver,
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("q-exponential pole: e_q(z) with q = {q} diverges at z = {pole} (requested z = {z})")]
    Pole { q: f64, z: f64, pole: f64 },

    #[error("singular entropic index q = {q}: the transformation is undefined at q = 2 (|q - 2| < {band})")]
    SingularIndex { q: f64, band: f64 },

    #[error("x = {x} lies outside the support ({lower}, {upper})")]
    OutOfSupport { x: f64, lower: f64, upper: f64 },

    #[error("inverse Jacobian g vanishes at x = {edge}; the Jacobian is singular there")]
    EdgeSingularity { edge: f64 },

    #[error("u = {u} is outside the attained range ({lower}, {upper})")]
    Range { u: f64, lower: f64, upper: f64 },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("quadrature did not converge after {subdivisions} subdivisions: estimate {estimate}, error bound {error}")]
    Quadrature {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("integrand is not finite at x = {x}")]
    NonFiniteIntegrand { x: f64 },

    #[error("density is not normalizable: tail decays like |x|^(-{tail_exponent}) {end}")]
    NonNormalizable { tail_exponent: f64, end: &'static str },

    #[error("integral does not converge: {0}")]
    NonIntegrable(String),

    #[error("infeasible constraint targets: {0}")]
    Feasibility(String),

    #[error("multiplier solver failed: {message} (trace: {trace:?})")]
    Solver { message: String, trace: Vec<f64> },

    #[error("ODE integration unstable at x = {x}: |g| = {g}")]
    Instability { x: f64, g: f64 },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) => ErrorCategory::Config,
            Error::Domain(_)
            | Error::Pole { .. }
            | Error::SingularIndex { .. }
            | Error::OutOfSupport { .. }
            | Error::EdgeSingularity { .. }
            | Error::Range { .. }
            | Error::UnsupportedRegime(_) => ErrorCategory::Domain,
            Error::Quadrature { .. }
            | Error::NonFiniteIntegrand { .. }
            | Error::NonNormalizable { .. }
            | Error::NonIntegrable(_)
            | Error::Feasibility(_)
            | Error::Solver { .. }
            | Error::Instability { .. } => ErrorCategory::Solver,
        }
    }
}
