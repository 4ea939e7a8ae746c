//! q-deformed exponential and logarithm.
//!
//! `e_q(z) = [1 + (1-q) z]^{1/(1-q)}` on the set where the base is positive.
//! Outside that set the Tsallis cutoff applies for `q < 1` (the value is 0),
//! while for `q > 1` the base reaching zero is a pole and is reported as an
//! error. Near `q = 1` everything routes to the ordinary `exp`/`ln`.

use std::fmt;

use crate::error::{Error, Result};

/// The entropic index together with the guard bands around `q = 1` and `q = 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QIndex {
    q: f64,
    eps_q1: f64,
    eps_q2: f64,
}

impl QIndex {
    pub const DEFAULT_EPS_Q1: f64 = 1e-9;
    pub const DEFAULT_EPS_Q2: f64 = 1e-6;

    pub fn new(q: f64) -> Result<Self> {
        Self::with_thresholds(q, Self::DEFAULT_EPS_Q1, Self::DEFAULT_EPS_Q2)
    }

    pub fn with_thresholds(q: f64, eps_q1: f64, eps_q2: f64) -> Result<Self> {
        if !q.is_finite() {
            return Err(Error::Config(format!("entropic index must be finite, got {q}")));
        }
        if !(eps_q1 > 0.0 && eps_q2 > 0.0) {
            return Err(Error::Config(format!(
                "guard thresholds must be positive, got eps_q1 = {eps_q1}, eps_q2 = {eps_q2}"
            )));
        }
        Ok(Self { q, eps_q1, eps_q2 })
    }

    /// The Boltzmann-Gibbs index `q = 1`.
    pub fn classical() -> Self {
        Self {
            q: 1.0,
            eps_q1: Self::DEFAULT_EPS_Q1,
            eps_q2: Self::DEFAULT_EPS_Q2,
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.q
    }

    /// `1 - q`, the exponent that appears in every q-deformed formula.
    #[inline]
    pub fn one_minus_q(&self) -> f64 {
        1.0 - self.q
    }

    pub fn eps_q1(&self) -> f64 {
        self.eps_q1
    }

    pub fn eps_q2(&self) -> f64 {
        self.eps_q2
    }

    #[inline]
    pub fn is_classical(&self) -> bool {
        (self.q - 1.0).abs() < self.eps_q1
    }

    #[inline]
    pub fn is_singular_for_transform(&self) -> bool {
        (self.q - 2.0).abs() < self.eps_q2
    }

    /// Errors with [`Error::SingularIndex`] inside the `q = 2` band.
    pub fn ensure_transformable(&self) -> Result<()> {
        if self.is_singular_for_transform() {
            Err(Error::SingularIndex {
                q: self.q,
                band: self.eps_q2,
            })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for QIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q = {}", self.q)
    }
}

/// An interval of the extended real line.
///
/// Finite endpoints carry an explicit open/closed flag so membership is exact
/// at a domain boundary (closed) and at a cutoff edge where the density is
/// zero (open).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportInterval {
    lower: f64,
    upper: f64,
    lower_closed: bool,
    upper_closed: bool,
}

impl SupportInterval {
    /// Open interval `(lower, upper)`; infinite endpoints are allowed.
    pub fn open(lower: f64, upper: f64) -> Result<Self> {
        Self::new(lower, upper, false, false)
    }

    /// `[lower, upper]` with closedness ignored at infinite endpoints.
    pub fn closed(lower: f64, upper: f64) -> Result<Self> {
        Self::new(lower, upper, true, true)
    }

    pub fn new(lower: f64, upper: f64, lower_closed: bool, upper_closed: bool) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || !(lower < upper) {
            return Err(Error::Config(format!(
                "support interval needs lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Self {
            lower,
            upper,
            lower_closed: lower_closed && lower.is_finite(),
            upper_closed: upper_closed && upper.is_finite(),
        })
    }

    pub fn real_line() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            lower_closed: false,
            upper_closed: false,
        }
    }

    /// `[0, +inf)`.
    pub fn half_line() -> Self {
        Self {
            lower: 0.0,
            upper: f64::INFINITY,
            lower_closed: true,
            upper_closed: false,
        }
    }

    #[inline]
    pub fn lower(&self) -> f64 {
        self.lower
    }

    #[inline]
    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn lower_closed(&self) -> bool {
        self.lower_closed
    }

    pub fn upper_closed(&self) -> bool {
        self.upper_closed
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lower_closed {
            x >= self.lower
        } else {
            x > self.lower
        };
        let below = if self.upper_closed {
            x <= self.upper
        } else {
            x < self.upper
        };
        above && below
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    /// Intersection, or `None` when it is empty or degenerate.
    pub fn intersect(&self, other: &SupportInterval) -> Option<SupportInterval> {
        let (lower, lower_closed) = if self.lower > other.lower {
            (self.lower, self.lower_closed)
        } else if other.lower > self.lower {
            (other.lower, other.lower_closed)
        } else {
            (self.lower, self.lower_closed && other.lower_closed)
        };
        let (upper, upper_closed) = if self.upper < other.upper {
            (self.upper, self.upper_closed)
        } else if other.upper < self.upper {
            (other.upper, other.upper_closed)
        } else {
            (self.upper, self.upper_closed && other.upper_closed)
        };
        SupportInterval::new(lower, upper, lower_closed, upper_closed).ok()
    }
}

impl fmt::Display for SupportInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lower_closed { '[' } else { '(' };
        let r = if self.upper_closed { ']' } else { ')' };
        write!(f, "{l}{}, {}{r}", self.lower, self.upper)
    }
}

/// `ln e_q(z)` where the base is positive; `None` past the support edge.
fn ln_q_exp(z: f64, q: QIndex) -> Option<f64> {
    if q.is_classical() {
        return Some(z);
    }
    let a = q.one_minus_q() * z;
    if a > -1.0 {
        Some(a.ln_1p() / q.one_minus_q())
    } else {
        None
    }
}

fn pole_error(z: f64, q: QIndex) -> Error {
    Error::Pole {
        q: q.value(),
        z,
        pole: 1.0 / (q.value() - 1.0),
    }
}

/// q-exponential `e_q(z)`.
pub fn q_exp(z: f64, q: QIndex) -> Result<f64> {
    q_exp_pow(z, q, 1.0)
}

/// `e_q(z)^power`, evaluated in log space so large and fractional powers stay
/// accurate near the cutoff edge.
pub fn q_exp_pow(z: f64, q: QIndex, power: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("q_exp argument must be finite, got {z}")));
    }
    match ln_q_exp(z, q) {
        Some(l) => Ok((power * l).exp()),
        None if q.value() < 1.0 => Ok(0f64.powf(power)),
        None => Err(pole_error(z, q)),
    }
}

/// Inverse of [`q_exp`] on its support: `(y^{1-q} - 1)/(1-q)`.
pub fn q_log(y: f64, q: QIndex) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::Domain(format!("q_log needs a positive finite argument, got {y}")));
    }
    if q.is_classical() {
        return Ok(y.ln());
    }
    let a = q.one_minus_q();
    Ok((a * y.ln()).exp_m1() / a)
}

/// `d e_q(z)/dz = e_q(z)^q`. Zero outside the support for `q < 1`, where `e_q`
/// is identically zero.
pub fn q_exp_deriv(z: f64, q: QIndex) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("q_exp argument must be finite, got {z}")));
    }
    match ln_q_exp(z, q) {
        Some(l) => Ok((q.value() * l).exp()),
        None if q.value() < 1.0 => Ok(0.0),
        None => Err(pole_error(z, q)),
    }
}
