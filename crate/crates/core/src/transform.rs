//! The map between the Shannon variable `u` and the Tsallis variable `x`.
//!
//! With `dx/du = g(x)` and multipliers carried over unchanged, the
//! inverse Jacobian linking `C e_q(-λ·h(x)) dx` and `e^{-μ} e^{-λ·h(u)} du` is
//!
//! ```text
//! g(x) = e_q(-λ·h)^{-1} [ e_q(-λ·h)^{2-q} / (2-q) + c ]
//! ```
//!
//! and the choice `c = 0` (forced by `g -> 1` as `q -> 1`) collapses it to
//! `g(x) = (1 - (1-q) λ·h(x)) / (2-q)`. The Jacobian is `J = 1/g`.

use std::fmt;
use std::str::FromStr;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::qkernel::{q_exp_pow, QIndex, SupportInterval};
use crate::quad::{integrate, integrate_between, QuadratureSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    Identity,
    Square,
    /// Coefficients in ascending order.
    Polynomial(Vec<f64>),
}

/// An observable `h(x)` whose mean is constrained, with its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintFn {
    kind: ConstraintKind,
    poly: Polynomial,
    deriv: Polynomial,
}

impl ConstraintFn {
    pub fn identity() -> Self {
        Self::from_parts(ConstraintKind::Identity, Polynomial::new(vec![0.0, 1.0]))
    }

    pub fn square() -> Self {
        Self::from_parts(ConstraintKind::Square, Polynomial::new(vec![0.0, 0.0, 1.0]))
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config(format!(
                "polynomial constraint needs finite coefficients, got {coeffs:?}"
            )));
        }
        let poly = Polynomial::new(coeffs.clone());
        Ok(Self::from_parts(ConstraintKind::Polynomial(coeffs), poly))
    }

    fn from_parts(kind: ConstraintKind, poly: Polynomial) -> Self {
        let deriv = poly.derivative();
        Self { kind, poly, deriv }
    }

    pub fn kind(&self) -> &ConstraintKind {
        &self.kind
    }

    pub fn as_polynomial(&self) -> &Polynomial {
        &self.poly
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.poly.eval(x)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        self.deriv.eval(x)
    }

    /// `∫ p h^2` over the support of `p`; fails when that integral diverges.
    pub fn square_integral(&self, p: &dyn Density, quad: &QuadratureSpec) -> Result<f64> {
        integrate(
            |x| {
                let h = self.value(x);
                let v = p.pdf(x);
                if v == 0.0 {
                    0.0
                } else {
                    v * h * h
                }
            },
            &p.support(),
            quad,
        )
        .map_err(|e| Error::NonIntegrable(format!("h = {self} is not square integrable: {e}")))
    }
}

impl fmt::Display for ConstraintFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ConstraintKind::Identity => write!(f, "identity"),
            ConstraintKind::Square => write!(f, "square"),
            ConstraintKind::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for ConstraintFn {
    type Err = Error;

    /// Accepts `identity`, `square`, or `poly:c0,c1,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "identity" | "x" => Ok(Self::identity()),
            "square" | "x2" | "x^2" => Ok(Self::square()),
            _ => {
                let body = s.strip_prefix("poly:").ok_or_else(|| {
                    Error::Config(format!(
                        "unknown constraint {s:?}; expected identity, square or poly:c0,c1,..."
                    ))
                })?;
                let coeffs = body
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("bad polynomial coefficient {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::polynomial(coeffs)
            }
        }
    }
}

/// The constraint vector `h = (h_1..h_M)` with multipliers `λ` and optional
/// target means `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    constraints: Vec<ConstraintFn>,
    multipliers: Vec<f64>,
    targets: Option<Vec<f64>>,
    combined: Polynomial,
    combined_deriv: Polynomial,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<ConstraintFn>, multipliers: Vec<f64>) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::Config("at least one constraint is required".into()));
        }
        if constraints.len() != multipliers.len() {
            return Err(Error::Config(format!(
                "{} constraints but {} multipliers",
                constraints.len(),
                multipliers.len()
            )));
        }
        if multipliers.iter().any(|l| !l.is_finite()) {
            return Err(Error::Config(format!("multipliers must be finite, got {multipliers:?}")));
        }
        let combined = constraints
            .iter()
            .zip(&multipliers)
            .fold(Polynomial::constant(0.0), |acc, (h, l)| acc.add(&h.poly.scaled(*l)));
        let combined_deriv = combined.derivative();
        Ok(Self {
            constraints,
            multipliers,
            targets: None,
            combined,
            combined_deriv,
        })
    }

    pub fn single(h: ConstraintFn, lambda: f64) -> Result<Self> {
        Self::new(vec![h], vec![lambda])
    }

    pub fn with_targets(mut self, targets: Vec<f64>) -> Result<Self> {
        if targets.len() != self.constraints.len() {
            return Err(Error::Config(format!(
                "{} constraints but {} targets",
                self.constraints.len(),
                targets.len()
            )));
        }
        if targets.iter().any(|k| !k.is_finite()) {
            return Err(Error::Config(format!("targets must be finite, got {targets:?}")));
        }
        self.targets = Some(targets);
        Ok(self)
    }

    /// Same observables and targets with new multipliers.
    pub fn with_multipliers(&self, multipliers: Vec<f64>) -> Result<Self> {
        let mut cs = Self::new(self.constraints.clone(), multipliers)?;
        cs.targets = self.targets.clone();
        Ok(cs)
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[ConstraintFn] {
        &self.constraints
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    pub fn targets(&self) -> Option<&[f64]> {
        self.targets.as_deref()
    }

    /// `λ·h` as a single polynomial.
    pub fn combined(&self) -> &Polynomial {
        &self.combined
    }

    /// `λ·h(x)`.
    #[inline]
    pub fn dot(&self, x: f64) -> f64 {
        self.combined.eval(x)
    }

    /// `λ·h'(x)`.
    #[inline]
    pub fn dot_deriv(&self, x: f64) -> f64 {
        self.combined_deriv.eval(x)
    }

    pub fn same_observables(&self, other: &ConstraintSet) -> bool {
        self.constraints == other.constraints
    }
}

/// `1 - (1-q) λ·h` as a polynomial; positive exactly on the q-support.
fn base_polynomial(q: QIndex, cs: &ConstraintSet) -> Polynomial {
    Polynomial::constant(1.0).add(&cs.combined().scaled(-q.one_minus_q()))
}

/// Maximal open interval around `anchor_x` on which `1 - (1-q) λ·h(x) > 0`.
pub fn qexp_support(q: QIndex, cs: &ConstraintSet, anchor_x: f64) -> Result<SupportInterval> {
    if !anchor_x.is_finite() {
        return Err(Error::Config(format!("anchor must be finite, got {anchor_x}")));
    }
    if q.is_classical() {
        return Ok(SupportInterval::real_line());
    }
    let base = base_polynomial(q, cs);
    if !(base.eval(anchor_x) > 0.0) {
        return Err(Error::Config(format!(
            "anchor x = {anchor_x} is outside the support of e_q(-λ·h) for {q}"
        )));
    }
    let roots = base.real_roots();
    let lower = roots
        .iter()
        .copied()
        .filter(|&r| r < anchor_x)
        .fold(f64::NEG_INFINITY, f64::max);
    let upper = roots
        .iter()
        .copied()
        .filter(|&r| r > anchor_x)
        .fold(f64::INFINITY, f64::min);
    SupportInterval::open(lower, upper)
}

/// First-order expansion of `g` at `q = 1 - eps` for `h = x`: `1 - (1 + λx) eps`.
/// Meant for `|eps| < 0.5`.
pub fn expand_g_near_q1(x: f64, lambda: f64, eps: f64) -> f64 {
    1.0 - (1.0 + lambda * x) * eps
}

/// `g` at `q = 2 - eps` for `h = x`: `(1 + (1-eps) λx)/eps`, written as the
/// divergent part `(1 + λx)/eps` minus the finite remainder `λx`.
pub fn g_near_q2(x: f64, lambda: f64, eps: f64) -> Result<f64> {
    if eps == 0.0 {
        return Err(Error::SingularIndex { q: 2.0, band: 0.0 });
    }
    Ok((1.0 + lambda * x) / eps - lambda * x)
}

/// Everything that defines one Shannon-Tsallis map.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpec {
    q: QIndex,
    cs: ConstraintSet,
    c: f64,
    anchor_x: f64,
    anchor_u: f64,
    support: SupportInterval,
}

impl TransformSpec {
    /// Spec with `c = 0` and anchor `u(0) = 0`.
    pub fn new(q: QIndex, cs: ConstraintSet) -> Result<Self> {
        q.ensure_transformable()?;
        let support = qexp_support(q, &cs, 0.0)?;
        Ok(Self {
            q,
            cs,
            c: 0.0,
            anchor_x: 0.0,
            anchor_u: 0.0,
            support,
        })
    }

    pub fn with_anchor(mut self, anchor_x: f64, anchor_u: f64) -> Result<Self> {
        if !anchor_u.is_finite() {
            return Err(Error::Config(format!("anchor u must be finite, got {anchor_u}")));
        }
        self.support = qexp_support(self.q, &self.cs, anchor_x)?;
        self.anchor_x = anchor_x;
        self.anchor_u = anchor_u;
        Ok(self)
    }

    /// Integration constant of the general solution; only `c = 0` gives
    /// `g -> 1` in the classical limit.
    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn q(&self) -> QIndex {
        self.q
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.cs
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn anchor(&self) -> (f64, f64) {
        (self.anchor_x, self.anchor_u)
    }

    pub fn support(&self) -> SupportInterval {
        self.support
    }

    fn two_minus_q(&self) -> f64 {
        2.0 - self.q.value()
    }

    fn require_interior(&self, x: f64) -> Result<()> {
        if self.support.contains_interior(x) {
            Ok(())
        } else {
            Err(Error::OutOfSupport {
                x,
                lower: self.support.lower(),
                upper: self.support.upper(),
            })
        }
    }

    /// `g(x) = (1 - (1-q) λ·h(x)) / (2-q)`. Defined for every `x`, and zero
    /// at a finite support edge.
    #[inline]
    pub fn g_canonical(&self, x: f64) -> f64 {
        (1.0 - self.q.one_minus_q() * self.cs.dot(x)) / self.two_minus_q()
    }

    /// `dg/dx` of [`TransformSpec::g_canonical`].
    #[inline]
    pub fn g_canonical_slope(&self, x: f64) -> f64 {
        -self.q.one_minus_q() * self.cs.dot_deriv(x) / self.two_minus_q()
    }

    /// General solution `e_q(-λ·h)^{-1} [e_q(-λ·h)^{2-q}/(2-q) + c]` with the
    /// spec's `c`; `1 + c e^{λ·h}` in the classical limit.
    pub fn g_general(&self, x: f64) -> Result<f64> {
        self.require_interior(x)?;
        let s = self.cs.dot(x);
        if self.q.is_classical() {
            return Ok(1.0 + self.c * s.exp());
        }
        // e^{2-q}/e = e^{1-q} = 1 - (1-q)s, which keeps c = 0 exact far out
        let head = (1.0 - self.q.one_minus_q() * s) / self.two_minus_q();
        if self.c == 0.0 {
            return Ok(head);
        }
        Ok(head + self.c * q_exp_pow(-s, self.q, -1.0)?)
    }

    /// `J(x) = 1/g(x)` with the canonical `g`.
    pub fn jacobian(&self, x: f64) -> Result<f64> {
        let g = self.g_canonical(x);
        if g == 0.0 {
            Err(Error::EdgeSingularity { edge: x })
        } else {
            Ok(1.0 / g)
        }
    }

    /// Residual of `g' - e_q(-λ·h)^{q-1} (λ·h') g + λ·h' = 0` for a candidate
    /// value and slope of `g` at `x`.
    pub fn ode_residual(&self, x: f64, g_value: f64, g_slope: f64) -> Result<f64> {
        self.require_interior(x)?;
        let s = self.cs.dot(x);
        let ds = self.cs.dot_deriv(x);
        let drift = q_exp_pow(-s, self.q, self.q.value() - 1.0)?;
        Ok(g_slope - drift * ds * g_value + ds)
    }

    /// Points in `(min(a,b), max(a,b))` where the general `g` vanishes; the one
    /// closest to `a` is returned. Never fires for `c = 0`.
    fn g_zero_between(&self, a: f64, b: f64) -> Option<f64> {
        if self.c == 0.0 {
            return None;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let level = if self.q.is_classical() {
            // 1 + c e^{s} = 0  <=>  s = ln(-1/c)
            if self.c >= 0.0 {
                return None;
            }
            self.cs.combined().add(&Polynomial::constant(-(-1.0 / self.c).ln()))
        } else {
            // f^{(2-q)/(1-q)} = -c (2-q) with f = 1 - (1-q) s
            let rhs = -self.c * self.two_minus_q();
            if rhs <= 0.0 {
                return None;
            }
            let f_star = rhs.powf(self.q.one_minus_q() / self.two_minus_q());
            base_polynomial(self.q, &self.cs).add(&Polynomial::constant(-f_star))
        };
        level
            .real_roots()
            .into_iter()
            .filter(|&r| r > lo && r < hi)
            .min_by(|x, y| (x - a).abs().total_cmp(&(y - a).abs()))
    }
}

/// Evaluators for `g`, `J`, `u(x)` and `x(u)` built from a validated spec.
#[derive(Debug, Clone)]
pub struct TransformMap {
    spec: TransformSpec,
    quad: QuadratureSpec,
    orientation: f64,
}

impl TransformMap {
    pub fn new(spec: TransformSpec, quad: QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        let g0 = if spec.c == 0.0 {
            spec.g_canonical(spec.anchor_x)
        } else {
            spec.g_general(spec.anchor_x)?
        };
        if g0 == 0.0 || !g0.is_finite() {
            return Err(Error::EdgeSingularity { edge: spec.anchor_x });
        }
        Ok(Self {
            orientation: g0.signum(),
            spec,
            quad,
        })
    }

    pub fn spec(&self) -> &TransformSpec {
        &self.spec
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quad
    }

    /// `+1` when `u` increases with `x`, `-1` when it decreases (`q > 2`).
    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn support(&self) -> SupportInterval {
        self.spec.support
    }

    fn closed_form(&self) -> bool {
        self.spec.c == 0.0 && self.spec.cs.combined().degree() <= 1
    }

    /// `g(x)`; the canonical form when `c = 0`, else the general one.
    pub fn g(&self, x: f64) -> Result<f64> {
        if self.spec.c == 0.0 {
            let s = self.spec.support;
            if x < s.lower() || x > s.upper() {
                return Err(Error::OutOfSupport {
                    x,
                    lower: s.lower(),
                    upper: s.upper(),
                });
            }
            Ok(self.spec.g_canonical(x))
        } else {
            self.spec.g_general(x)
        }
    }

    pub fn jacobian(&self, x: f64) -> Result<f64> {
        let g = self.g(x)?;
        if g == 0.0 {
            Err(Error::EdgeSingularity { edge: x })
        } else {
            Ok(1.0 / g)
        }
    }

    fn jacobian_unchecked(&self, x: f64) -> f64 {
        if self.spec.c == 0.0 {
            1.0 / self.spec.g_canonical(x)
        } else {
            self.spec.g_general(x).map_or(f64::NAN, |g| 1.0 / g)
        }
    }

    /// Parameters of the linear case: `(f0, a)` with `f(x) = f0 - a (x - x0)`.
    fn linear_parts(&self) -> (f64, f64) {
        let x0 = self.spec.anchor_x;
        let f0 = 1.0 - self.spec.q.one_minus_q() * self.spec.cs.dot(x0);
        let slope = self.spec.cs.combined().coeffs().get(1).copied().unwrap_or(0.0);
        (f0, self.spec.q.one_minus_q() * slope)
    }

    /// `u(x) = u0 + ∫_{x0}^{x} J`, in closed form when `λ·h` is linear and
    /// `c = 0`, by quadrature otherwise.
    pub fn u_of_x(&self, x: f64) -> Result<f64> {
        let spec = &self.spec;
        let (x0, u0) = (spec.anchor_x, spec.anchor_u);
        if !spec.support.contains_interior(x) {
            if x == spec.support.lower() || x == spec.support.upper() {
                return Err(Error::EdgeSingularity { edge: x });
            }
            return Err(Error::OutOfSupport {
                x,
                lower: spec.support.lower(),
                upper: spec.support.upper(),
            });
        }
        if spec.q.is_classical() && spec.c == 0.0 {
            return Ok(x - x0 + u0);
        }
        if self.closed_form() {
            let (f0, a) = self.linear_parts();
            let tmq = spec.two_minus_q();
            if a == 0.0 {
                return Ok(u0 + tmq * (x - x0) / f0);
            }
            return Ok(u0 - tmq / a * (-a * (x - x0) / f0).ln_1p());
        }
        if let Some(edge) = spec.g_zero_between(x0, x) {
            return Err(Error::EdgeSingularity { edge });
        }
        Ok(u0 + integrate_between(|t| self.jacobian_unchecked(t), x0, x, &self.quad)?)
    }

    /// Inverse of [`TransformMap::u_of_x`].
    pub fn x_of_u(&self, u: f64) -> Result<f64> {
        let spec = &self.spec;
        let (x0, u0) = (spec.anchor_x, spec.anchor_u);
        if !u.is_finite() {
            return Err(Error::Range {
                u,
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
            });
        }
        if u == u0 {
            return Ok(x0);
        }
        let x = if spec.q.is_classical() && spec.c == 0.0 {
            u - u0 + x0
        } else if self.closed_form() {
            let (f0, a) = self.linear_parts();
            let tmq = spec.two_minus_q();
            if a == 0.0 {
                x0 + (u - u0) * f0 / tmq
            } else {
                x0 - f0 / a * (-a * (u - u0) / tmq).exp_m1()
            }
        } else {
            return self.x_of_u_numeric(u);
        };
        if x.is_finite() && spec.support.contains_interior(x) {
            Ok(x)
        } else {
            Err(Error::Range {
                u,
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
            })
        }
    }

    fn x_of_u_numeric(&self, u: f64) -> Result<f64> {
        let spec = &self.spec;
        let (x0, u0) = (spec.anchor_x, spec.anchor_u);
        let du_sign = (u - u0).signum();
        let dir = du_sign * self.orientation;
        let edge = if dir > 0.0 {
            spec.support.upper()
        } else {
            spec.support.lower()
        };
        let barrier = spec
            .g_zero_between(x0, if edge.is_finite() { edge } else { dir * 1e300 })
            .unwrap_or(edge);
        let range_err = |reached: f64| {
            let (lower, upper) = if du_sign > 0.0 {
                (f64::NEG_INFINITY, reached)
            } else {
                (reached, f64::INFINITY)
            };
            Error::Range { u, lower, upper }
        };

        // walk outward from the anchor until u is bracketed
        let (mut a, mut ua) = (x0, u0);
        let mut step = if barrier.is_finite() {
            0.5 * (barrier - x0).abs()
        } else {
            0.5 * x0.abs().max(1.0)
        };
        let (b, ub) = loop {
            let b = if barrier.is_finite() {
                a + dir * step.min(0.5 * (barrier - a).abs())
            } else {
                a + dir * step
            };
            if b == a || !b.is_finite() || b.abs() > 1e15 {
                return Err(range_err(ua));
            }
            let ub = ua + integrate_between(|t| self.jacobian_unchecked(t), a, b, &self.quad)?;
            if (ub - u) * du_sign >= 0.0 {
                break (b, ub);
            }
            a = b;
            ua = ub;
            step *= 2.0;
        };

        // safeguarded Newton on F(x) = ua + ∫_a^x J - u, with F(a) and F(b) of
        // opposite signs
        let residual = |x: f64| -> Result<f64> {
            Ok(ua + integrate_between(|t| self.jacobian_unchecked(t), a, x, &self.quad)? - u)
        };
        let tol = 1e-12 * u.abs().max(1.0);
        let (mut neg, mut pos) = if ua - u < 0.0 { (a, b) } else { (b, a) };
        let mut x = a + (b - a) * (u - ua) / (ub - ua);
        if !(x > a.min(b) && x < a.max(b)) {
            x = 0.5 * (a + b);
        }
        for _ in 0..200 {
            let fx = residual(x)?;
            if fx.abs() <= tol {
                return Ok(x);
            }
            if fx < 0.0 {
                neg = x;
            } else {
                pos = x;
            }
            let (lo, hi) = (neg.min(pos), neg.max(pos));
            if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
                return Ok(x);
            }
            let newton = x - fx / self.jacobian_unchecked(x);
            x = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Err(Error::Solver {
            message: format!("x(u) did not converge for u = {u}"),
            trace: vec![neg, pos],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn qi(q: f64) -> QIndex {
        QIndex::new(q).unwrap()
    }

    fn spec_h(q: f64, lambda: f64, h: ConstraintFn) -> TransformSpec {
        TransformSpec::new(qi(q), ConstraintSet::single(h, lambda).unwrap()).unwrap()
    }

    fn spec_x(q: f64, lambda: f64) -> TransformSpec {
        spec_h(q, lambda, ConstraintFn::identity())
    }

    fn map(spec: TransformSpec) -> TransformMap {
        TransformMap::new(spec, QuadratureSpec::default()).unwrap()
    }

    #[test]
    fn constraint_parsing() {
        assert_eq!("identity".parse::<ConstraintFn>().unwrap(), ConstraintFn::identity());
        assert_eq!("square".parse::<ConstraintFn>().unwrap(), ConstraintFn::square());
        let p: ConstraintFn = "poly:1,0,-2".parse().unwrap();
        assert_eq!(p.value(2.0), 1.0 - 8.0);
        assert_eq!(p.derivative(2.0), -8.0);
        assert_eq!(p.to_string(), "poly:1,0,-2");
        assert!("cube".parse::<ConstraintFn>().is_err());
        assert!("poly:1,a".parse::<ConstraintFn>().is_err());
    }

    #[test]
    fn constraint_derivative_matches_finite_difference() {
        let hs = [
            ConstraintFn::identity(),
            ConstraintFn::square(),
            ConstraintFn::polynomial(vec![0.3, -1.0, 0.5, 0.25]).unwrap(),
        ];
        let step = 1e-5;
        for h in &hs {
            for i in 0..40 {
                let x = -2.0 + 0.1 * i as f64 + 0.013;
                let fd = (h.value(x + step) - h.value(x - step)) / (2.0 * step);
                let d = h.derivative(x);
                assert!((fd - d).abs() <= 1e-8 * d.abs().max(1.0), "{h} at {x}");
            }
        }
    }

    #[test]
    fn constraint_set_shape_checks() {
        assert!(ConstraintSet::new(vec![], vec![]).is_err());
        assert!(ConstraintSet::new(vec![ConstraintFn::identity()], vec![1.0, 2.0]).is_err());
        let cs = ConstraintSet::single(ConstraintFn::identity(), 1.0).unwrap();
        assert!(cs.clone().with_targets(vec![1.0, 2.0]).is_err());
        assert_eq!(cs.with_targets(vec![2.0]).unwrap().targets(), Some(&[2.0][..]));
    }

    #[test]
    fn support_examples() {
        let cs = ConstraintSet::single(ConstraintFn::identity(), 1.0).unwrap();
        let s = qexp_support(qi(0.5), &cs, 0.0).unwrap();
        assert_eq!((s.lower(), s.upper()), (f64::NEG_INFINITY, 2.0));
        let s = qexp_support(qi(1.0), &cs, 0.0).unwrap();
        assert_eq!(s, SupportInterval::real_line());
        let s = qexp_support(qi(1.5), &cs, 0.0).unwrap();
        assert_eq!((s.lower(), s.upper()), (-2.0, f64::INFINITY));
        assert!(matches!(qexp_support(qi(0.5), &cs, 3.0), Err(Error::Config(_))));

        let sq = ConstraintSet::single(ConstraintFn::square(), 1.0).unwrap();
        let s = qexp_support(qi(0.5), &sq, 0.0).unwrap();
        assert_relative_eq!(s.upper(), 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(s.lower(), -(2f64.sqrt()), max_relative = 1e-15);

        // cubic: 1 - 0.5 (x^3 - 3x) has three real roots; the anchor at 0 sits
        // between the outer two on the right side
        let cubic = ConstraintSet::single(ConstraintFn::polynomial(vec![0.0, -3.0, 0.0, 1.0]).unwrap(), 1.0).unwrap();
        let s = qexp_support(qi(0.5), &cubic, 0.0).unwrap();
        let base = |x: f64| 1.0 - 0.5 * (x * x * x - 3.0 * x);
        assert!(base(s.lower()).abs() < 1e-12 && base(s.upper()).abs() < 1e-12);
        assert!(s.lower() < 0.0 && s.upper() > 0.0);
    }

    #[test]
    fn singular_index_is_rejected() {
        let cs = ConstraintSet::single(ConstraintFn::identity(), 1.0).unwrap();
        assert!(matches!(TransformSpec::new(qi(2.0), cs.clone()), Err(Error::SingularIndex { .. })));
        assert!(matches!(
            TransformSpec::new(qi(2.0 + 5e-7), cs.clone()),
            Err(Error::SingularIndex { .. })
        ));
        assert!(TransformSpec::new(qi(2.0 + 2e-6), cs).is_ok());
        assert!(matches!(g_near_q2(1.0, 1.0, 0.0), Err(Error::SingularIndex { .. })));
    }

    #[test]
    fn g_canonical_examples() {
        for x in [-1.0, 0.0, 0.7, 3.0] {
            assert_eq!(spec_x(1.0, 1.0).g_canonical(x), 1.0);
        }
        assert_relative_eq!(spec_x(1.5, 1.0).g_canonical(0.5), 2.5, max_relative = 1e-15);
        assert_relative_eq!(spec_x(0.5, 1.0).g_canonical(0.0), 1.0 / 1.5, max_relative = 1e-15);
        assert_relative_eq!(spec_x(2.5, 1.0).g_canonical(0.5), -3.5, max_relative = 1e-15);

        let cs = ConstraintSet::new(vec![ConstraintFn::identity(), ConstraintFn::square()], vec![1.0, 1.0]).unwrap();
        let spec = TransformSpec::new(qi(0.5), cs).unwrap();
        assert_relative_eq!(spec.g_canonical(0.5), 0.625 / 1.5, max_relative = 1e-15);
        assert!((spec.g_canonical(0.5) - 0.416667).abs() < 1e-6);
    }

    #[test]
    fn g_general_examples() {
        let spec = spec_x(0.5, 1.0).with_c(0.2);
        // e_q(-1) = 0.25; 4 (0.25^1.5 / 1.5 + 0.2)
        assert_relative_eq!(spec.g_general(1.0).unwrap(), 4.0 * (0.125 / 1.5 + 0.2), max_relative = 1e-14);
        assert!((spec.g_general(1.0).unwrap() - 1.13333).abs() < 1e-5);

        let classical = spec_x(1.0, 1.0).with_c(0.3);
        for x in [-1.0, 0.5, 2.0] {
            assert_relative_eq!(classical.g_general(x).unwrap(), 1.0 + 0.3 * x.exp(), max_relative = 1e-15);
        }
        // q -> 1 from outside the classical band approaches the same limit
        let near = spec_x(1.0 + 1e-7, 1.0).with_c(0.3);
        assert_relative_eq!(near.g_general(0.5).unwrap(), 1.0 + 0.3 * 0.5f64.exp(), max_relative = 1e-6);

        assert!(matches!(spec.g_general(2.5), Err(Error::OutOfSupport { .. })));
    }

    #[test]
    fn jacobian_examples() {
        let spec = spec_x(0.5, 1.0);
        assert!(matches!(spec.jacobian(2.0), Err(Error::EdgeSingularity { edge }) if edge == 2.0));
        for x in [-3.0, 0.0, 1.0, 1.9] {
            assert!((spec.jacobian(x).unwrap() * spec.g_canonical(x) - 1.0).abs() < 1e-14);
        }
        assert_eq!(spec_x(1.0, 2.0).jacobian(0.3).unwrap(), 1.0);
    }

    #[test]
    fn ode_residual_examples() {
        let spec = spec_x(0.5, 1.0);
        // g ≡ 1, slope 0: 0 - 0.25^{-0.5} + 1
        assert_relative_eq!(spec.ode_residual(1.0, 1.0, 0.0).unwrap(), -1.0, max_relative = 1e-15);
        for x in [-2.0, 0.0, 0.5, 1.5] {
            let r = spec.ode_residual(x, spec.g_canonical(x), spec.g_canonical_slope(x)).unwrap();
            assert!(r.abs() < 1e-12);
        }
        let general = spec.clone().with_c(0.2);
        let h = 1e-6;
        for x in [-1.0, 0.0, 0.8, 1.5] {
            let g = general.g_general(x).unwrap();
            let slope = (general.g_general(x + h).unwrap() - general.g_general(x - h).unwrap()) / (2.0 * h);
            assert!(general.ode_residual(x, g, slope).unwrap().abs() < 1e-6);
        }
        assert!(spec.ode_residual(2.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn asymptotic_forms() {
        assert_eq!(expand_g_near_q1(1.3, 2.0, 0.0), 1.0);
        assert_relative_eq!(expand_g_near_q1(1.0, 1.0, 0.01), 0.98, max_relative = 1e-15);
        assert_eq!(g_near_q2(1.0, 1.0, 0.1).unwrap(), 19.0);
        assert_relative_eq!(g_near_q2(1.0, 1.0, -0.1).unwrap(), -21.0, max_relative = 1e-15);
        let at_19 = spec_x(1.9, 1.0).g_canonical(1.0);
        assert_relative_eq!(g_near_q2(1.0, 1.0, 0.1).unwrap(), at_19, max_relative = 1e-14);
    }

    #[test]
    fn expansion_error_is_second_order() {
        for x in [0.5, 1.0, 2.0] {
            let err = |eps: f64| (spec_x(1.0 - eps, 1.0).g_canonical(x) - expand_g_near_q1(x, 1.0, eps)).abs();
            let ratio = err(1e-2) / err(5e-3);
            assert!(ratio >= 3.5, "x = {x}: ratio {ratio}");
        }
    }

    #[test]
    fn u_of_x_examples() {
        let m = map(spec_x(1.0, 1.0));
        assert_eq!(m.u_of_x(0.7).unwrap(), 0.7);
        assert_eq!(m.x_of_u(-1.2).unwrap(), -1.2);

        let m = map(spec_x(0.5, 1.0));
        let u = m.u_of_x(1.0).unwrap();
        assert_relative_eq!(u, 3.0 * 2f64.ln(), max_relative = 1e-14);
        assert!((m.x_of_u(3.0 * 2f64.ln()).unwrap() - 1.0).abs() < 1e-10);
        assert!(matches!(m.u_of_x(2.0), Err(Error::EdgeSingularity { .. })));
        assert!(matches!(m.u_of_x(2.5), Err(Error::OutOfSupport { .. })));
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let m = map(spec_x(1.5, 1.0));
        let spec = m.spec().clone();
        for i in 0..=20 {
            let x = 0.5 * i as f64;
            let numeric = integrate_between(|t| spec.jacobian(t).unwrap(), 0.0, x, &QuadratureSpec::default()).unwrap();
            assert!((m.u_of_x(x).unwrap() - numeric).abs() < 1e-9, "x = {x}");
        }
    }

    #[test]
    fn general_h_round_trip_and_range() {
        // h = x^2, q = 1.5: u(x) is bounded, |u| < π/(2√2)
        let m = map(spec_h(1.5, 1.0, ConstraintFn::square()));
        for x in [-3.0, -0.4, 0.0, 0.2, 1.0, 5.0] {
            let u = m.u_of_x(x).unwrap();
            let closed = (x / 2f64.sqrt()).atan() / 2f64.sqrt();
            assert!((u - closed).abs() < 1e-10, "x = {x}: {u} vs {closed}");
            assert!((m.x_of_u(u).unwrap() - x).abs() < 1e-9);
        }
        let limit = std::f64::consts::PI / (2.0 * 2f64.sqrt());
        assert!(matches!(m.x_of_u(limit + 0.01), Err(Error::Range { .. })));

        // h = x^2, q = 0.5: u covers the real line, x stays in (-√2, √2)
        let m = map(spec_h(0.5, 1.0, ConstraintFn::square()));
        for u in [-5.0, -1.0, 0.3, 4.0] {
            let x = m.x_of_u(u).unwrap();
            assert!(x.abs() < 2f64.sqrt());
            assert!((m.u_of_x(x).unwrap() - u).abs() < 1e-9);
        }
    }

    #[test]
    fn q_above_two_reverses_orientation() {
        let m = map(spec_x(2.5, 1.0));
        assert_eq!(m.orientation(), -1.0);
        let (a, b) = (m.u_of_x(0.0).unwrap(), m.u_of_x(1.0).unwrap());
        assert!(b < a);
        assert!((m.x_of_u(b).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nonzero_c_crossing_a_zero_of_g_is_rejected() {
        // q = 0.5, h = x: g = f/1.5 + c/f^2 with f = 1 - x/2; c < 0 gives a zero
        let m = map(spec_x(0.5, 1.0).with_c(-0.05));
        let zero = m.spec().g_zero_between(0.0, 1.99).expect("zero of g");
        assert!(m.spec().g_general(zero).unwrap().abs() < 1e-10);
        assert!(matches!(m.u_of_x(1.99), Err(Error::EdgeSingularity { .. })));
        assert!(m.u_of_x(0.5).is_ok());
    }

    #[test]
    fn anchored_map() {
        let spec = spec_x(0.5, 1.0).with_anchor(1.0, 2.0).unwrap();
        let m = map(spec);
        assert_eq!(m.u_of_x(1.0).unwrap(), 2.0);
        let reference = map(spec_x(0.5, 1.0));
        let shift = reference.u_of_x(1.0).unwrap();
        for x in [-1.0, 0.3, 1.7] {
            assert_relative_eq!(
                m.u_of_x(x).unwrap(),
                reference.u_of_x(x).unwrap() - shift + 2.0,
                max_relative = 1e-12
            );
        }
    }

    proptest! {
        #[test]
        fn c_zero_general_equals_canonical(q in 0.2f64..2.8, lambda in 0.1f64..3.0, t in 0.0f64..0.95, sq in any::<bool>()) {
            prop_assume!((q - 2.0).abs() > 1e-3 && (q - 1.0).abs() > 1e-6);
            let h = if sq { ConstraintFn::square() } else { ConstraintFn::identity() };
            let spec = spec_h(q, lambda, h);
            let s = spec.support();
            let x = if s.upper().is_finite() { t * s.upper() } else { 3.0 * t };
            let g = spec.g_general(x).unwrap();
            prop_assert!((g - spec.g_canonical(x)).abs() <= 1e-13 * g.abs().max(1.0));
        }

        #[test]
        fn sign_follows_two_minus_q(q in 0.2f64..3.0, x in -0.99f64..20.0) {
            prop_assume!((q - 2.0).abs() > 1e-3);
            let spec = spec_x(q, 1.0);
            prop_assume!(spec.support().contains_interior(x));
            prop_assert_eq!(spec.g_canonical(x).signum(), (2.0 - q).signum());
        }

        #[test]
        fn round_trip_on_interior(q in prop_oneof![Just(0.5), Just(1.5)], t in 0.01f64..0.99, sq in any::<bool>()) {
            let h = if sq { ConstraintFn::square() } else { ConstraintFn::identity() };
            let m = map(spec_h(q, 1.0, h));
            let s = m.support();
            let lo = s.lower().max(-10.0);
            let hi = s.upper().min(10.0);
            let x = lo + t * (hi - lo);
            let back = m.x_of_u(m.u_of_x(x).unwrap()).unwrap();
            prop_assert!((back - x).abs() < 1e-9, "x = {}, back = {}", x, back);
        }

        #[test]
        fn u_is_increasing_below_two(q in 0.2f64..1.95, a in 0.0f64..0.98, b in 0.0f64..0.98) {
            prop_assume!((a - b).abs() > 1e-6);
            let m = map(spec_x(q, 1.0));
            let s = m.support();
            let hi = s.upper().min(10.0);
            let (xa, xb) = (a * hi, b * hi);
            let (ua, ub) = (m.u_of_x(xa).unwrap(), m.u_of_x(xb).unwrap());
            prop_assert_eq!((xb - xa).signum(), (ub - ua).signum());
        }

        #[test]
        fn classical_collapse(dq in -1e-3f64..1e-3, lambda in 0.1f64..2.0) {
            prop_assume!(dq.abs() > 1e-12);
            let spec = spec_x(1.0 + dq, lambda);
            let bound = 5.0 * dq.abs() * (1.0 + 3.0 * lambda);
            for i in 0..=60 {
                let x = -3.0 + 0.1 * i as f64;
                prop_assert!((spec.g_canonical(x) - 1.0).abs() <= bound);
            }
        }
    }
}
