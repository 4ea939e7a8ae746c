//! Direct numerical solution of the linear equation `g' + P g = Q`, used as an
//! oracle for the closed-form `g`.

use crate::error::{Error, Result};
use crate::qkernel::q_exp_pow;
use crate::quad::{integrate_between, QuadratureSpec};
use crate::transform::TransformSpec;

/// Blow-up threshold for the integrated solution.
pub const INSTABILITY_BOUND: f64 = 1e12;

/// `g' + P(x) g = Q(x)` with `g(x0) = g0`.
pub struct LinearODE<'a> {
    p: Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>,
    q: Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>,
    x0: f64,
    g0: f64,
}

impl<'a> LinearODE<'a> {
    pub fn new(
        p: impl Fn(f64) -> f64 + Send + Sync + 'a,
        q: impl Fn(f64) -> f64 + Send + Sync + 'a,
        x0: f64,
        g0: f64,
    ) -> Self {
        Self {
            p: Box::new(p),
            q: Box::new(q),
            x0,
            g0,
        }
    }

    /// Coefficients of the equation for `g`: `P = -e_q(-λ·h)^{q-1} λ·h'` and
    /// `Q = -λ·h'`, started from the canonical `g` at the anchor.
    pub fn for_transform(spec: &'a TransformSpec) -> Self {
        let q = spec.q();
        let cs = spec.constraints();
        let p = move |x: f64| {
            let drift = q_exp_pow(-cs.dot(x), q, q.value() - 1.0).unwrap_or(f64::NAN);
            -drift * cs.dot_deriv(x)
        };
        let forcing = move |x: f64| -cs.dot_deriv(x);
        let (x0, _) = spec.anchor();
        Self::new(p, forcing, x0, spec.g_canonical(x0))
    }

    pub fn with_initial(mut self, x0: f64, g0: f64) -> Self {
        self.x0 = x0;
        self.g0 = g0;
        self
    }

    pub fn initial(&self) -> (f64, f64) {
        (self.x0, self.g0)
    }

    #[inline]
    pub fn p(&self, x: f64) -> f64 {
        (self.p)(x)
    }

    #[inline]
    pub fn q(&self, x: f64) -> f64 {
        (self.q)(x)
    }

    fn rhs(&self, x: f64, g: f64) -> f64 {
        self.q(x) - self.p(x) * g
    }

    /// Integrating factor `I(x) = exp(∫_{x0}^{x} P)`.
    pub fn integrating_factor(&self, x: f64, quad: &QuadratureSpec) -> Result<f64> {
        Ok(integrate_between(|t| self.p(t), self.x0, x, quad)?.exp())
    }

    /// `g(x) = (g0 + ∫_{x0}^{x} I Q) / I(x)` by nested quadrature.
    pub fn solve_integrating_factor(&self, x: f64, quad: &QuadratureSpec) -> Result<f64> {
        let inner = quad.tightened(10.0);
        let weighted = integrate_between(
            |t| self.integrating_factor(t, &inner).map_or(f64::NAN, |i| i * self.q(t)),
            self.x0,
            x,
            quad,
        )?;
        Ok((self.g0 + weighted) / self.integrating_factor(x, &inner)?)
    }
}

/// Classical fourth-order Runge-Kutta with `steps` equal steps from `x0` to
/// `x_end`. Returns all `steps + 1` nodes.
pub fn solve_ode_numeric(ode: &LinearODE<'_>, x_end: f64, steps: usize) -> Result<Vec<(f64, f64)>> {
    if steps < 100 {
        return Err(Error::Config(format!("at least 100 steps are required, got {steps}")));
    }
    if !x_end.is_finite() {
        return Err(Error::Config(format!("end point must be finite, got {x_end}")));
    }
    let (x0, mut g) = ode.initial();
    let h = (x_end - x0) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    out.push((x0, g));
    for i in 0..steps {
        let x = x0 + i as f64 * h;
        let k1 = ode.rhs(x, g);
        let k2 = ode.rhs(x + 0.5 * h, g + 0.5 * h * k1);
        let k3 = ode.rhs(x + 0.5 * h, g + 0.5 * h * k2);
        let k4 = ode.rhs(x + h, g + h * k3);
        g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let xn = if i + 1 == steps { x_end } else { x0 + (i + 1) as f64 * h };
        if !g.is_finite() || g.abs() > INSTABILITY_BOUND {
            return Err(Error::Instability { x: xn, g });
        }
        out.push((xn, g));
    }
    Ok(out)
}
