//! Linear, Curado-Tsallis and Tsallis-Mendes-Plastino expectation values and
//! the escort normalization `X_q = ∫ p^q`.

use std::fmt;
use std::sync::Arc;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::qkernel::QIndex;
use crate::quad::{integrate, integrate_vec, QuadratureSpec};

/// A labelled observable `A(x)`.
#[derive(Clone)]
pub struct Observable {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Observable {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn one() -> Self {
        Self::new("1", |_| 1.0)
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let p = Polynomial::new(coeffs);
        Self::new(p.to_string(), move |x| p.eval(x))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable").field("label", &self.label).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscortWeight {
    pub q: QIndex,
    pub x_q: f64,
}

/// `CT mean` and `X_q` from the same quadrature nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscortMoments {
    pub ct: f64,
    pub x_q: f64,
}

impl EscortMoments {
    pub fn tmp(&self) -> f64 {
        self.ct / self.x_q
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averages {
    pub linear: f64,
    pub ct: f64,
    pub tmp: f64,
    pub x_q: f64,
}

#[inline]
fn escort(p: f64, q: QIndex) -> f64 {
    if p == 0.0 {
        0.0
    } else if q.is_classical() {
        p
    } else {
        p.powf(q.value())
    }
}

fn divergent(what: &str, e: Error) -> Error {
    match e {
        Error::Quadrature { .. } | Error::NonFiniteIntegrand { .. } => Error::NonIntegrable(format!("{what}: {e}")),
        other => other,
    }
}

/// `∫ p A`.
pub fn mean_linear(p: &dyn Density, a: &Observable, quad: &QuadratureSpec) -> Result<f64> {
    integrate(
        |x| {
            let v = p.pdf(x);
            if v == 0.0 {
                0.0
            } else {
                v * a.eval(x)
            }
        },
        &p.support(),
        quad,
    )
}

/// `X_q = ∫ p^q`.
pub fn escort_norm(p: &dyn Density, q: QIndex, quad: &QuadratureSpec) -> Result<EscortWeight> {
    let x_q = integrate(|x| escort(p.pdf(x), q), &p.support(), quad).map_err(|e| divergent("∫ p^q", e))?;
    if !(x_q > 0.0) {
        return Err(Error::NonIntegrable(format!("∫ p^q = {x_q} is not positive")));
    }
    Ok(EscortWeight { q, x_q })
}

/// `∫ p^q A`; not normalized, so `A = 1` gives `X_q`.
pub fn mean_ct(p: &dyn Density, a: &Observable, q: QIndex, quad: &QuadratureSpec) -> Result<f64> {
    Ok(escort_moments(p, a, q, quad)?.ct)
}

/// `∫ p^q A / X_q` with both integrals on shared nodes.
pub fn mean_tmp(p: &dyn Density, a: &Observable, q: QIndex, quad: &QuadratureSpec) -> Result<f64> {
    Ok(escort_moments(p, a, q, quad)?.tmp())
}

/// `[∫ p^q A, ∫ p^q]` from one vector integration.
pub fn escort_moments(p: &dyn Density, a: &Observable, q: QIndex, quad: &QuadratureSpec) -> Result<EscortMoments> {
    let est = integrate_vec::<2, _>(
        |x| {
            let w = escort(p.pdf(x), q);
            if w == 0.0 {
                [0.0, 0.0]
            } else {
                [w * a.eval(x), w]
            }
        },
        &p.support(),
        quad,
    )
    .map_err(|e| divergent("∫ p^q A", e))?;
    let [ct, x_q] = est.value;
    if !(x_q > 0.0) {
        return Err(Error::NonIntegrable(format!("∫ p^q = {x_q} is not positive")));
    }
    Ok(EscortMoments { ct, x_q })
}

/// All three means and `X_q`.
pub fn averages(p: &dyn Density, a: &Observable, q: QIndex, quad: &QuadratureSpec) -> Result<Averages> {
    let linear = mean_linear(p, a, quad)?;
    let m = escort_moments(p, a, q, quad)?;
    Ok(Averages {
        linear,
        ct: m.ct,
        tmp: m.tmp(),
        x_q: m.x_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::DensityFn;
    use crate::qkernel::SupportInterval;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn qi(q: f64) -> QIndex {
        QIndex::new(q).unwrap()
    }

    fn fixture() -> DensityFn<impl Fn(f64) -> f64 + Sync> {
        DensityFn::new(|x: f64| 1.5 * (1.0 - x / 2.0).powi(2), SupportInterval::new(0.0, 2.0, true, false).unwrap())
    }

    #[test]
    fn linear_means() {
        let quad = QuadratureSpec::default();
        let p = fixture();
        assert_abs_diff_eq!(mean_linear(&p, &Observable::one(), &quad).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mean_linear(&p, &Observable::polynomial(vec![0.0, 1.0]), &quad).unwrap(), 0.5, epsilon = 1e-12);
        let e = DensityFn::new(|u: f64| (-u).exp(), SupportInterval::half_line());
        assert_abs_diff_eq!(mean_linear(&e, &Observable::polynomial(vec![0.0, 1.0]), &quad).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn escort_examples() {
        let quad = QuadratureSpec::default();
        let p = fixture();
        assert_abs_diff_eq!(escort_norm(&p, qi(1.0), &quad).unwrap().x_q, 1.0, epsilon = 1e-12);
        let tri = DensityFn::new(|x: f64| 2.0 * (1.0 - x), SupportInterval::closed(0.0, 1.0).unwrap());
        assert_abs_diff_eq!(escort_norm(&tri, qi(2.0), &quad).unwrap().x_q, 4.0 / 3.0, epsilon = 1e-12);
        let w = escort_norm(&p, qi(0.5), &quad).unwrap();
        assert_abs_diff_eq!(w.x_q, 1.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn ct_and_tmp_fixture() {
        let quad = QuadratureSpec::default();
        let p = fixture();
        let x = Observable::polynomial(vec![0.0, 1.0]);
        let ct = mean_ct(&p, &x, qi(0.5), &quad).unwrap();
        assert_abs_diff_eq!(ct, 1.5f64.sqrt() * 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mean_tmp(&p, &x, qi(0.5), &quad).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            mean_ct(&p, &Observable::one(), qi(0.5), &quad).unwrap(),
            escort_norm(&p, qi(0.5), &quad).unwrap().x_q,
            epsilon = 1e-13
        );
    }

    #[test]
    fn heavy_tail_escort_diverges() {
        // p ~ x^{-2}: p^{0.4} ~ x^{-0.8} is not integrable
        let quad = QuadratureSpec::default();
        let p = DensityFn::new(|x: f64| 1.0 / (1.0 + x).powi(2), SupportInterval::half_line());
        assert!(matches!(escort_norm(&p, qi(0.4), &quad), Err(Error::NonIntegrable(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn tmp_is_ct_over_escort_norm(q in 0.3f64..1.9, c0 in -1.0f64..1.0, c1 in -1.0f64..1.0) {
            let quad = QuadratureSpec::default();
            let p = fixture();
            let a = Observable::polynomial(vec![c0, c1, 0.5]);
            let qq = qi(q);
            let m = escort_moments(&p, &a, qq, &quad).unwrap();
            prop_assert!((mean_tmp(&p, &a, qq, &quad).unwrap() - m.ct / m.x_q).abs() < 1e-12);
            let separate = mean_ct(&p, &a, qq, &quad).unwrap() / escort_norm(&p, qq, &quad).unwrap().x_q;
            prop_assert!((m.tmp() - separate).abs() < 1e-12);
        }

        #[test]
        fn schemes_collapse_at_q_one(c0 in -1.0f64..1.0, c1 in -1.0f64..1.0) {
            let quad = QuadratureSpec::default();
            let p = fixture();
            let a = Observable::polynomial(vec![c0, c1]);
            let all = averages(&p, &a, qi(1.0), &quad).unwrap();
            prop_assert!((all.linear - all.ct).abs() < 10.0 * quad.rel_tol);
            prop_assert!((all.linear - all.tmp).abs() < 10.0 * quad.rel_tol);
        }
    }
}
