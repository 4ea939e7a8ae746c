//! q-exponential solutions `p(x) = C e_q(-λ·h(x))` with multipliers carried
//! over from the Shannon side.

use crate::density::Density;
use crate::error::{Error, Result};
use crate::qkernel::{q_exp, QIndex, SupportInterval};
use crate::quad::{integrate, QuadratureSpec};
use crate::transform::{qexp_support, ConstraintSet};

#[derive(Debug, Clone, PartialEq)]
pub struct TsallisSolution {
    c_norm: f64,
    q: QIndex,
    cs: ConstraintSet,
    support: SupportInterval,
}

impl TsallisSolution {
    /// Normalization constant `C`.
    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }

    pub fn q(&self) -> QIndex {
        self.q
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.cs
    }

    pub fn multipliers(&self) -> &[f64] {
        self.cs.multipliers()
    }

    /// Tsallis CDF for `h = x` with `λ > 0` on a support starting at zero:
    /// `1 - e_q(-λx)^{2-q}`. `None` for any other configuration.
    pub fn closed_cdf(&self) -> Option<impl Fn(f64) -> f64 + '_> {
        let is_identity = self.cs.len() == 1
            && *self.cs.constraints()[0].kind() == crate::transform::ConstraintKind::Identity;
        let lambda = self.cs.multipliers()[0];
        let q = self.q;
        let ok = is_identity && lambda > 0.0 && self.support.lower() == 0.0 && q.value() > 0.0 && q.value() < 2.0;
        ok.then_some(move |x: f64| {
            if x <= 0.0 {
                0.0
            } else if x >= self.support.upper() {
                1.0
            } else {
                let e = q_exp(-lambda * x, q).unwrap_or(0.0);
                1.0 - e.powf(2.0 - q.value())
            }
        })
    }

    /// `∫ p` under `quad`.
    pub fn check(&self, quad: &QuadratureSpec) -> Result<f64> {
        integrate(|x| self.pdf(x), &self.support, quad)
    }
}

impl Density for TsallisSolution {
    fn pdf(&self, x: f64) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        q_exp(-self.cs.dot(x), self.q).map_or(0.0, |e| self.c_norm * e)
    }

    fn support(&self) -> SupportInterval {
        self.support
    }
}

/// A point of `domain` at which `e_q(-λ·h)` is positive, preferring zero.
fn reference_point(q: QIndex, cs: &ConstraintSet, domain: &SupportInterval) -> Option<f64> {
    let positive = |x: f64| 1.0 - q.one_minus_q() * cs.dot(x) > 0.0;
    let (lo, hi) = (domain.lower(), domain.upper());
    let mut candidates = vec![0.0f64.clamp(lo, hi)];
    if lo.is_finite() && hi.is_finite() {
        candidates.push(0.5 * (lo + hi));
    }
    for end in [lo, hi] {
        if end.is_finite() {
            candidates.push(end);
        }
    }
    candidates.into_iter().find(|&x| x.is_finite() && domain.contains(x) && positive(x))
}

/// Tail check on each infinite end of the support. Returns the power-law
/// exponent of the decay when it is too slow.
fn check_tails(q: QIndex, cs: &ConstraintSet, support: &SupportInterval) -> Result<()> {
    let s = cs.combined();
    for (end, dir, name) in [(support.lower(), -1.0, "at -inf"), (support.upper(), 1.0, "at +inf")] {
        if end.is_finite() {
            continue;
        }
        let d = s.degree() as f64;
        let grows = s.degree() > 0 && s.sign_at_infinity(dir) > 0.0;
        let decays = if q.is_classical() {
            grows
        } else if q.value() > 1.0 {
            // e_q(-s) ~ s^{-1/(q-1)} ~ |x|^{-d/(q-1)}
            if !grows || d / (q.value() - 1.0) <= 1.0 {
                return Err(Error::NonNormalizable {
                    tail_exponent: if grows { d / (q.value() - 1.0) } else { 0.0 },
                    end: name,
                });
            }
            true
        } else {
            // an infinite end with q < 1 means λ·h never reaches the cutoff
            false
        };
        if !decays {
            let exponent = if q.value() < 1.0 && s.degree() > 0 {
                -d / q.one_minus_q()
            } else {
                0.0
            };
            return Err(Error::NonNormalizable {
                tail_exponent: exponent,
                end: name,
            });
        }
    }
    Ok(())
}

/// Normalizes `e_q(-λ·h)` on `domain` intersected with the q-support component
/// that contains the reference point (zero when the domain allows).
pub fn normalize_tsallis(
    q: QIndex,
    cs: ConstraintSet,
    domain: SupportInterval,
    quad: &QuadratureSpec,
) -> Result<TsallisSolution> {
    quad.validate()?;
    let reference = reference_point(q, &cs, &domain).ok_or_else(|| {
        Error::Config(format!("e_q(-λ·h) vanishes on all of {domain} for {q}"))
    })?;
    let component = qexp_support(q, &cs, reference)?;
    let support = domain
        .intersect(&component)
        .ok_or_else(|| Error::Config(format!("{domain} does not meet the q-support {component}")))?;
    check_tails(q, &cs, &support)?;
    let z = integrate(|x| q_exp(-cs.dot(x), q).unwrap_or(0.0), &support, quad).map_err(|e| match e {
        Error::Quadrature { .. } => Error::NonIntegrable(format!("normalization of e_q(-λ·h) on {support}: {e}")),
        other => other,
    })?;
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::NonIntegrable(format!("normalization integral is {z}")));
    }
    Ok(TsallisSolution {
        c_norm: 1.0 / z,
        q,
        cs,
        support,
    })
}
