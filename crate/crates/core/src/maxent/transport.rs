//! Pointwise check of `p(x) dx = p(u) du` along the map `u(x)`.

use crate::density::Density;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::maxent::{ShannonSolution, TsallisSolution};
use crate::qkernel::q_exp;
use crate::transform::{ConstraintKind, TransformMap};

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPoint {
    pub x: f64,
    pub u: f64,
    pub g: f64,
    pub p_tsallis: f64,
    /// `e^{-μ} e^{-λ·h(u(x))} |J(x)|`.
    pub p_pushforward: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportReport {
    pub points: Vec<TransportPoint>,
    pub max_abs_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// For `h = x` anchored at the origin with `c = 0`: the largest
    /// `|e^{-λu}/g - (2-q) e_q(-λx)|` over the grid.
    pub pushforward_factor_residual: Option<f64>,
}

impl TransportReport {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    /// `(x, |residual|)` pairs.
    pub fn profile(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.x, p.residual.abs())).collect()
    }
}

fn ensure_matched(s: &ShannonSolution, t: &TsallisSolution, map: &TransformMap) -> Result<()> {
    let spec = map.spec();
    let same = |a: &crate::transform::ConstraintSet, b: &crate::transform::ConstraintSet| {
        a.same_observables(b) && a.multipliers() == b.multipliers()
    };
    if !same(s.constraints(), t.constraints()) || !same(t.constraints(), spec.constraints()) {
        return Err(Error::Config(
            "Shannon solution, Tsallis solution and map must share observables and multipliers".into(),
        ));
    }
    if t.q() != spec.q() {
        return Err(Error::Config(format!("Tsallis solution has {} but the map has {}", t.q(), spec.q())));
    }
    Ok(())
}

/// Evaluates both sides of the transport identity on `grid`, which must lie in
/// the Tsallis support.
pub fn verify_transport(
    s: &ShannonSolution,
    t: &TsallisSolution,
    map: &TransformMap,
    grid: &[f64],
    tol: f64,
) -> Result<TransportReport> {
    verify_transport_with(s, t, map, grid, tol, Execution::default())
}

pub fn verify_transport_with(
    s: &ShannonSolution,
    t: &TsallisSolution,
    map: &TransformMap,
    grid: &[f64],
    tol: f64,
    exec: Execution,
) -> Result<TransportReport> {
    ensure_matched(s, t, map)?;
    let support = t.support();
    if let Some(&x) = grid.iter().find(|&&x| !support.contains(x)) {
        return Err(Error::OutOfSupport {
            x,
            lower: support.lower(),
            upper: support.upper(),
        });
    }
    let points = exec.try_map(grid, |&x| -> Result<TransportPoint> {
        let u = map.u_of_x(x)?;
        let g = map.g(x)?;
        let p_tsallis = t.pdf(x);
        let p_pushforward = s.formula(u) / g.abs();
        Ok(TransportPoint {
            x,
            u,
            g,
            p_tsallis,
            p_pushforward,
            residual: p_tsallis - p_pushforward,
        })
    })?;
    let max_abs_residual = points.iter().map(|p| p.residual.abs()).fold(0.0, f64::max);

    let spec = map.spec();
    let cs = spec.constraints();
    let factor_applies = cs.len() == 1
        && *cs.constraints()[0].kind() == ConstraintKind::Identity
        && spec.anchor() == (0.0, 0.0)
        && spec.c() == 0.0;
    let pushforward_factor_residual = if factor_applies {
        let lambda = cs.multipliers()[0];
        let q = spec.q();
        let worst = points.iter().try_fold(0.0f64, |acc, p| -> Result<f64> {
            let lhs = (-lambda * p.u).exp() / p.g;
            let rhs = (2.0 - q.value()) * q_exp(-lambda * p.x, q)?;
            Ok(acc.max((lhs - rhs).abs()))
        })?;
        Some(worst)
    } else {
        None
    };

    Ok(TransportReport {
        points,
        max_abs_residual,
        tolerance: tol,
        passed: max_abs_residual < tol,
        pushforward_factor_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxent::{normalize_tsallis, ShannonSolution};
    use crate::qkernel::{QIndex, SupportInterval};
    use crate::quad::QuadratureSpec;
    use crate::transform::{ConstraintFn, ConstraintSet, TransformSpec};

    fn setup(q: f64, lambda: f64) -> (ShannonSolution, TsallisSolution, TransformMap) {
        let quad = QuadratureSpec::default();
        let cs = ConstraintSet::single(ConstraintFn::identity(), lambda).unwrap();
        let qi = QIndex::new(q).unwrap();
        let s = ShannonSolution::with_multipliers(cs.clone(), SupportInterval::half_line(), &quad).unwrap();
        let t = normalize_tsallis(qi, cs.clone(), SupportInterval::half_line(), &quad).unwrap();
        let map = TransformMap::new(TransformSpec::new(qi, cs).unwrap(), quad).unwrap();
        (s, t, map)
    }

    fn grid(hi: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|i| hi * i as f64 / (n + 1) as f64).collect()
    }

    #[test]
    fn classical_identity_is_exact() {
        let (s, t, map) = setup(1.0, 1.0);
        let r = verify_transport(&s, &t, &map, &grid(10.0, 50), 1e-14).unwrap();
        assert!(r.max_abs_residual < 1e-14, "{}", r.max_abs_residual);
        assert!(r.passed);
    }

    #[test]
    fn half_line_exponential() {
        for q in [0.5, 1.5] {
            let (s, t, map) = setup(q, 1.0);
            let hi = t.support().upper().min(20.0);
            let r = verify_transport(&s, &t, &map, &grid(hi, 200), 1e-8).unwrap();
            assert!(r.passed, "q = {q}: {}", r.max_abs_residual);
            assert!(r.pushforward_factor_residual.unwrap() < 1e-12);
        }
    }

    #[test]
    fn mismatched_inputs() {
        let (s, _, map) = setup(0.5, 1.0);
        let (_, t2, _) = setup(0.5, 2.0);
        assert!(matches!(verify_transport(&s, &t2, &map, &[0.5], 1e-8), Err(Error::Config(_))));
        let (_, t, _) = setup(0.5, 1.0);
        assert!(matches!(
            verify_transport(&s, &t, &map, &[2.5], 1e-8),
            Err(Error::OutOfSupport { .. })
        ));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let (s, t, map) = setup(1.5, 1.0);
        let g = grid(20.0, 64);
        let a = verify_transport_with(&s, &t, &map, &g, 1e-8, Execution::Sequential).unwrap();
        let b = verify_transport_with(&s, &t, &map, &g, 1e-8, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
