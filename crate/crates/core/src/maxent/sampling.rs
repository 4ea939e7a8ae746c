//! Monte-Carlo check of the map: exponential draws in `u` pushed through
//! `x(u)` should follow the Tsallis law in `x`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::maxent::TsallisSolution;
use crate::transform::TransformMap;

/// Smallest sample size accepted.
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleReport {
    /// Mapped variates in draw order.
    pub samples: Vec<f64>,
    pub ks_statistic: f64,
    pub seed: u64,
}

/// Two-sided Kolmogorov-Smirnov distance between the empirical law of
/// `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Draws `n` variates `u ~ λ e^{-λu}` on `[0, inf)` from ChaCha8 seeded with
/// `seed`, maps them through `x(u)` and tests them against
/// `F(x) = 1 - e_q(-λx)^{2-q}`.
pub fn sample_and_test(t: &TsallisSolution, map: &TransformMap, n: usize, seed: u64) -> Result<SampleReport> {
    sample_and_test_with(t, map, n, seed, Execution::default())
}

pub fn sample_and_test_with(
    t: &TsallisSolution,
    map: &TransformMap,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<SampleReport> {
    let q = t.q().value();
    if !(q > 0.0 && q < 2.0) {
        return Err(Error::UnsupportedRegime(format!("sampling needs 0 < q < 2, got q = {q}")));
    }
    if n < MIN_SAMPLES {
        return Err(Error::Config(format!("at least {MIN_SAMPLES} samples are required, got {n}")));
    }
    let cdf = t.closed_cdf().ok_or_else(|| {
        Error::UnsupportedRegime("sampling needs one constraint h = x with λ > 0 on a support starting at 0".into())
    })?;
    let spec = map.spec();
    if spec.q() != t.q()
        || !spec.constraints().same_observables(t.constraints())
        || spec.constraints().multipliers() != t.multipliers()
        || spec.anchor() != (0.0, 0.0)
        || spec.c() != 0.0
    {
        return Err(Error::Config(
            "map must be the canonical map of the Tsallis solution anchored at the origin".into(),
        ));
    }
    let lambda = t.multipliers()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let us: Vec<f64> = (0..n)
        .map(|_| {
            let v: f64 = rng.gen();
            -(-v).ln_1p() / lambda
        })
        .collect();
    let samples = exec.try_map(&us, |&u| map.x_of_u(u))?;
    let ks_statistic = ks_statistic(&samples, cdf);
    Ok(SampleReport {
        samples,
        ks_statistic,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxent::normalize_tsallis;
    use crate::qkernel::{QIndex, SupportInterval};
    use crate::quad::QuadratureSpec;
    use crate::transform::{ConstraintFn, ConstraintSet, TransformSpec};

    fn setup(q: f64) -> (TsallisSolution, TransformMap) {
        let quad = QuadratureSpec::default();
        let cs = ConstraintSet::single(ConstraintFn::identity(), 1.0).unwrap();
        let qi = QIndex::new(q).unwrap();
        let t = normalize_tsallis(qi, cs.clone(), SupportInterval::half_line(), &quad).unwrap();
        let map = TransformMap::new(TransformSpec::new(qi, cs).unwrap(), quad).unwrap();
        (t, map)
    }

    #[test]
    fn ks_of_uniform_grid() {
        let xs: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        assert!((ks_statistic(&xs, |x| x) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn classical_samples_are_exponential() {
        let (t, map) = setup(1.0);
        let r = sample_and_test(&t, &map, 20_000, 3).unwrap();
        assert!(r.ks_statistic < 1.63 / (20_000f64).sqrt());
    }

    #[test]
    fn deterministic_and_order_independent() {
        let (t, map) = setup(0.5);
        let a = sample_and_test_with(&t, &map, 5000, 11, Execution::Sequential).unwrap();
        let b = sample_and_test_with(&t, &map, 5000, 11, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.iter().all(|&x| (0.0..2.0).contains(&x)));
    }

    #[test]
    fn preconditions() {
        let (t, map) = setup(0.5);
        assert!(matches!(sample_and_test(&t, &map, 999, 1), Err(Error::Config(_))));
        let (t15, map15) = setup(1.5);
        assert!(matches!(sample_and_test(&t15, &map, 1000, 1), Err(Error::Config(_))));
        assert!(sample_and_test(&t15, &map15, 1000, 1).is_ok());
    }
}
