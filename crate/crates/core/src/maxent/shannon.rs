//! Exponential-family solutions `p(u) = exp(-μ - λ·h(u))` fitted to moment targets.

use nalgebra::{DMatrix, DVector};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::qkernel::SupportInterval;
use crate::quad::{integrate_vec, QuadratureSpec};
use crate::transform::ConstraintSet;

/// Largest number of constraints the bundled solver accepts.
pub const MAX_CONSTRAINTS: usize = 3;

const MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ShannonSolution {
    mu: f64,
    cs: ConstraintSet,
    domain: SupportInterval,
    iterations: usize,
}

/// Re-integrated normalization and moments of a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCheck {
    pub normalization: f64,
    pub moments: Vec<f64>,
}

impl ShannonSolution {
    /// Solution for given multipliers; only `μ` is computed.
    pub fn with_multipliers(cs: ConstraintSet, domain: SupportInterval, quad: &QuadratureSpec) -> Result<Self> {
        check_size(&cs)?;
        ensure_normalizable(cs.combined(), &domain)?;
        let m = moments(&cs, &domain, quad)?;
        Ok(Self {
            mu: m.log_z,
            cs,
            domain,
            iterations: 0,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn multipliers(&self) -> &[f64] {
        self.cs.multipliers()
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.cs
    }

    pub fn domain(&self) -> SupportInterval {
        self.domain
    }

    /// Newton iterations used by the solver; zero for fixed multipliers.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `exp(-μ - λ·h(u))` without the domain restriction.
    #[inline]
    pub fn formula(&self, u: f64) -> f64 {
        (-self.mu - self.cs.dot(u)).exp()
    }

    /// Normalization and moments recomputed under `quad`.
    pub fn check(&self, quad: &QuadratureSpec) -> Result<MomentCheck> {
        let m = moments(&self.cs, &self.domain, quad)?;
        Ok(MomentCheck {
            normalization: (m.log_z - self.mu).exp(),
            moments: m.mean,
        })
    }
}

impl Density for ShannonSolution {
    fn pdf(&self, u: f64) -> f64 {
        if self.domain.contains(u) {
            self.formula(u)
        } else {
            0.0
        }
    }

    fn support(&self) -> SupportInterval {
        self.domain
    }
}

fn check_size(cs: &ConstraintSet) -> Result<()> {
    if cs.len() > MAX_CONSTRAINTS {
        return Err(Error::Config(format!(
            "the multiplier solver handles at most {MAX_CONSTRAINTS} constraints, got {}",
            cs.len()
        )));
    }
    Ok(())
}

/// `exp(-λ·h)` is integrable on an infinite end only if `λ·h -> +inf` there.
fn ensure_normalizable(combined: &Polynomial, domain: &SupportInterval) -> Result<()> {
    for (end, dir, name) in [(domain.lower(), -1.0, "at -inf"), (domain.upper(), 1.0, "at +inf")] {
        if end.is_infinite() && (combined.degree() == 0 || combined.sign_at_infinity(dir) <= 0.0) {
            return Err(Error::NonNormalizable {
                tail_exponent: 0.0,
                end: name,
            });
        }
    }
    Ok(())
}

fn is_normalizable(combined: &Polynomial, domain: &SupportInterval) -> bool {
    ensure_normalizable(combined, domain).is_ok()
}

struct Moments {
    log_z: f64,
    mean: Vec<f64>,
    cov: DMatrix<f64>,
}

/// `ln Z`, `E[h]` and `Cov[h]` from one shared-node integration.
fn moments(cs: &ConstraintSet, domain: &SupportInterval, quad: &QuadratureSpec) -> Result<Moments> {
    let m = cs.len();
    debug_assert!(m <= MAX_CONSTRAINTS);
    // shift by the infimum of λ·h so the weights stay O(1)
    let (inf, _) = cs.combined().range_on(domain.lower(), domain.upper());
    let shift = if inf.is_finite() { inf } else { 0.0 };
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let est = integrate_vec::<10, _>(
        |u| {
            let w = (shift - cs.dot(u)).exp();
            let mut out = [0.0; 10];
            out[0] = w;
            let mut h = [0.0; MAX_CONSTRAINTS];
            for (i, c) in cs.constraints().iter().enumerate() {
                h[i] = c.value(u);
                out[1 + i] = w * h[i];
            }
            for (k, &(i, j)) in pairs.iter().enumerate() {
                out[1 + m + k] = w * h[i] * h[j];
            }
            out
        },
        domain,
        quad,
    )?;
    let z = est.value[0];
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Solver {
            message: format!("partition function is {z}"),
            trace: cs.multipliers().to_vec(),
        });
    }
    let mean: Vec<f64> = (0..m).map(|i| est.value[1 + i] / z).collect();
    let mut cov = DMatrix::zeros(m, m);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let v = est.value[1 + m + k] / z - mean[i] * mean[j];
        cov[(i, j)] = v;
        cov[(j, i)] = v;
    }
    Ok(Moments {
        log_z: z.ln() - shift,
        mean,
        cov,
    })
}

/// Each target must lie strictly between the infimum and supremum of its
/// observable on the domain.
fn check_feasible(cs: &ConstraintSet, targets: &[f64], domain: &SupportInterval) -> Result<()> {
    for (h, &k) in cs.constraints().iter().zip(targets) {
        let (lo, hi) = h.as_polynomial().range_on(domain.lower(), domain.upper());
        if !(k > lo && k < hi) {
            return Err(Error::Feasibility(format!(
                "target {k} for <{h}> is not inside the attainable range ({lo}, {hi}) on {domain}"
            )));
        }
    }
    Ok(())
}

/// Fits `λ` so that `E[h_i] = K_i` on `domain`, then sets `μ = ln ∫ exp(-λ·h)`.
///
/// One constraint uses bracketed Newton on the monotone mean; more use damped
/// Newton on the convex dual `ln Z(λ) + λ·K` with the covariance as Hessian.
pub fn solve_shannon(cs: &ConstraintSet, domain: SupportInterval, quad: &QuadratureSpec) -> Result<ShannonSolution> {
    quad.validate()?;
    check_size(cs)?;
    let targets = cs
        .targets()
        .ok_or_else(|| Error::Config("solving for multipliers needs target means".into()))?
        .to_vec();
    check_feasible(cs, &targets, &domain)?;
    let (lambda, iterations) = if cs.len() == 1 {
        solve_single(cs, targets[0], &domain, quad)?
    } else {
        solve_dual(cs, &targets, &domain, quad)?
    };
    let solved = cs.with_multipliers(lambda)?;
    let mut sol = ShannonSolution::with_multipliers(solved, domain, quad)?;
    sol.iterations = iterations;
    Ok(sol)
}

fn solve_single(cs: &ConstraintSet, k: f64, domain: &SupportInterval, quad: &QuadratureSpec) -> Result<(Vec<f64>, usize)> {
    let h = cs.constraints()[0].as_polynomial();
    // open interval of multipliers that normalize the density
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (end, dir) in [(domain.lower(), -1.0), (domain.upper(), 1.0)] {
        if end.is_infinite() {
            if h.sign_at_infinity(dir) > 0.0 {
                lo = lo.max(0.0);
            } else {
                hi = hi.min(0.0);
            }
        }
    }
    if lo >= hi {
        return Err(Error::Feasibility(format!(
            "no multiplier makes exp(-λ·{}) normalizable on {domain}",
            cs.constraints()[0]
        )));
    }
    let eval = |l: f64| -> Result<(f64, f64)> {
        let m = moments(&cs.with_multipliers(vec![l])?, domain, quad)?;
        Ok((m.mean[0] - k, m.cov[(0, 0)]))
    };
    let tol = 1e-13 * k.abs().max(1.0);
    let mut trace = Vec::new();

    // F(λ) = E_λ[h] - K is decreasing; find a sign change
    let mut l = if lo == 0.0 {
        1.0
    } else if hi == 0.0 {
        -1.0
    } else {
        0.0
    };
    let (mut f, mut var) = eval(l)?;
    trace.push(f);
    let mut pos = None; // λ with F > 0
    let mut neg = None; // λ with F < 0
    let mut step = 1.0f64;
    for _ in 0..400 {
        if f.abs() <= tol {
            return Ok((vec![l], trace.len()));
        }
        if f > 0.0 {
            pos = Some(l);
        } else {
            neg = Some(l);
        }
        if pos.is_some() && neg.is_some() {
            break;
        }
        // F > 0 means the mean is too large: increase λ
        let bound = if f > 0.0 { hi } else { lo };
        l = if bound.is_finite() {
            0.5 * (l + bound)
        } else {
            l + f.signum() * step.max(l.abs())
        };
        step *= 2.0;
        (f, var) = eval(l)?;
        trace.push(f);
    }
    let (mut a, mut b) = match (pos, neg) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::Solver {
                message: format!("could not bracket the multiplier for target {k}"),
                trace,
            })
        }
    };
    for _ in 0..MAX_ITER {
        if f.abs() <= tol {
            return Ok((vec![l], trace.len()));
        }
        if f > 0.0 {
            a = l;
        } else {
            b = l;
        }
        let (left, right) = (a.min(b), a.max(b));
        if right - left <= 4.0 * f64::EPSILON * l.abs().max(1e-300) {
            return Ok((vec![l], trace.len()));
        }
        let newton = l + f / var;
        l = if var > 0.0 && newton > left && newton < right {
            newton
        } else {
            0.5 * (left + right)
        };
        (f, var) = eval(l)?;
        trace.push(f);
    }
    Err(Error::Solver {
        message: format!("multiplier iteration stagnated for target {k}"),
        trace,
    })
}

fn solve_dual(
    cs: &ConstraintSet,
    targets: &[f64],
    domain: &SupportInterval,
    quad: &QuadratureSpec,
) -> Result<(Vec<f64>, usize)> {
    let m = cs.len();
    let k = DVector::from_column_slice(targets);
    let tol = 1e-12 * targets.iter().fold(1.0f64, |a, t| a.max(t.abs()));
    let dual = |lambda: &[f64]| -> Option<(f64, Moments)> {
        let trial = cs.with_multipliers(lambda.to_vec()).ok()?;
        if !is_normalizable(trial.combined(), domain) {
            return None;
        }
        let mom = moments(&trial, domain, quad).ok()?;
        let phi = mom.log_z + lambda.iter().zip(targets).map(|(l, t)| l * t).sum::<f64>();
        phi.is_finite().then_some((phi, mom))
    };

    // multi-start over {-1, 0, 1}^M, keeping the lowest dual value
    let mut best: Option<(Vec<f64>, f64, Moments)> = None;
    for code in 0..3usize.pow(m as u32) {
        let start: Vec<f64> = (0..m).map(|i| ((code / 3usize.pow(i as u32)) % 3) as f64 - 1.0).collect();
        if let Some((phi, mom)) = dual(&start) {
            if best.as_ref().is_none_or(|b| phi < b.1) {
                best = Some((start, phi, mom));
            }
        }
    }
    let (mut lambda, mut phi, mut mom) = best.ok_or_else(|| {
        Error::Feasibility(format!("no starting multipliers normalize the density on {domain}"))
    })?;

    let mut trace = Vec::new();
    for it in 0..MAX_ITER {
        let excess = DVector::from_vec(mom.mean.clone()) - &k;
        let gnorm = excess.amax();
        trace.push(gnorm);
        if gnorm <= tol {
            return Ok((lambda, it));
        }
        let delta = mom
            .cov
            .clone()
            .cholesky()
            .map(|c| c.solve(&excess))
            .or_else(|| mom.cov.clone().lu().solve(&excess))
            .ok_or_else(|| Error::Solver {
                message: "moment covariance is singular".into(),
                trace: trace.clone(),
            })?;
        // directional derivative of the dual along delta
        let slope = -excess.dot(&delta);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = lambda.iter().zip(delta.iter()).map(|(l, d)| l + t * d).collect();
            if let Some((p, mm)) = dual(&trial) {
                if p <= phi + 1e-4 * t * slope || (p - phi).abs() <= 1e-15 * phi.abs().max(1.0) {
                    let moved = trial.iter().zip(&lambda).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    lambda = trial;
                    phi = p;
                    mom = mm;
                    if moved <= 1e-15 * lambda.iter().fold(1.0f64, |a, l| a.max(l.abs())) {
                        return Ok((lambda, it + 1));
                    }
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::Solver {
                    message: "line search stagnated".into(),
                    trace,
                });
            }
        }
    }
    Err(Error::Solver {
        message: format!("no convergence within {MAX_ITER} iterations"),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::ConstraintFn;
    use approx::assert_abs_diff_eq;

    fn single(h: ConstraintFn, k: f64) -> ConstraintSet {
        ConstraintSet::single(h, 1.0).unwrap().with_targets(vec![k]).unwrap()
    }

    #[test]
    fn exponential_targets() {
        let q = QuadratureSpec::default();
        let s = solve_shannon(&single(ConstraintFn::identity(), 1.0), SupportInterval::half_line(), &q).unwrap();
        assert_abs_diff_eq!(s.multipliers()[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.mu(), 0.0, epsilon = 1e-10);

        let s = solve_shannon(&single(ConstraintFn::identity(), 2.0), SupportInterval::half_line(), &q).unwrap();
        assert_abs_diff_eq!(s.multipliers()[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(s.mu(), 2f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn gaussian_target() {
        let q = QuadratureSpec::default();
        let s = solve_shannon(&single(ConstraintFn::square(), 1.0), SupportInterval::real_line(), &q).unwrap();
        assert_abs_diff_eq!(s.multipliers()[0], 0.5, epsilon = 1e-10);
        let want = (2.0 * std::f64::consts::PI).sqrt().ln();
        assert_abs_diff_eq!(s.mu(), want, epsilon = 1e-10);
    }

    #[test]
    fn bounded_domain_allows_negative_multiplier() {
        // mean above the midpoint of [0, 1] needs λ < 0
        let q = QuadratureSpec::default();
        let dom = SupportInterval::closed(0.0, 1.0).unwrap();
        let s = solve_shannon(&single(ConstraintFn::identity(), 0.7), dom, &q).unwrap();
        let l = s.multipliers()[0];
        assert!(l < 0.0);
        // truncated exponential mean: 1/λ - e^{-λ}/(1 - e^{-λ})
        let mean = 1.0 / l - (-l).exp() / (1.0 - (-l).exp());
        assert_abs_diff_eq!(mean, 0.7, epsilon = 1e-11);
    }

    #[test]
    fn infeasible_targets() {
        let q = QuadratureSpec::default();
        let err = solve_shannon(&single(ConstraintFn::identity(), -1.0), SupportInterval::half_line(), &q).unwrap_err();
        assert!(matches!(err, Error::Feasibility(_)));
        let err = solve_shannon(&single(ConstraintFn::identity(), 0.3), SupportInterval::real_line(), &q).unwrap_err();
        assert!(matches!(err, Error::Feasibility(_)));
        let missing = ConstraintSet::single(ConstraintFn::identity(), 1.0).unwrap();
        assert!(matches!(
            solve_shannon(&missing, SupportInterval::half_line(), &q),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn two_constraints_recover_gaussian() {
        // mean 1, second moment 2 on R: N(1, 1), λ = (-1, 0.5)
        let q = QuadratureSpec::default();
        let cs = ConstraintSet::new(vec![ConstraintFn::identity(), ConstraintFn::square()], vec![0.0, 1.0])
            .unwrap()
            .with_targets(vec![1.0, 2.0])
            .unwrap();
        let s = solve_shannon(&cs, SupportInterval::real_line(), &q).unwrap();
        assert_abs_diff_eq!(s.multipliers()[0], -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.multipliers()[1], 0.5, epsilon = 1e-9);
        // μ = 1/2 + ln √(2π)
        assert_abs_diff_eq!(s.mu(), 0.5 + (2.0 * std::f64::consts::PI).sqrt().ln(), epsilon = 1e-9);
    }

    #[test]
    fn solution_survives_tighter_quadrature() {
        let q = QuadratureSpec::default();
        let cs = ConstraintSet::new(vec![ConstraintFn::identity(), ConstraintFn::square()], vec![0.0, 1.0])
            .unwrap()
            .with_targets(vec![0.4, 0.3])
            .unwrap();
        let s = solve_shannon(&cs, SupportInterval::half_line(), &q).unwrap();
        let tight = q.tightened(10.0);
        let check = s.check(&tight).unwrap();
        assert!((check.normalization - 1.0).abs() < 10.0 * q.rel_tol);
        for (m, k) in check.moments.iter().zip([0.4, 0.3]) {
            assert!((m - k).abs() < 10.0 * q.rel_tol, "{m} vs {k}");
        }
    }

    #[test]
    fn too_many_constraints() {
        let q = QuadratureSpec::default();
        let cs = ConstraintSet::new(vec![ConstraintFn::identity(); 4], vec![1.0; 4])
            .unwrap()
            .with_targets(vec![1.0; 4])
            .unwrap();
        assert!(matches!(solve_shannon(&cs, SupportInterval::half_line(), &q), Err(Error::Config(_))));
    }
}
