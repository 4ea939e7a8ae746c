//! Dense real polynomials with a bracketing real-root finder.

use std::fmt;

/// Coefficients in ascending order: `c[0] + c[1] x + c[2] x^2 + ...`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree of the polynomial; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::constant(0.0);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        Polynomial::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(0.0)
                        + other.coeffs.get(k).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }

    /// Sign of `p(x)` as `x -> +inf` (`dir > 0`) or `x -> -inf` (`dir < 0`);
    /// zero for the zero polynomial.
    pub fn sign_at_infinity(&self, dir: f64) -> f64 {
        let lead = self.leading();
        if lead == 0.0 {
            return 0.0;
        }
        let odd = self.degree() % 2 == 1;
        if dir < 0.0 && odd {
            -lead.signum()
        } else {
            lead.signum()
        }
    }

    /// Infimum and supremum over the interval between `lower` and `upper`;
    /// infinite ends contribute the limit at infinity.
    pub fn range_on(&self, lower: f64, upper: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut visit = |v: f64| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        for (end, dir) in [(lower, -1.0), (upper, 1.0)] {
            if end.is_finite() {
                visit(self.eval(end));
            } else if self.degree() == 0 {
                visit(self.coeffs[0]);
            } else {
                visit(self.sign_at_infinity(dir) * f64::INFINITY);
            }
        }
        for r in self.derivative().real_roots() {
            if r > lower && r < upper {
                visit(self.eval(r));
            }
        }
        (lo, hi)
    }

    /// Cauchy bound: every real root satisfies `|x| <= bound`.
    fn root_bound(&self) -> f64 {
        let lead = self.leading();
        1.0 + self.coeffs[..self.degree()]
            .iter()
            .map(|c| (c / lead).abs())
            .fold(0.0, f64::max)
    }

    /// Distinct real roots in ascending order.
    ///
    /// Degrees one and two use closed forms. Higher degrees are split into
    /// monotone pieces at the roots of the derivative, and each piece with a
    /// sign change is bisected to full precision. A root where the polynomial
    /// touches zero without crossing is found only if it evaluates to exactly
    /// zero at a critical point.
    pub fn real_roots(&self) -> Vec<f64> {
        match self.degree() {
            0 => Vec::new(),
            1 => vec![-self.coeffs[0] / self.coeffs[1]],
            2 => quadratic_roots(self.coeffs[2], self.coeffs[1], self.coeffs[0]),
            _ => {
                let bound = self.root_bound();
                let mut knots = vec![-bound];
                knots.extend(
                    self.derivative()
                        .real_roots()
                        .into_iter()
                        .filter(|r| r.abs() < bound),
                );
                knots.push(bound);
                let mut roots = Vec::new();
                for w in knots.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let (fa, fb) = (self.eval(a), self.eval(b));
                    if fa == 0.0 {
                        push_distinct(&mut roots, a);
                    }
                    if fa * fb < 0.0 {
                        push_distinct(&mut roots, bisect(|x| self.eval(x), a, b, fa));
                    }
                }
                let last = *knots.last().unwrap();
                if self.eval(last) == 0.0 {
                    push_distinct(&mut roots, last);
                }
                roots
            }
        }
    }
}

fn push_distinct(roots: &mut Vec<f64>, r: f64) {
    if roots.last() != Some(&r) {
        roots.push(r);
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![-b / (2.0 * a)];
    }
    // avoids cancellation in -b +/- sqrt(disc)
    let sign_b = if b < 0.0 { -1.0 } else { 1.0 };
    let t = -0.5 * (b + sign_b * disc.sqrt());
    let (mut r1, mut r2) = (t / a, c / t);
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    vec![r1, r2]
}

/// Bisection on a bracket with `f(a) * f(b) < 0`, run until the midpoint
/// coincides with an endpoint.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    loop {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            return if f(a).abs() <= f(b).abs() { a } else { b };
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, c)| match k {
                0 => format!("{c}"),
                1 => format!("{c}*x"),
                _ => format!("{c}*x^{k}"),
            })
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}
