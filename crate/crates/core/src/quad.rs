//! Globally adaptive Gauss-Kronrod (10/21) quadrature.
//!
//! Integrands may be vector valued: all components are evaluated on the same
//! nodes and share one subdivision pattern, so ratios of components are exact
//! at the discretization level. Infinite endpoints are mapped onto `[0, 1)`
//! with `x = a + t/(1-t)`.

use std::env;

use crate::error::{Error, Result};
use crate::qkernel::SupportInterval;

/// Environment variable overriding the default relative tolerance.
pub const RTOL_ENV: &str = "QBRIDGE_QUAD_RTOL";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Tail segments of a mapped infinite interval whose total mass (estimate
    /// plus error) falls below this are accepted without further refinement.
    pub tail_mass_cut: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            max_subdivisions: 2000,
            tail_mass_cut: 1e-12,
        }
    }
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize, tail_mass_cut: f64) -> Result<Self> {
        let spec = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
            tail_mass_cut,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Defaults with the relative tolerance taken from `QBRIDGE_QUAD_RTOL`
    /// when that is set.
    pub fn from_env() -> Result<Self> {
        let mut spec = Self::default();
        if let Ok(raw) = env::var(RTOL_ENV) {
            spec.rel_tol = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{RTOL_ENV}={raw:?} is not a number")))?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Config(format!(
                "quadrature tolerances must be positive (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_subdivisions < 16 {
            return Err(Error::Config(format!(
                "max_subdivisions must be at least 16, got {}",
                self.max_subdivisions
            )));
        }
        if !(self.tail_mass_cut > 0.0 && self.tail_mass_cut <= 1e-10) {
            return Err(Error::Config(format!(
                "tail_mass_cut must lie in (0, 1e-10], got {}",
                self.tail_mass_cut
            )));
        }
        Ok(())
    }

    /// Same spec with both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            max_subdivisions: self.max_subdivisions * 4,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub subdivisions: usize,
    pub evaluations: usize,
}

// Kronrod abscissae and weights; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_600_525_468,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mapping {
    Identity,
    /// `x = origin + t/(1-t)`, t in [0, 1)
    Right { origin: f64 },
    /// `x = origin - t/(1-t)`, t in [0, 1)
    Left { origin: f64 },
}

impl Mapping {
    #[inline]
    fn apply(self, t: f64) -> (f64, f64) {
        match self {
            Mapping::Identity => (t, 1.0),
            Mapping::Right { origin } => {
                let s = 1.0 - t;
                (origin + t / s, 1.0 / (s * s))
            }
            Mapping::Left { origin } => {
                let s = 1.0 - t;
                (origin - t / s, 1.0 / (s * s))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    map: Mapping,
    value: [f64; N],
    error: [f64; N],
    settled: bool,
    splittable: bool,
}

fn kronrod21<const N: usize, F>(f: &F, map: Mapping, a: f64, b: f64) -> Result<([f64; N], [f64; N])>
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |t: f64| -> Result<[f64; N]> {
        let (x, w) = map.apply(t);
        let mut v = f(x);
        for c in v.iter_mut() {
            *c *= w;
            if !c.is_finite() {
                return Err(Error::NonFiniteIntegrand { x });
            }
        }
        Ok(v)
    };

    let mut fvals = [[0.0; N]; 21];
    fvals[10] = eval(center)?;
    for j in 0..10 {
        let dx = half * XGK[j];
        fvals[j] = eval(center - dx)?;
        fvals[20 - j] = eval(center + dx)?;
    }

    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for k in 0..N {
        let mut resk = WGK[10] * fvals[10][k];
        let mut resg = 0.0;
        let mut resabs = WGK[10] * fvals[10][k].abs();
        for j in 0..10 {
            let pair = fvals[j][k] + fvals[20 - j][k];
            resk += WGK[j] * pair;
            resabs += WGK[j] * (fvals[j][k].abs() + fvals[20 - j][k].abs());
            if j % 2 == 1 {
                resg += WG[j / 2] * pair;
            }
        }
        let mean = 0.5 * resk;
        let mut resasc = WGK[10] * (fvals[10][k] - mean).abs();
        for j in 0..10 {
            resasc += WGK[j] * ((fvals[j][k] - mean).abs() + (fvals[20 - j][k] - mean).abs());
        }
        let hl = half.abs();
        let (resk, resabs, resasc) = (resk * half, resabs * hl, resasc * hl);
        let mut err = (resk - resg * half).abs();
        if resasc != 0.0 && err != 0.0 {
            err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * resabs);
        }
        value[k] = resk;
        error[k] = err;
    }
    Ok((value, error))
}

/// Integrates a vector-valued function over `interval`.
pub fn integrate_vec<const N: usize, F>(
    f: F,
    interval: &SupportInterval,
    spec: &QuadratureSpec,
) -> Result<QuadEstimate<N>>
where
    F: Fn(f64) -> [f64; N],
{
    spec.validate()?;
    let (lo, hi) = (interval.lower(), interval.upper());
    let initial: Vec<(f64, f64, Mapping)> = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => vec![(lo, hi, Mapping::Identity)],
        (true, false) => vec![(0.0, 1.0, Mapping::Right { origin: lo })],
        (false, true) => vec![(0.0, 1.0, Mapping::Left { origin: hi })],
        (false, false) => vec![
            (0.0, 1.0, Mapping::Left { origin: 0.0 }),
            (0.0, 1.0, Mapping::Right { origin: 0.0 }),
        ],
    };

    let mut evaluations = 0;
    let mut segments = Vec::with_capacity(64);
    for (a, b, map) in initial {
        segments.push(make_segment(&f, map, a, b, spec)?);
        evaluations += 21;
    }

    let mut subdivisions = 0;
    loop {
        let (value, error) = totals(&segments);
        let tol: [f64; N] = std::array::from_fn(|k| spec.abs_tol.max(spec.rel_tol * value[k].abs()));
        if (0..N).all(|k| error[k] <= tol[k]) {
            return Ok(QuadEstimate {
                value,
                error,
                subdivisions,
                evaluations,
            });
        }

        // refine the segment contributing the largest tolerance-scaled error
        let pick = segments
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.settled && s.splittable)
            .map(|(i, s)| {
                let score = (0..N).map(|k| s.error[k] / tol[k]).fold(0.0, f64::max);
                (i, score)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1));

        let Some((idx, _)) = pick else {
            return Err(quad_failure(&value, &error, subdivisions));
        };
        if subdivisions >= spec.max_subdivisions {
            return Err(quad_failure(&value, &error, subdivisions));
        }

        let seg = segments.swap_remove(idx);
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            segments.push(Segment {
                splittable: false,
                ..seg
            });
            continue;
        }
        segments.push(make_segment(&f, seg.map, seg.a, mid, spec)?);
        segments.push(make_segment(&f, seg.map, mid, seg.b, spec)?);
        evaluations += 42;
        subdivisions += 1;
    }
}

fn make_segment<const N: usize, F>(
    f: &F,
    map: Mapping,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Segment<N>>
where
    F: Fn(f64) -> [f64; N],
{
    let (value, error) = kronrod21(f, map, a, b)?;
    // only refined tail pieces qualify, so a coarse first pass cannot settle a
    // whole half-line whose mass sits between the nodes
    let touches_infinity = map != Mapping::Identity && b == 1.0 && b - a <= 0.25;
    let mass = (0..N).map(|k| value[k].abs() + error[k]).fold(0.0, f64::max);
    Ok(Segment {
        a,
        b,
        map,
        value,
        error,
        settled: touches_infinity && mass < spec.tail_mass_cut,
        splittable: true,
    })
}

fn totals<const N: usize>(segments: &[Segment<N>]) -> ([f64; N], [f64; N]) {
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for s in segments {
        for k in 0..N {
            value[k] += s.value[k];
            if !s.settled {
                error[k] += s.error[k];
            }
        }
    }
    (value, error)
}

fn quad_failure<const N: usize>(value: &[f64; N], error: &[f64; N], subdivisions: usize) -> Error {
    let worst = (0..N).max_by(|&i, &j| error[i].total_cmp(&error[j])).unwrap_or(0);
    Error::Quadrature {
        estimate: value[worst],
        error: error[worst],
        subdivisions,
    }
}

/// Scalar adaptive integration of `f` over `interval`.
pub fn integrate<F>(f: F, interval: &SupportInterval, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate_vec(|x| [f(x)], interval, spec).map(|e| e.value[0])
}

/// `integrate` over `[a, b]` with orientation: returns `-∫_b^a` when `b < a`.
pub fn integrate_between<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let iv = SupportInterval::closed(lo, hi)?;
    Ok(sign * integrate(f, &iv, spec)?)
}
