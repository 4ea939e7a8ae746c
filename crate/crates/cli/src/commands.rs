//! The five subcommands.

use qbridge_core::averaging::{averages, Observable};
use qbridge_core::maxent::{
    normalize_tsallis, sample_and_test, solve_ode_numeric, solve_shannon, verify_transport, LinearODE,
    ShannonSolution, TsallisSolution,
};
use qbridge_core::{ConstraintFn, Density, Error, QIndex, SupportInterval, TransformMap, TransformSpec};
use serde::Serialize;

use crate::config::{Format, Grid, RunConfig};
use crate::output::{emit, records_csv, to_json, OutputRecord, SCHEMA_VERSION};
use crate::CliError;

const DEFAULT_POINTS: usize = 200;
const DEFAULT_CLIP: f64 = 10.0;

fn build_map(cfg: &RunConfig) -> Result<TransformMap, CliError> {
    let spec = TransformSpec::new(cfg.q, cfg.constraints.clone())?
        .with_anchor(cfg.anchor.0, cfg.anchor.1)?
        .with_c(cfg.c);
    Ok(TransformMap::new(spec, cfg.quad)?)
}

fn solutions(cfg: &RunConfig) -> Result<(ShannonSolution, TsallisSolution), CliError> {
    let s = ShannonSolution::with_multipliers(cfg.constraints.clone(), cfg.domain, &cfg.quad)?;
    let t = normalize_tsallis(cfg.q, cfg.constraints.clone(), cfg.domain, &cfg.quad)?;
    Ok((s, t))
}

/// Points strictly inside `support`, clipped to `[-10, 10]`.
fn default_grid(support: SupportInterval) -> Vec<f64> {
    let lo = support.lower().max(-DEFAULT_CLIP);
    let hi = support.upper().min(DEFAULT_CLIP);
    (0..DEFAULT_POINTS)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / DEFAULT_POINTS as f64)
        .collect()
}

/// The requested grid restricted to `support`, warning about dropped points.
fn resolve_grid(flag: Option<&str>, cfg: &RunConfig, support: SupportInterval) -> Result<Vec<f64>, CliError> {
    let Some(spec) = flag.or(cfg.file.grid.as_deref()) else {
        return Ok(default_grid(support));
    };
    let all = Grid::parse(spec)?.points();
    let kept: Vec<f64> = all.iter().copied().filter(|&x| support.contains(x)).collect();
    if kept.is_empty() {
        return Err(Error::Domain(format!("no point of grid {spec} lies in the support {support}")).into());
    }
    if kept.len() < all.len() {
        eprintln!(
            "warning: grid clipped to the support {support}: {} of {} points dropped",
            all.len() - kept.len(),
            all.len()
        );
    }
    Ok(kept)
}

#[derive(Serialize)]
struct TransformJson<'a> {
    schema_version: u32,
    q: f64,
    lambda: &'a [f64],
    h: Vec<String>,
    rows: &'a [OutputRecord],
}

pub fn transform(cfg: &RunConfig, grid: Option<&str>) -> Result<(), CliError> {
    let map = build_map(cfg)?;
    let (s, t) = solutions(cfg)?;
    let points = resolve_grid(grid, cfg, t.support())?;
    let report = verify_transport(&s, &t, &map, &points, f64::INFINITY)?;
    let rows: Vec<OutputRecord> = report
        .points
        .iter()
        .map(|p| OutputRecord {
            x: p.x,
            g: p.g,
            j: 1.0 / p.g,
            u: p.u,
            p_tsallis: p.p_tsallis,
            p_shannon_pushforward: p.p_pushforward,
            transport_residual: p.residual,
        })
        .collect();
    if let Some(bad) = rows.iter().find(|r| !r.is_finite()) {
        return Err(Error::Domain(format!("non-finite table entry at x = {}", bad.x)).into());
    }
    let body = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => records_csv(&rows),
        Format::Json => to_json(&TransformJson {
            schema_version: SCHEMA_VERSION,
            q: cfg.q.value(),
            lambda: cfg.constraints.multipliers(),
            h: cfg.constraints.constraints().iter().map(|h| h.to_string()).collect(),
            rows: &rows,
        })?,
    };
    emit(cfg.output.as_deref(), &body)
}

#[derive(Serialize)]
struct ShannonJson<'a> {
    schema_version: u32,
    lambda: &'a [f64],
    mu: f64,
    targets: Option<&'a [f64]>,
    domain: String,
    iterations: usize,
}

pub fn solve(cfg: &RunConfig) -> Result<(), CliError> {
    reject_csv(cfg, "solve-shannon")?;
    let sol = solve_shannon(&cfg.constraints, cfg.domain, &cfg.quad)?;
    let body = to_json(&ShannonJson {
        schema_version: SCHEMA_VERSION,
        lambda: sol.multipliers(),
        mu: sol.mu(),
        targets: sol.constraints().targets(),
        domain: sol.domain().to_string(),
        iterations: sol.iterations(),
    })?;
    emit(cfg.output.as_deref(), &body)
}

fn reject_csv(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    if cfg.format == Some(Format::Csv) {
        return Err(CliError::Config(format!("{command} writes JSON only")));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            threshold,
            passed: value < threshold,
        }
    }

    fn holds(name: &'static str, violations: usize) -> Self {
        Self {
            name,
            value: violations as f64,
            threshold: 1.0,
            passed: violations == 0,
        }
    }
}

#[derive(Serialize)]
struct VerifyJson<'a> {
    schema_version: u32,
    q: f64,
    lambda: &'a [f64],
    h: Vec<String>,
    grid_points: usize,
    passed: bool,
    checks: &'a [Check],
}

/// End of the numerical ODE run: 90% of the way to a finite support edge, or
/// the far end of the grid when the support is unbounded.
fn ode_end(map: &TransformMap, grid: &[f64]) -> f64 {
    let (x0, _) = map.spec().anchor();
    let sup = map.support();
    if sup.upper().is_finite() {
        x0 + 0.9 * (sup.upper() - x0)
    } else if sup.lower().is_finite() {
        x0 + 0.9 * (sup.lower() - x0)
    } else {
        grid.iter().copied().fold(x0, |a, x| if (x - x0).abs() > (a - x0).abs() { x } else { a })
    }
}

pub fn verify(cfg: &RunConfig, grid: Option<&str>, tol: Option<f64>) -> Result<(), CliError> {
    reject_csv(cfg, "verify")?;
    let tol = tol.or(cfg.file.tol).unwrap_or(1e-6);
    if !(tol > 0.0) {
        return Err(CliError::Config(format!("tolerance must be positive, got {tol}")));
    }
    let map = build_map(cfg)?;
    let (s, t) = solutions(cfg)?;
    let points = resolve_grid(grid, cfg, t.support())?;
    let spec = map.spec();
    let q = cfg.q.value();
    let mut checks = Vec::new();

    let step = 1e-6;
    let (mut analytic, mut fd, mut sign_violations, mut inverse) = (0.0f64, 0.0f64, 0usize, 0.0f64);
    for &x in &points {
        let g = map.g(x)?;
        let slope = spec.g_canonical_slope(x);
        let fd_slope = (map.g(x + step)? - map.g(x - step)?) / (2.0 * step);
        if spec.c() == 0.0 {
            analytic = analytic.max(spec.ode_residual(x, g, slope)?.abs());
            if cfg.constraints.dot(x) > -1.0 && spec.g_canonical(x).signum() != (2.0 - q).signum() {
                sign_violations += 1;
            }
        }
        fd = fd.max(spec.ode_residual(x, g, fd_slope)?.abs());
        inverse = inverse.max((g * map.jacobian(x)? - 1.0).abs());
    }
    if spec.c() == 0.0 {
        checks.push(Check::below("ode_residual_analytic_slope", analytic, 1e-10));
    }
    checks.push(Check::below("ode_residual_fd_slope", fd, 1e-5));

    let end = ode_end(&map, &points);
    let (x0, _) = spec.anchor();
    if end != x0 {
        let ode = LinearODE::for_transform(spec).with_initial(x0, map.g(x0)?);
        let mut worst = 0.0f64;
        for (x, g) in solve_ode_numeric(&ode, end, 2000)? {
            worst = worst.max((g - map.g(x)?).abs());
        }
        checks.push(Check::below("ode_numeric_vs_closed_form", worst, 1e-7));
    }
    checks.push(Check::below("g_times_jacobian_minus_one", inverse, 1e-14));
    if spec.c() == 0.0 {
        checks.push(Check::holds("sign_law_violations", sign_violations));
    }

    let report = verify_transport(&s, &t, &map, &points, tol)?;
    checks.push(Check::below("transport_max_residual", report.max_abs_residual, tol));
    if let Some(f) = report.pushforward_factor_residual {
        checks.push(Check::below("pushforward_factor_residual", f, 1e-10));
    }

    let mut round_trip = 0.0f64;
    for p in &report.points {
        round_trip = round_trip.max((map.x_of_u(p.u)? - p.x).abs());
    }
    checks.push(Check::below("round_trip_max_error", round_trip, 1e-9));

    let passed = checks.iter().all(|c| c.passed);
    for c in &checks {
        eprintln!(
            "{} {}: {:.3e} (threshold {:.1e})",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    let body = to_json(&VerifyJson {
        schema_version: SCHEMA_VERSION,
        q,
        lambda: cfg.constraints.multipliers(),
        h: cfg.constraints.constraints().iter().map(|h| h.to_string()).collect(),
        grid_points: points.len(),
        passed,
        checks: &checks,
    })?;
    emit(cfg.output.as_deref(), &body)?;
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}

#[derive(Serialize)]
struct SampleJson<'a> {
    schema_version: u32,
    q: f64,
    lambda: f64,
    n: usize,
    seed: u64,
    ks_statistic: f64,
    samples: &'a [f64],
}

pub fn sample(cfg: &RunConfig, n: Option<usize>, seed: Option<u64>) -> Result<(), CliError> {
    let n = n.or(cfg.file.n_samples).unwrap_or(10_000);
    let seed = seed.or(cfg.file.seed).unwrap_or(0);
    let map = build_map(cfg)?;
    let t = normalize_tsallis(cfg.q, cfg.constraints.clone(), cfg.domain, &cfg.quad)?;
    let report = sample_and_test(&t, &map, n, seed)?;
    let body = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&SampleJson {
            schema_version: SCHEMA_VERSION,
            q: cfg.q.value(),
            lambda: cfg.constraints.multipliers()[0],
            n,
            seed,
            ks_statistic: report.ks_statistic,
            samples: &report.samples,
        })?,
        Format::Csv => {
            eprintln!("ks_statistic: {}", report.ks_statistic);
            let mut s = String::from("x\n");
            for x in &report.samples {
                s.push_str(&crate::output::fmt_num(*x));
                s.push('\n');
            }
            s
        }
    };
    emit(cfg.output.as_deref(), &body)
}

#[derive(Serialize)]
struct AveragesJson {
    schema_version: u32,
    q: f64,
    escort_q: f64,
    observable: String,
    linear: f64,
    ct: f64,
    tmp: f64,
    x_q: f64,
}

fn parse_observable(s: &str) -> Result<Observable, CliError> {
    if s.trim() == "one" {
        return Ok(Observable::one());
    }
    let h: ConstraintFn = s.parse()?;
    Ok(Observable::new(h.to_string(), move |x| h.value(x)))
}

pub fn average(cfg: &RunConfig, observable: Option<&str>, escort_q: Option<f64>) -> Result<(), CliError> {
    reject_csv(cfg, "averages")?;
    let obs = parse_observable(observable.or(cfg.file.observable.as_deref()).unwrap_or("identity"))?;
    let escort_q = match escort_q.or(cfg.file.escort_q) {
        Some(v) => QIndex::new(v)?,
        None => cfg.q,
    };
    let t = normalize_tsallis(cfg.q, cfg.constraints.clone(), cfg.domain, &cfg.quad)?;
    let a = averages(&t, &obs, escort_q, &cfg.quad)?;
    let body = to_json(&AveragesJson {
        schema_version: SCHEMA_VERSION,
        q: cfg.q.value(),
        escort_q: escort_q.value(),
        observable: obs.label().to_string(),
        linear: a.linear,
        ct: a.ct,
        tmp: a.tmp,
        x_q: a.x_q,
    })?;
    emit(cfg.output.as_deref(), &body)
}
