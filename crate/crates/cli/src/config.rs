//! Run configuration: JSON file values overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use qbridge_core::{ConstraintFn, ConstraintSet, QIndex, QuadratureSpec, SupportInterval};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON file with any of the settings below
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Entropic index
    #[arg(long, allow_negative_numbers = true)]
    pub q: Option<f64>,

    /// Lagrange multipliers, comma separated or repeated
    #[arg(long = "lambda", value_delimiter = ',', allow_negative_numbers = true)]
    pub lambdas: Vec<f64>,

    /// Constraint observable: identity, square or poly:c0,c1,... (repeat for M > 1)
    #[arg(long = "h", value_name = "KIND")]
    pub h: Vec<String>,

    /// Target means, comma separated or repeated
    #[arg(long = "target", value_delimiter = ',', allow_negative_numbers = true)]
    pub targets: Vec<f64>,

    /// Working domain as lo:hi (inf allowed); finite ends are closed
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,

    /// Integration constant of the general inverse Jacobian
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,

    /// Anchor u(x0) = u0 as x0:u0
    #[arg(long, allow_hyphen_values = true)]
    pub anchor: Option<String>,

    #[arg(long)]
    pub rtol: Option<f64>,

    #[arg(long)]
    pub atol: Option<f64>,

    #[arg(long)]
    pub max_subdivisions: Option<usize>,

    #[arg(long)]
    pub tail_mass_cut: Option<f64>,

    /// Output file; standard output when absent
    #[arg(long, short)]
    pub output: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileQuad {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_subdivisions: Option<usize>,
    pub tail_mass_cut: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub q: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub h: Option<Vec<String>>,
    pub targets: Option<Vec<f64>>,
    pub domain: Option<String>,
    pub grid: Option<String>,
    pub c: Option<f64>,
    pub anchor: Option<[f64; 2]>,
    pub quad: Option<FileQuad>,
    pub seed: Option<u64>,
    pub n_samples: Option<usize>,
    pub tol: Option<f64>,
    pub observable: Option<String>,
    pub escort_q: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }
}

/// Inclusive grid `min:max:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || CliError::Config(format!("grid {s:?} is not min:max:count"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(min.is_finite() && max.is_finite()) || !(min < max) {
            return Err(CliError::Config(format!("grid needs finite min < max, got {s:?}")));
        }
        if count < 2 {
            return Err(CliError::Config(format!("grid needs at least 2 points, got {count}")));
        }
        Ok(Self { min, max, count })
    }

    pub fn points(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.max
                } else {
                    self.min + (self.max - self.min) * i as f64 / last
                }
            })
            .collect()
    }
}

fn parse_bound(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok().filter(|v: &f64| v.is_finite()),
    }
}

pub fn parse_domain(s: &str) -> Result<SupportInterval, CliError> {
    let bad = || CliError::Config(format!("domain {s:?} is not lo:hi"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo = parse_bound(lo).ok_or_else(bad)?;
    let hi = parse_bound(hi).ok_or_else(bad)?;
    Ok(SupportInterval::new(lo, hi, lo.is_finite(), hi.is_finite())?)
}

fn parse_anchor(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Config(format!("anchor {s:?} is not x0:u0"));
    let (x, u) = s.split_once(':').ok_or_else(bad)?;
    let x: f64 = x.trim().parse().map_err(|_| bad())?;
    let u: f64 = u.trim().parse().map_err(|_| bad())?;
    Ok((x, u))
}

/// Fully resolved settings shared by all commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub q: QIndex,
    pub constraints: ConstraintSet,
    pub domain: SupportInterval,
    pub c: f64,
    pub anchor: (f64, f64),
    pub quad: QuadratureSpec,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub file: FileConfig,
}

impl RunConfig {
    /// Merges defaults, then `QBRIDGE_QUAD_RTOL`, then the config file, then flags.
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };

        let q = args
            .q
            .or(file.q)
            .ok_or_else(|| CliError::Config("missing --q".into()))?;
        let q = QIndex::new(q)?;

        let lambdas = if args.lambdas.is_empty() {
            file.lambdas.clone().unwrap_or_default()
        } else {
            args.lambdas.clone()
        };
        let kinds = if args.h.is_empty() {
            file.h.clone().unwrap_or_default()
        } else {
            args.h.clone()
        };
        if kinds.is_empty() {
            return Err(CliError::Config("missing --h".into()));
        }
        let hs = kinds
            .iter()
            .map(|k| k.parse::<ConstraintFn>())
            .collect::<Result<Vec<_>, _>>()?;
        if lambdas.is_empty() {
            return Err(CliError::Config("missing --lambda".into()));
        }
        let mut constraints = ConstraintSet::new(hs, lambdas)?;
        let targets = if args.targets.is_empty() {
            file.targets.clone()
        } else {
            Some(args.targets.clone())
        };
        if let Some(k) = targets {
            constraints = constraints.with_targets(k)?;
        }

        let domain = match args.domain.as_deref().or(file.domain.as_deref()) {
            Some(d) => parse_domain(d)?,
            // even leading degree: the whole line; odd: the half-line
            None if constraints.combined().degree() % 2 == 0 => SupportInterval::real_line(),
            None => SupportInterval::half_line(),
        };

        let c = args.c.or(file.c).unwrap_or(0.0);
        if !c.is_finite() {
            return Err(CliError::Config(format!("c must be finite, got {c}")));
        }
        let anchor = match (&args.anchor, file.anchor) {
            (Some(a), _) => parse_anchor(a)?,
            (None, Some([x, u])) => (x, u),
            (None, None) => (0.0, 0.0),
        };

        let mut quad = QuadratureSpec::from_env()?;
        let fq = file.quad.clone().unwrap_or_default();
        quad.rel_tol = args.rtol.or(fq.rel_tol).unwrap_or(quad.rel_tol);
        quad.abs_tol = args.atol.or(fq.abs_tol).unwrap_or(quad.abs_tol);
        quad.max_subdivisions = args.max_subdivisions.or(fq.max_subdivisions).unwrap_or(quad.max_subdivisions);
        quad.tail_mass_cut = args.tail_mass_cut.or(fq.tail_mass_cut).unwrap_or(quad.tail_mass_cut);
        quad.validate()?;

        Ok(Self {
            q,
            constraints,
            domain,
            c,
            anchor,
            quad,
            output: args.output.clone().or_else(|| file.output.clone()),
            format: args.format.or(file.format),
            file,
        })
    }
}
