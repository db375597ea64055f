use std::path::{Path, PathBuf};
use std::str::FromStr;

use gls_core::ggkb::GdagStrategy;
use gls_core::glsqr::NormMethod;
use gls_core::problems::{FunctionKind, RegularizerKind};
use gls_core::wpinv::{GlsProblem, WpinvMethod};
use gls_core::{GlsError, RankTolerance, Result};
use serde::Deserialize;

pub const ENV_TOL_RANK: &str = "WPINV_TOL_RANK";
pub const ENV_TOL_STOP: &str = "WPINV_TOL_STOP";

pub const DEFAULT_TOL_STOP: f64 = 1e-10;
pub const DEFAULT_TOL_MPE: f64 = 1e-9;
pub const DEFAULT_TOL_CERTIFY: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Wpinv,
    Gsvd,
    CheckMpe,
    GenProblem,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Wpinv => "wpinv",
            Self::Gsvd => "gsvd",
            Self::CheckMpe => "check-mpe",
            Self::GenProblem => "gen-problem",
        }
    }
}

/// `dense`, `chol` or `lsqr:τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GdagSpec {
    Dense,
    Chol,
    Lsqr(f64),
}

impl FromStr for GdagSpec {
    type Err = GlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dense" => Ok(Self::Dense),
            "chol" | "cholesky" => Ok(Self::Chol),
            other => {
                let tau = other
                    .strip_prefix("lsqr:")
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| {
                        GlsError::Config(format!("gdag must be dense, chol or lsqr:TAU, got {s:?}"))
                    })?;
                if !(tau > 0.0 && tau < 1.0) {
                    return Err(GlsError::Config(format!("lsqr tau must lie in (0, 1), got {tau}")));
                }
                Ok(Self::Lsqr(tau))
            }
        }
    }
}

impl GdagSpec {
    pub fn build(self, prob: &GlsProblem) -> Result<GdagStrategy> {
        match self {
            Self::Dense => GdagStrategy::dense_pinv(prob),
            Self::Chol => GdagStrategy::cholesky(prob),
            Self::Lsqr(tau) => GdagStrategy::inner_lsqr(tau, 4 * prob.ncols().max(1)),
        }
    }
}

/// `elden`, `gsvd` or `limit:δ`.
pub fn parse_method(s: &str) -> Result<WpinvMethod> {
    match s.trim().to_ascii_lowercase().as_str() {
        "elden" => Ok(WpinvMethod::Elden),
        "gsvd" => Ok(WpinvMethod::Gsvd),
        other => {
            let delta = other
                .strip_prefix("limit:")
                .and_then(|t| t.parse::<f64>().ok())
                .ok_or_else(|| {
                    GlsError::Config(format!("method must be elden, gsvd or limit:DELTA, got {s:?}"))
                })?;
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(GlsError::Config(format!("limit delta must be positive, got {delta}")));
            }
            Ok(WpinvMethod::Limit(delta))
        }
    }
}

pub fn parse_norm(s: &str) -> Result<NormMethod> {
    match s.trim().to_ascii_lowercase().as_str() {
        "auto" => Ok(NormMethod::Auto),
        "gsvd" => Ok(NormMethod::GsvdExact),
        "power" => Ok(NormMethod::PowerIteration),
        _ => Err(GlsError::Config(format!("norm must be auto, gsvd or power, got {s:?}"))),
    }
}

/// Everything a subcommand may read. Every field is optional so that a JSON
/// config file and command-line flags can be layered; `validate` checks that
/// the fields a subcommand needs are present and well-formed.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "A")]
    pub a: Option<PathBuf>,
    #[serde(rename = "M")]
    pub m: Option<PathBuf>,
    #[serde(rename = "L")]
    pub l: Option<PathBuf>,
    pub b: Option<PathBuf>,
    /// Candidate matrix for `check-mpe`.
    #[serde(rename = "X")]
    pub x: Option<PathBuf>,
    pub x_true: Option<PathBuf>,
    pub method: Option<String>,
    pub gdag: Option<String>,
    pub norm: Option<String>,
    pub tol: Option<f64>,
    pub rank_tol: Option<f64>,
    pub certify_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n: Option<usize>,
    pub rows: Option<usize>,
    pub rank: Option<usize>,
    pub density: Option<f64>,
    pub lkind: Option<String>,
    pub func: Option<String>,
    pub true_residual: Option<bool>,
    pub dump_bidiag: Option<bool>,
}

macro_rules! overlay {
    ($top:expr, $base:expr, $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f),)* }
    };
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| GlsError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| GlsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Fields set in `self` win over those in `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        overlay!(
            self, base, a, m, l, b, x, x_true, method, gdag, norm, tol, rank_tol, certify_tol,
            max_iter, seed, out, n, rows, rank, density, lkind, func, true_residual, dump_bidiag
        )
    }

    pub fn validate(&self, cmd: Command) -> Result<()> {
        let need = |v: &Option<PathBuf>, flag: &str| {
            if v.is_none() {
                Err(GlsError::Config(format!("{} requires --{flag}", cmd.name())))
            } else {
                Ok(())
            }
        };
        let positive = |v: Option<f64>, name: &str| match v {
            Some(t) if !(t > 0.0 && t.is_finite()) => {
                Err(GlsError::Config(format!("{name} must be positive, got {t}")))
            }
            _ => Ok(()),
        };
        positive(self.tol, "tol")?;
        positive(self.rank_tol, "rank_tol")?;
        positive(self.certify_tol, "certify_tol")?;
        match cmd {
            Command::Solve => {
                need(&self.a, "A")?;
                need(&self.b, "b")?;
                self.gdag_spec()?;
                self.norm_method()?;
                if self.max_iter == Some(0) {
                    return Err(GlsError::Config("max_iter must be at least 1".into()));
                }
            }
            Command::Wpinv => {
                need(&self.a, "A")?;
                self.wpinv_method()?;
            }
            Command::Gsvd => {
                need(&self.a, "A")?;
            }
            Command::CheckMpe => {
                need(&self.a, "A")?;
                need(&self.x, "X")?;
            }
            Command::GenProblem => {
                if self.a.is_none() && self.n.is_none() {
                    return Err(GlsError::Config("gen-problem requires --n or --A".into()));
                }
                if self.n == Some(0) || self.rows == Some(0) {
                    return Err(GlsError::Config("problem dimensions must be positive".into()));
                }
                if let Some(d) = self.density {
                    if !(d > 0.0 && d <= 1.0) {
                        return Err(GlsError::Config(format!("density must lie in (0, 1], got {d}")));
                    }
                }
                self.regularizer()?;
                self.function()?;
            }
        }
        Ok(())
    }

    pub fn gdag_spec(&self) -> Result<GdagSpec> {
        self.gdag.as_deref().unwrap_or("dense").parse()
    }

    pub fn wpinv_method(&self) -> Result<WpinvMethod> {
        parse_method(self.method.as_deref().unwrap_or("elden"))
    }

    pub fn norm_method(&self) -> Result<NormMethod> {
        parse_norm(self.norm.as_deref().unwrap_or("auto"))
    }

    pub fn regularizer(&self) -> Result<RegularizerKind> {
        self.lkind
            .as_deref()
            .unwrap_or("l1")
            .parse()
            .map_err(|_| GlsError::Config(format!("unknown regularizer {:?}", self.lkind)))
    }

    pub fn function(&self) -> Result<FunctionKind> {
        self.func
            .as_deref()
            .unwrap_or("ramp")
            .parse()
            .map_err(|_| GlsError::Config(format!("unknown function {:?}", self.func)))
    }

    /// Stopping tolerance: explicit value, then `WPINV_TOL_STOP`, then the default.
    pub fn stop_tol(&self) -> Result<f64> {
        match self.tol {
            Some(t) => Ok(t),
            None => Ok(env_f64(ENV_TOL_STOP)?.unwrap_or(DEFAULT_TOL_STOP)),
        }
    }

    /// Relative rank cutoff: explicit value, then `WPINV_TOL_RANK`, then automatic.
    pub fn rank_tolerance(&self) -> Result<RankTolerance> {
        let value = match self.rank_tol {
            Some(t) => Some(t),
            None => env_f64(ENV_TOL_RANK)?,
        };
        match value {
            Some(t) => RankTolerance::relative(t).map_err(|e| GlsError::Config(e.to_string())),
            None => Ok(RankTolerance::Auto),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

fn env_f64(key: &str) -> Result<Option<f64>> {
    match std::env::var(key) {
        Ok(v) => v
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|t| *t > 0.0 && t.is_finite())
            .map(Some)
            .ok_or_else(|| GlsError::Config(format!("{key} must be a positive number, got {v:?}"))),
        Err(_) => Ok(None),
    }
}
