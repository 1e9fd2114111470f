use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer};
use vbspca::diagnosis::IndexKind;
use vbspca::gaussian::GaussianHyper;
use vbspca::laplace::LaplaceHyper;
use vbspca::pipeline::Variant;
use vbspca::var::VarConfig;

use crate::failure::{Failure, Outcome};
use crate::output::read_text;

/// Fixed VAR penalty or cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LambdaSetting {
    #[default]
    CrossValidated,
    Fixed(f64),
}

impl std::str::FromStr for LambdaSetting {
    type Err = Failure;

    fn from_str(s: &str) -> Outcome<Self> {
        if s.eq_ignore_ascii_case("cv") {
            return Ok(LambdaSetting::CrossValidated);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(LambdaSetting::Fixed(v)),
            _ => Err(Failure::input(format!("lambda must be \"cv\" or a non-negative number, got {s:?}"))),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) if v >= 0.0 => Ok(LambdaSetting::Fixed(v)),
            Raw::Number(v) => Err(serde::de::Error::custom(format!("negative lambda {v}"))),
            Raw::Text(s) => s.parse().map_err(|e: Failure| serde::de::Error::custom(e.message)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarSettings {
    pub tau: usize,
    pub lambda: LambdaSetting,
    pub cv_folds: usize,
    pub cv_grid: usize,
}

impl Default for VarSettings {
    fn default() -> Self {
        let d = VarConfig::default();
        Self {
            tau: d.tau,
            lambda: LambdaSetting::CrossValidated,
            cv_folds: d.cv_folds,
            cv_grid: d.cv_grid,
        }
    }
}

impl VarSettings {
    pub fn to_config(&self) -> VarConfig {
        VarConfig {
            tau: self.tau,
            lambda: match self.lambda {
                LambdaSetting::CrossValidated => None,
                LambdaSetting::Fixed(v) => Some(v),
            },
            cv_folds: self.cv_folds,
            cv_grid: self.cv_grid,
        }
    }
}

/// Run configuration file. Relative paths resolve against the file's
/// directory; command-line flags override every field.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Option<Variant>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub gaussian: GaussianHyper,
    pub laplace: LaplaceHyper,
    pub var: VarSettings,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub onset: Option<usize>,
    pub kind: Option<IndexKind>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Outcome<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = read_text(path)?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.train, &mut cfg.test, &mut cfg.model, &mut cfg.out_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Flag value if given, else the configured one, else an input error.
pub fn require(flag: Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Outcome<PathBuf> {
    flag.or_else(|| configured.clone())
        .ok_or_else(|| Failure::input(format!("no {what} given (use --{what} or the config file)")))
}
