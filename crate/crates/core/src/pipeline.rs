//! End-to-end monitoring pipeline: standardize, fit a sparse PCA variant,
//! fit a sparse VAR on the training scores and calibrate control limits.

use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Scaler};
use crate::diagnosis::{rbc_map, IndexKind, RbcMap};
use crate::error::{Error, Result};
use crate::gaussian::{fit_gaussian, GaussianHyper, GaussianModel};
use crate::laplace::{fit_laplace, LaplaceHyper, LaplaceModel};
use crate::monitor::{calibrate, detect, DetectionResult, MonitorProfile};
use crate::var::{fit_var, VarConfig, VarModel};
use nalgebra::DMatrix;

pub const PIPELINE_SCHEMA: &str = "vbspca-pipeline/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Gaussian,
    Laplace,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Gaussian => "gaussian",
            Variant::Laplace => "laplace",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Variant::Gaussian),
            "laplace" => Ok(Variant::Laplace),
            other => Err(Error::invalid(format!("unknown variant {other:?}, expected gaussian or laplace"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub variant: Variant,
    pub gaussian: GaussianHyper,
    pub laplace: LaplaceHyper,
    pub var: VarConfig,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Gaussian,
            gaussian: GaussianHyper::default(),
            laplace: LaplaceHyper::default(),
            var: VarConfig::default(),
            alpha: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum FittedModel {
    Gaussian(GaussianModel),
    Laplace(LaplaceModel),
}

impl FittedModel {
    pub fn loading(&self) -> &DMatrix<f64> {
        match self {
            FittedModel::Gaussian(m) => &m.loading,
            FittedModel::Laplace(m) => &m.loading,
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            FittedModel::Gaussian(m) => m.diagnostics.converged,
            FittedModel::Laplace(m) => m.diagnostics.converged,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            FittedModel::Gaussian(m) => m.diagnostics.iterations,
            FittedModel::Laplace(m) => m.diagnostics.iterations,
        }
    }

    pub fn trace(&self) -> &[f64] {
        match self {
            FittedModel::Gaussian(m) => &m.diagnostics.trace,
            FittedModel::Laplace(m) => &m.diagnostics.trace,
        }
    }

    pub fn noise_precision(&self) -> f64 {
        match self {
            FittedModel::Gaussian(m) => m.noise_precision,
            FittedModel::Laplace(m) => m.noise_precision,
        }
    }
}

/// Everything needed to monitor new data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub schema: String,
    pub config: TrainConfig,
    pub scaler: Scaler,
    pub model: FittedModel,
    pub var: VarModel,
    pub profile: MonitorProfile,
}

/// Summary of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub variant: Variant,
    pub rank: usize,
    pub converged: bool,
    pub iterations: usize,
    /// ELBO per sweep (Gaussian) or largest relative change per sweep
    /// (Laplace).
    pub trace: Vec<f64>,
    pub noise_precision: f64,
    pub tau: usize,
    pub lambda: f64,
    pub var_nonzeros: usize,
    pub alpha: f64,
    pub t2_limit: f64,
    pub spe_limit: f64,
}

impl Pipeline {
    pub fn loading(&self) -> &DMatrix<f64> {
        self.model.loading()
    }

    pub fn rank(&self) -> usize {
        self.loading().ncols()
    }

    pub fn report(&self) -> TrainReport {
        TrainReport {
            variant: self.config.variant,
            rank: self.rank(),
            converged: self.model.converged(),
            iterations: self.model.iterations(),
            trace: self.model.trace().to_vec(),
            noise_precision: self.model.noise_precision(),
            tau: self.var.tau,
            lambda: self.var.lambda,
            var_nonzeros: self.var.nonzeros(),
            alpha: self.profile.alpha,
            t2_limit: self.profile.t2_limit,
            spe_limit: self.profile.spe_limit,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        if p.schema != PIPELINE_SCHEMA {
            return Err(Error::invalid(format!("unsupported schema {:?}", p.schema)));
        }
        Ok(p)
    }

    /// Standardizes raw data with the training scaler.
    pub fn standardize(&self, raw: &DataMatrix) -> Result<DataMatrix> {
        self.scaler.apply(raw)
    }

    pub fn detect(&self, raw_test: &DataMatrix, onset: usize) -> Result<DetectionResult> {
        let y = self.standardize(raw_test)?;
        detect(&self.profile, self.loading(), &self.var, &y, onset)
    }

    pub fn diagnose(&self, raw_test: &DataMatrix, kind: IndexKind) -> Result<RbcMap> {
        let y = self.standardize(raw_test)?;
        rbc_map(&y, self.loading(), &self.profile.lambda_diag, kind)
    }
}

/// Fits the full pipeline on raw training data.
pub fn train(raw: &DataMatrix, cfg: &TrainConfig) -> Result<Pipeline> {
    let scaler = Scaler::fit(raw)?;
    let x = scaler.apply(raw)?;
    let model = match cfg.variant {
        Variant::Gaussian => FittedModel::Gaussian(fit_gaussian(&x, &cfg.gaussian, cfg.seed)?),
        Variant::Laplace => FittedModel::Laplace(fit_laplace(&x, &cfg.laplace, cfg.seed)?),
    };
    let loading = model.loading();
    let scores = loading.tr_mul(x.values());
    let var = fit_var(&scores, &cfg.var)?;
    let profile = calibrate(loading, &var, &x, cfg.alpha)?;
    log::info!(
        "trained {} pipeline: rank {}, lambda {:.3e}, limits T2 {:.4} SPE {:.4}",
        cfg.variant,
        loading.ncols(),
        var.lambda,
        profile.t2_limit,
        profile.spe_limit
    );
    Ok(Pipeline {
        schema: PIPELINE_SCHEMA.into(),
        config: cfg.clone(),
        scaler,
        model,
        var,
        profile,
    })
}
