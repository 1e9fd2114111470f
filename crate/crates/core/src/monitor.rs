//! T² and SPE monitoring with kernel-density control limits.
//!
//! Test samples are projected onto the loading, the VAR model predicts the
//! current latent scores from the previous `τ` projections, and
//! `T² = Σ_j λ_j t̂_j²` with `λ_j` the inverse training variance of `t̂_j`.
//! `SPE = ‖(I − P Pᵀ) y‖²` is computed on the standardized measurement.
//! Control limits are the `α` quantiles of Gaussian-kernel density estimates
//! of the training statistics.
//!
//! Sample indices in results are 1-based. The first `τ` samples of any
//! window have no lag history and produce no statistic ("warm-up").

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::var::{predict_series, VarModel};

/// Minimum number of training statistics for a density estimate.
pub const MIN_KDE_SAMPLES: usize = 30;

/// Consecutive alarms needed to declare detection.
pub const DETECTION_RUN: usize = 3;

/// Gaussian kernel density estimate of a scalar sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde {
    pub samples: Vec<f64>,
    pub bandwidth: f64,
}

/// Silverman's rule `1.06 σ̂ L^{−1/5}`, floored for constant samples.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = if samples.len() > 1 {
        (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let h = 1.06 * sd * n.powf(-0.2);
    h.max(1e-6 * mean.abs().max(1.0))
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl Kde {
    pub fn fit(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, found: 0 });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("density sample contains non-finite values"));
        }
        Ok(Self {
            samples: samples.to_vec(),
            bandwidth: silverman_bandwidth(samples),
        })
    }

    pub fn pdf(&self, v: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / (self.samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
        norm * self
            .samples
            .iter()
            .map(|x| (-0.5 * ((v - x) / h).powi(2)).exp())
            .sum::<f64>()
    }

    pub fn cdf(&self, v: f64) -> f64 {
        let h = self.bandwidth;
        self.samples.iter().map(|x| normal_cdf((v - x) / h)).sum::<f64>() / self.samples.len() as f64
    }

    fn range(&self) -> (f64, f64) {
        let lo = self.samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Smallest `v` with `cdf(v) ≥ alpha`, by bisection.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 1)")));
        }
        let (min, max) = self.range();
        let (mut lo, mut hi) = (min - 40.0 * self.bandwidth, max + 40.0 * self.bandwidth);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) >= alpha {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Trapezoid integral of the density over the sample range widened by
    /// `6h` on each side.
    pub fn total_mass(&self, steps: usize) -> f64 {
        let (min, max) = self.range();
        let (a, b) = (min - 6.0 * self.bandwidth, max + 6.0 * self.bandwidth);
        let dx = (b - a) / steps as f64;
        let mut acc = 0.5 * (self.pdf(a) + self.pdf(b));
        for k in 1..steps {
            acc += self.pdf(a + k as f64 * dx);
        }
        acc * dx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorProfile {
    pub lambda_diag: Vec<f64>,
    pub t2_limit: f64,
    pub spe_limit: f64,
    pub alpha: f64,
    pub bandwidth_t2: f64,
    pub bandwidth_spe: f64,
}

/// A profile together with the densities its limits came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub profile: MonitorProfile,
    pub t2_kde: Kde,
    pub spe_kde: Kde,
}

pub fn t2_statistic(t_hat: &DVector<f64>, profile: &MonitorProfile) -> Result<f64> {
    if t_hat.len() != profile.lambda_diag.len() {
        return Err(Error::dim(format!(
            "score of length {} for a profile of rank {}",
            t_hat.len(),
            profile.lambda_diag.len()
        )));
    }
    Ok(t_hat.iter().zip(&profile.lambda_diag).map(|(t, l)| l * t * t).sum())
}

pub fn spe_statistic(y: &DVector<f64>, loading: &DMatrix<f64>) -> Result<f64> {
    if y.len() != loading.nrows() {
        return Err(Error::dim(format!(
            "sample of length {} for a loading over {} sensors",
            y.len(),
            loading.nrows()
        )));
    }
    let resid = y - loading * loading.tr_mul(y);
    Ok(resid.norm_squared())
}

/// Scores `Pᵀ y_k` of every sample as columns (r × n).
fn project_all(loading: &DMatrix<f64>, y: &DataMatrix) -> Result<DMatrix<f64>> {
    if y.n_sensors() != loading.nrows() {
        return Err(Error::dim(format!(
            "data has {} sensors, loading has {}",
            y.n_sensors(),
            loading.nrows()
        )));
    }
    Ok(loading.tr_mul(y.values()))
}

fn check_var(loading: &DMatrix<f64>, var: &VarModel) -> Result<()> {
    if var.r != loading.ncols() {
        return Err(Error::dim(format!(
            "VAR model has dimension {}, loading has rank {}",
            var.r,
            loading.ncols()
        )));
    }
    Ok(())
}

/// Fits `Λ` and both control limits on standardized training data.
pub fn calibrate(loading: &DMatrix<f64>, var: &VarModel, x_train: &DataMatrix, alpha: f64) -> Result<MonitorProfile> {
    calibrate_detailed(loading, var, x_train, alpha).map(|c| c.profile)
}

pub fn calibrate_detailed(
    loading: &DMatrix<f64>,
    var: &VarModel,
    x_train: &DataMatrix,
    alpha: f64,
) -> Result<Calibration> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    check_var(loading, var)?;
    let len = x_train.n_samples();
    if len <= var.tau + MIN_KDE_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: var.tau + MIN_KDE_SAMPLES + 1,
            found: len,
        });
    }
    let scores = project_all(loading, x_train)?;
    let pred = predict_series(var, &scores)?;
    let count = pred.ncols() as f64;
    let mut lambda_diag = Vec::with_capacity(var.r);
    for (j, row) in pred.row_iter().enumerate() {
        let mean = row.mean();
        let variance = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
        if !(variance > 1e-14 * (1.0 + mean * mean)) {
            return Err(Error::Degenerate(format!("predicted latent component {} has zero variance", j + 1)));
        }
        lambda_diag.push(1.0 / variance);
    }
    let mut profile = MonitorProfile {
        lambda_diag,
        t2_limit: 0.0,
        spe_limit: 0.0,
        alpha,
        bandwidth_t2: 0.0,
        bandwidth_spe: 0.0,
    };
    let mut t2 = Vec::with_capacity(pred.ncols());
    let mut spe = Vec::with_capacity(pred.ncols());
    for (c, k) in (var.tau..len).enumerate() {
        t2.push(t2_statistic(&pred.column(c).into_owned(), &profile)?);
        spe.push(spe_statistic(&x_train.sample(k), loading)?);
    }
    let t2_kde = Kde::fit(&t2)?;
    let spe_kde = Kde::fit(&spe)?;
    profile.t2_limit = t2_kde.quantile(alpha)?;
    profile.spe_limit = spe_kde.quantile(alpha)?;
    profile.bandwidth_t2 = t2_kde.bandwidth;
    profile.bandwidth_spe = spe_kde.bandwidth;
    Ok(Calibration {
        profile,
        t2_kde,
        spe_kde,
    })
}

/// Alarm rates and detection delay for one alarm sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmMetrics {
    /// Alarm fraction over monitored samples before the onset; absent when
    /// there are none.
    pub far: Option<f64>,
    /// Alarm fraction over samples at or after the onset; absent when there
    /// are none.
    pub fdr: Option<f64>,
    /// Samples from the onset to the start of the first run of
    /// [`DETECTION_RUN`] consecutive alarms, or −1.
    pub delay: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Per sample; `NaN` during warm-up.
    pub t2_series: Vec<f64>,
    pub spe_series: Vec<f64>,
    pub t2_alarms: Vec<bool>,
    pub spe_alarms: Vec<bool>,
    pub t2_limit: f64,
    pub spe_limit: f64,
    /// 1-based index of the first faulty sample.
    pub onset: usize,
    /// Leading samples without a statistic.
    pub warmup: usize,
    /// Larger of the two per-index false alarm rates.
    pub far: Option<f64>,
    /// Fraction of post-onset samples flagged by either index.
    pub fdr: Option<f64>,
    /// Delay of the either-index alarm sequence.
    pub detection_delay: i64,
    pub t2: AlarmMetrics,
    pub spe: AlarmMetrics,
    pub either: AlarmMetrics,
}

/// Metrics of an alarm sequence over 1-based samples, ignoring the first
/// `warmup` samples.
pub fn alarm_metrics(alarms: &[bool], warmup: usize, onset: usize) -> AlarmMetrics {
    let rate = |range: std::ops::Range<usize>| {
        let len = range.len();
        (len > 0).then(|| range.filter(|&i| alarms[i]).count() as f64 / len as f64)
    };
    let first = (onset - 1).max(warmup).min(alarms.len());
    let far = rate(warmup.min(first)..first);
    let fdr = rate(first..alarms.len());
    let mut delay = -1;
    let mut run = 0;
    for i in first..alarms.len() {
        if alarms[i] {
            run += 1;
            if run == DETECTION_RUN {
                delay = (i + 1 - DETECTION_RUN) as i64 - (onset as i64 - 1);
                break;
            }
        } else {
            run = 0;
        }
    }
    AlarmMetrics { far, fdr, delay }
}

/// Monitors a standardized test window. `onset` is the 1-based index of the
/// first faulty sample; `n + 1` marks a window without a fault.
pub fn detect(
    profile: &MonitorProfile,
    loading: &DMatrix<f64>,
    var: &VarModel,
    y_test: &DataMatrix,
    onset: usize,
) -> Result<DetectionResult> {
    check_var(loading, var)?;
    if profile.lambda_diag.len() != var.r {
        return Err(Error::dim("profile rank does not match the VAR model"));
    }
    let n = y_test.n_samples();
    if onset == 0 || onset > n + 1 {
        return Err(Error::invalid(format!("onset {onset} outside 1..={}", n + 1)));
    }
    let warmup = var.tau.min(n);
    let mut t2_series = vec![f64::NAN; n];
    let mut spe_series = vec![f64::NAN; n];
    let mut t2_alarms = vec![false; n];
    let mut spe_alarms = vec![false; n];
    if n > var.tau {
        let scores = project_all(loading, y_test)?;
        let pred = predict_series(var, &scores)?;
        for k in var.tau..n {
            let t2 = t2_statistic(&pred.column(k - var.tau).into_owned(), profile)?;
            let spe = spe_statistic(&y_test.sample(k), loading)?;
            t2_series[k] = t2;
            spe_series[k] = spe;
            t2_alarms[k] = t2 > profile.t2_limit;
            spe_alarms[k] = spe > profile.spe_limit;
        }
    }
    let either_alarms: Vec<bool> = t2_alarms.iter().zip(&spe_alarms).map(|(a, b)| *a || *b).collect();
    let t2 = alarm_metrics(&t2_alarms, warmup, onset);
    let spe = alarm_metrics(&spe_alarms, warmup, onset);
    let either = alarm_metrics(&either_alarms, warmup, onset);
    let far = match (t2.far, spe.far) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    Ok(DetectionResult {
        t2_series,
        spe_series,
        t2_alarms,
        spe_alarms,
        t2_limit: profile.t2_limit,
        spe_limit: profile.spe_limit,
        onset,
        warmup,
        far,
        fdr: either.fdr,
        detection_delay: either.delay,
        t2,
        spe,
        either,
    })
}

/// JSON-friendly summary of a detection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub onset: usize,
    pub samples: usize,
    pub warmup: usize,
    pub t2_limit: f64,
    pub spe_limit: f64,
    pub far: Option<f64>,
    pub fdr: Option<f64>,
    pub delay: i64,
    pub t2: AlarmMetrics,
    pub spe: AlarmMetrics,
    pub either: AlarmMetrics,
}

impl DetectionResult {
    pub fn summary(&self) -> DetectionSummary {
        DetectionSummary {
            onset: self.onset,
            samples: self.t2_series.len(),
            warmup: self.warmup,
            t2_limit: self.t2_limit,
            spe_limit: self.spe_limit,
            far: self.far,
            fdr: self.fdr,
            delay: self.detection_delay,
            t2: self.t2.clone(),
            spe: self.spe.clone(),
            either: self.either.clone(),
        }
    }

    /// One row per sample; warm-up rows leave the statistic and alarm
    /// fields empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        w.write_record(["sample_index", "t2", "spe", "t2_limit", "spe_limit", "t2_alarm", "spe_alarm"])
            .map_err(csv_err)?;
        for k in 0..self.t2_series.len() {
            let index = (k + 1).to_string();
            let (t2_limit, spe_limit) = (self.t2_limit.to_string(), self.spe_limit.to_string());
            let row = if k < self.warmup {
                [index, String::new(), String::new(), t2_limit, spe_limit, String::new(), String::new()]
            } else {
                [
                    index,
                    self.t2_series[k].to_string(),
                    self.spe_series[k].to_string(),
                    t2_limit,
                    spe_limit,
                    u8::from(self.t2_alarms[k]).to_string(),
                    u8::from(self.spe_alarms[k]).to_string(),
                ]
            };
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}
