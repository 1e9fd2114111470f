//! Synthetic alkaline-water-electrolyzer process with fault injection.
//!
//! Latent scores follow a stable, persistent VAR driven by unit Gaussian
//! innovations.
//! The 32 default sensors observe `A t + μ + ε` through a sparse loading
//! `A`. All randomness comes from ChaCha8 generators seeded with the
//! configured seed: stream 0 draws the process structure, stream 1 the
//! trajectory, and faults use their own seeds.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

pub const SCENARIO_SCHEMA: &str = "awe-scenario/1";

/// Samples discarded before recording so the trajectory starts near
/// stationarity.
const BURN_IN: usize = 500;
const RESCALE_ATTEMPTS: usize = 10;

/// Sensor tags: ten control variables followed by the process variables.
pub fn default_tags(m: usize) -> Vec<String> {
    (0..m)
        .map(|j| if j < 10 { format!("CV({})", j + 1) } else { format!("PV({})", j - 9) })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessConfig {
    pub m: usize,
    pub r_true: usize,
    pub var_order: usize,
    pub spectral_radius: f64,
    pub noise_sigma: f64,
    pub loading_sparsity: f64,
    pub seed: u64,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        Self {
            m: 32,
            r_true: 5,
            var_order: 2,
            spectral_radius: 0.85,
            noise_sigma: 0.1,
            loading_sparsity: 0.6,
            seed: 0,
        }
    }
}

impl ProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.r_true == 0 || self.var_order == 0 {
            return Err(Error::invalid("m, r_true and var_order must be positive"));
        }
        if self.r_true > self.m {
            return Err(Error::invalid(format!("r_true = {} exceeds m = {}", self.r_true, self.m)));
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius < 1.0) {
            return Err(Error::invalid("spectral_radius must lie in (0, 1)"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma must be finite and non-negative"));
        }
        if !(self.loading_sparsity > 0.0 && self.loading_sparsity < 1.0) {
            return Err(Error::invalid("loading_sparsity must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Block companion matrix of VAR coefficients `[A_1 … A_p]`.
pub fn companion(coefficients: &[DMatrix<f64>]) -> DMatrix<f64> {
    let r = coefficients[0].nrows();
    let p = coefficients.len();
    let mut c = DMatrix::zeros(r * p, r * p);
    for (d, a) in coefficients.iter().enumerate() {
        c.view_mut((0, d * r), (r, r)).copy_from(a);
    }
    for i in r..r * p {
        c[(i, i - r)] = 1.0;
    }
    c
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A fixed process structure from which trajectories are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct AweProcess {
    pub config: ProcessConfig,
    /// `A_1 … A_p`, each `r × r`.
    pub coefficients: Vec<DMatrix<f64>>,
    pub loading: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub tags: Vec<String>,
}

/// Observed data with the latent scores that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub data: DataMatrix,
    pub latents: DMatrix<f64>,
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Zeroes `count` entries in random order, skipping any entry whose removal
/// would leave its row or column without a nonzero.
fn sparsify(a: &mut DMatrix<f64>, count: usize, rng: &mut ChaCha8Rng) {
    let (m, r) = a.shape();
    let mut cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..r).map(move |j| (i, j))).collect();
    cells.shuffle(rng);
    let mut row_nz = vec![r; m];
    let mut col_nz = vec![m; r];
    let mut zeroed = 0;
    for (i, j) in cells {
        if zeroed == count {
            break;
        }
        if row_nz[i] > 1 && col_nz[j] > 1 {
            a[(i, j)] = 0.0;
            row_nz[i] -= 1;
            col_nz[j] -= 1;
            zeroed += 1;
        }
    }
}

impl AweProcess {
    pub fn new(config: ProcessConfig) -> Result<Self> {
        config.validate()?;
        let (m, r, p) = (config.m, config.r_true, config.var_order);
        let mut rng = rng_stream(config.seed, 0);
        // Persistent damped AR(2) core per component with weak random
        // cross-coupling; higher lags carry coupling only.
        let couple = 1.0 / (r as f64).sqrt();
        let mut coefficients: Vec<DMatrix<f64>> = (0..p)
            .map(|d| {
                let (own, spread) = match d {
                    0 => (1.2, 0.2),
                    1 => (-0.4, 0.1),
                    _ => (0.0, 0.05),
                };
                DMatrix::from_fn(r, r, |i, j| {
                    let g = spread * couple * normal(&mut rng);
                    if i == j {
                        own + g
                    } else {
                        g
                    }
                })
            })
            .collect();
        let mut rho = spectral_radius(&companion(&coefficients));
        for _ in 0..RESCALE_ATTEMPTS {
            if (rho - config.spectral_radius).abs() < 1e-9 || !(rho > 0.0) {
                break;
            }
            let c = config.spectral_radius / rho;
            for (d, a) in coefficients.iter_mut().enumerate() {
                a.scale_mut(c.powi(d as i32 + 1));
            }
            rho = spectral_radius(&companion(&coefficients));
        }
        if !(rho < 1.0) {
            return Err(Error::Numerical(format!("latent dynamics unstable (spectral radius {rho})")));
        }
        let mut loading = DMatrix::from_fn(m, r, |_, _| normal(&mut rng));
        let zeros = (config.loading_sparsity * (m * r) as f64).round() as usize;
        sparsify(&mut loading, zeros, &mut rng);
        // Unit row norms give every sensor a comparable signal-to-noise ratio.
        for mut row in loading.row_iter_mut() {
            let norm = row.norm();
            row /= norm;
        }
        let offset = DVector::from_fn(m, |_, _| 10.0 * normal(&mut rng));
        Ok(Self {
            config,
            coefficients,
            loading,
            offset,
            tags: default_tags(m),
        })
    }

    pub fn companion_radius(&self) -> f64 {
        spectral_radius(&companion(&self.coefficients))
    }

    /// Draws `n` samples with trajectory randomness from `seed`.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<Trajectory> {
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, found: n });
        }
        let (m, r, p) = (self.config.m, self.config.r_true, self.config.var_order);
        let mut rng = rng_stream(seed, 1);
        let mut history: Vec<DVector<f64>> = vec![DVector::zeros(r); p];
        let mut latents = DMatrix::zeros(r, n);
        let mut values = DMatrix::zeros(m, n);
        for k in 0..BURN_IN + n {
            let mut t = DVector::from_fn(r, |_, _| normal(&mut rng));
            for (a, past) in self.coefficients.iter().zip(&history) {
                t += a * past;
            }
            history.rotate_right(1);
            history[0] = t.clone();
            if k >= BURN_IN {
                let noise = DVector::from_fn(m, |_, _| self.config.noise_sigma * normal(&mut rng));
                values.set_column(k - BURN_IN, &(&self.loading * &t + &self.offset + noise));
                latents.set_column(k - BURN_IN, &t);
            }
        }
        Ok(Trajectory {
            data: DataMatrix::new(values, self.tags.clone())?,
            latents,
        })
    }
}

/// Normal operating data from the process and trajectory seeded by
/// `cfg.seed`. Requires `n ≥ 100`.
pub fn simulate_normal(cfg: &ProcessConfig, n: usize) -> Result<DataMatrix> {
    if n < 100 {
        return Err(Error::TooFewSamples { needed: 100, found: n });
    }
    Ok(AweProcess::new(cfg.clone())?.simulate(n, cfg.seed)?.data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Bias,
    Drift,
    VarianceBurst,
    LevelSwing,
}

fn default_onset() -> usize {
    201
}

/// One injected fault. Sensors and onset are 1-based.
///
/// - `bias` adds `magnitude σ_j` from the onset for `duration` samples (to
///   the end when absent).
/// - `drift` ramps linearly to `magnitude σ_j` at `onset + duration` and
///   holds; without a duration the ramp ends at the last sample.
/// - `variance_burst` adds independent noise so the sensor's standard
///   deviation grows by the factor `magnitude` (no effect when ≤ 1).
/// - `level_swing` adds `±magnitude σ_j`, switching sign every `duration`
///   samples; without a duration it is a single step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub sensors: Vec<usize>,
    #[serde(default = "default_onset")]
    pub onset: usize,
    pub magnitude: f64,
    #[serde(default)]
    pub duration: Option<usize>,
}

impl FaultSpec {
    fn validate(&self, m: usize, n: usize) -> Result<()> {
        if self.onset == 0 || self.onset + 1 > n {
            return Err(Error::invalid(format!("onset {} outside 1..={}", self.onset, n.saturating_sub(1))));
        }
        if let Some(&bad) = self.sensors.iter().find(|&&s| s == 0 || s > m) {
            return Err(Error::invalid(format!("sensor {bad} outside 1..={m}")));
        }
        if self.sensors.is_empty() {
            return Err(Error::invalid("fault lists no sensors"));
        }
        if !self.magnitude.is_finite() {
            return Err(Error::invalid("fault magnitude must be finite"));
        }
        if self.duration == Some(0) {
            return Err(Error::invalid("fault duration must be positive"));
        }
        Ok(())
    }
}

/// Injects a fault with `σ_j` taken from the samples before the onset.
pub fn inject_fault(x: &DataMatrix, spec: &FaultSpec, seed: u64) -> Result<DataMatrix> {
    spec.validate(x.n_sensors(), x.n_samples())?;
    if spec.onset < 3 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: spec.onset - 1,
        });
    }
    let pre = x.values().columns(0, spec.onset - 1);
    let sigma = row_sd(&pre.into_owned());
    inject_fault_scaled(x, spec, &sigma, seed)
}

/// Injects a fault with explicit per-sensor scales `σ`.
pub fn inject_fault_scaled(x: &DataMatrix, spec: &FaultSpec, sigma: &[f64], seed: u64) -> Result<DataMatrix> {
    let (m, n) = (x.n_sensors(), x.n_samples());
    spec.validate(m, n)?;
    if sigma.len() != m {
        return Err(Error::dim(format!("{} scales for {m} sensors", sigma.len())));
    }
    let mut values = x.values().clone();
    let start = spec.onset - 1;
    let mut rng = rng_stream(seed, 2);
    for &s in &spec.sensors {
        let j = s - 1;
        let amp = spec.magnitude * sigma[j];
        for k in start..n {
            let since = k - start;
            let delta = match spec.kind {
                FaultKind::Bias => match spec.duration {
                    Some(d) if since >= d => 0.0,
                    _ => amp,
                },
                FaultKind::Drift => {
                    let ramp = spec.duration.unwrap_or(n - start) as f64;
                    amp * ((since + 1) as f64 / ramp).min(1.0)
                }
                FaultKind::VarianceBurst => {
                    let extra = (spec.magnitude * spec.magnitude - 1.0).max(0.0).sqrt() * sigma[j];
                    match spec.duration {
                        Some(d) if since >= d => 0.0,
                        _ if extra == 0.0 => 0.0,
                        _ => extra * normal(&mut rng),
                    }
                }
                FaultKind::LevelSwing => {
                    let phase = spec.duration.map_or(0, |d| since / d);
                    if phase % 2 == 0 {
                        amp
                    } else {
                        -amp
                    }
                }
            };
            values[(j, k)] += delta;
        }
    }
    DataMatrix::new(values, x.tags().to_vec())
}

fn row_sd(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.ncols() as f64;
    x.row_iter()
        .map(|row| {
            let mean = row.sum() / n;
            (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        })
        .collect()
}

fn default_n_train() -> usize {
    1000
}

fn default_n_test() -> usize {
    400
}

/// A process, window sizes and the faults applied to the test window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub process: ProcessConfig,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    pub faults: Vec<FaultSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub schema: String,
    pub scenario: String,
    pub seed: u64,
    /// Earliest fault onset, 1-based.
    pub onset: usize,
    /// Union of faulty sensors, 1-based and sorted.
    pub faulty_sensors: Vec<usize>,
    pub faulty_tags: Vec<String>,
    pub faults: Vec<FaultSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioData {
    pub train: DataMatrix,
    pub test_normal: DataMatrix,
    pub test_faulty: DataMatrix,
    pub truth: GroundTruth,
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Training window, fault-free test window and the faulty test window.
    /// Fault scales are training standard deviations.
    pub fn generate(&self) -> Result<ScenarioData> {
        if self.faults.is_empty() {
            return Err(Error::invalid("scenario lists no faults"));
        }
        if self.n_train < 100 {
            return Err(Error::TooFewSamples {
                needed: 100,
                found: self.n_train,
            });
        }
        let process = AweProcess::new(self.process.clone())?;
        let seed = self.process.seed;
        let train = process.simulate(self.n_train, seed)?.data;
        let test_normal = process.simulate(self.n_test, seed.wrapping_add(1))?.data;
        let sigma = row_sd(train.values());
        let mut test_faulty = test_normal.clone();
        for (i, fault) in self.faults.iter().enumerate() {
            let fault_seed = seed.wrapping_add(1000 + i as u64);
            test_faulty = inject_fault_scaled(&test_faulty, fault, &sigma, fault_seed)?;
        }
        let mut sensors: Vec<usize> = self.faults.iter().flat_map(|f| f.sensors.iter().copied()).collect();
        sensors.sort_unstable();
        sensors.dedup();
        let truth = GroundTruth {
            schema: SCENARIO_SCHEMA.into(),
            scenario: self.name.clone(),
            seed,
            onset: self.faults.iter().map(|f| f.onset).min().unwrap_or(1),
            faulty_tags: sensors.iter().map(|&s| process.tags[s - 1].clone()).collect(),
            faulty_sensors: sensors,
            faults: self.faults.clone(),
        };
        Ok(ScenarioData {
            train,
            test_normal,
            test_faulty,
            truth,
        })
    }
}

pub const PRESETS: [&str; 2] = ["fault2-analogue", "fault6-analogue"];

/// Named scenarios. `fault2-analogue`: noise burst and bias on variable 24,
/// with the bias moving to variables 27 and 28 after 100 samples.
/// `fault6-analogue`: level swing on the hydrogen separator level CV(3).
pub fn preset(name: &str, seed: u64) -> Option<Scenario> {
    let process = ProcessConfig {
        seed,
        ..ProcessConfig::default()
    };
    let faults = match name {
        "fault2-analogue" => vec![
            FaultSpec {
                kind: FaultKind::VarianceBurst,
                sensors: vec![24],
                onset: 201,
                magnitude: 3.0,
                duration: None,
            },
            FaultSpec {
                kind: FaultKind::Bias,
                sensors: vec![24],
                onset: 201,
                magnitude: 6.0,
                duration: Some(100),
            },
            FaultSpec {
                kind: FaultKind::Bias,
                sensors: vec![27, 28],
                onset: 301,
                magnitude: 6.0,
                duration: None,
            },
        ],
        "fault6-analogue" => vec![FaultSpec {
            kind: FaultKind::LevelSwing,
            sensors: vec![3],
            onset: 201,
            magnitude: 5.0,
            duration: Some(25),
        }],
        _ => return None,
    };
    Some(Scenario {
        name: name.into(),
        process,
        n_train: default_n_train(),
        n_test: default_n_test(),
        faults,
    })
}
