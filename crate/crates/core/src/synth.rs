//! Seeded low-rank test problems with known ground truth.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{fit_scaler, DataMatrix};

#[derive(Debug, Clone)]
pub struct LowRankProblem {
    /// Standardized observations, sensors × samples.
    pub data: DataMatrix,
    /// Generating loading (m × r), in standardized coordinates.
    pub loading: DMatrix<f64>,
    /// Noise variance in standardized units.
    pub noise_var: f64,
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
}

/// `X = A Sᵀ + E` with Gaussian `A` (m × r), `S` (n × r) and independent
/// noise whose variance on every sensor sits `snr_db` below that sensor's
/// signal power, then standardized per sensor. Noise is isotropic after
/// standardization.
pub fn low_rank(m: usize, n: usize, r: usize, snr_db: f64, seed: u64) -> LowRankProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, x) = signal_plus_noise(m, n, r, snr_db, &mut rng);
    standardize(x, a, snr_db)
}

/// Like [`low_rank`], then overwrites a `fraction` of entries with
/// `±magnitude` times the sensor's standard deviation.
pub fn low_rank_with_outliers(
    m: usize,
    n: usize,
    r: usize,
    snr_db: f64,
    fraction: f64,
    magnitude: f64,
    seed: u64,
) -> LowRankProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, mut x) = signal_plus_noise(m, n, r, snr_db, &mut rng);
    let clean_var: Vec<f64> = x.row_iter().map(|row| row_variance(row.iter().copied())).collect();
    let sd: Vec<f64> = x
        .row_iter()
        .map(|row| (row.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt())
        .collect();
    for i in 0..n {
        for j in 0..m {
            if rng.random::<f64>() < fraction {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                x[(j, i)] = sign * magnitude * sd[j];
            }
        }
    }
    let noisy_var: Vec<f64> = x.row_iter().map(|row| row_variance(row.iter().copied())).collect();
    let mut problem = standardize(x, a, snr_db);
    // Outliers inflate each sensor's spread, which shrinks the noise once
    // standardized.
    let share = problem.noise_var;
    problem.noise_var = clean_var
        .iter()
        .zip(&noisy_var)
        .map(|(c, v)| share * c / v)
        .sum::<f64>()
        / m as f64;
    problem
}

fn row_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Like [`low_rank`] with each loading entry zeroed with probability
/// `sparsity`; every sensor keeps at least one nonzero entry.
pub fn sparse_low_rank(m: usize, n: usize, r: usize, snr_db: f64, sparsity: f64, seed: u64) -> LowRankProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = normal_matrix(m, r, &mut rng);
    for j in 0..m {
        let keep = rng.random_range(0..r);
        for c in 0..r {
            if c != keep && rng.random::<f64>() < sparsity {
                a[(j, c)] = 0.0;
            }
        }
    }
    let x = add_noise(&a * normal_matrix(n, r, &mut rng).transpose(), snr_db, &mut rng);
    standardize(x, a, snr_db)
}

fn signal_plus_noise(
    m: usize,
    n: usize,
    r: usize,
    snr_db: f64,
    rng: &mut ChaCha8Rng,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = normal_matrix(m, r, rng);
    let x = add_noise(&a * normal_matrix(n, r, rng).transpose(), snr_db, rng);
    (a, x)
}

fn add_noise(mut x: DMatrix<f64>, snr_db: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = x.ncols();
    let ratio = 10f64.powf(-snr_db / 10.0);
    for j in 0..x.nrows() {
        let power = x.row(j).norm_squared() / n as f64;
        let sd = (power * ratio).sqrt();
        for i in 0..n {
            x[(j, i)] += sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
        }
    }
    x
}

fn standardize(x: DMatrix<f64>, a: DMatrix<f64>, snr_db: f64) -> LowRankProblem {
    let raw = DataMatrix::from_values(x).expect("finite synthetic data");
    let scaler = fit_scaler(&raw).expect("non-constant synthetic data");
    let data = scaler.apply(&raw).expect("same shape");
    let inv_sd = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        scaler.std.len(),
        scaler.std.iter().map(|s| 1.0 / s),
    ));
    let ratio = 10f64.powf(-snr_db / 10.0);
    LowRankProblem {
        data,
        loading: &inv_sd * a,
        noise_var: ratio / (1.0 + ratio),
    }
}
