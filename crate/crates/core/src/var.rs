//! ℓ1-regularized vector autoregression on latent scores.
//!
//! A series of latent scores `t*_k` (r-dimensional, one column per sample) is
//! modelled as `t*_k = Σ_{d=1..τ} ω_dᵀ t*_{k−d} + c + e_k`. The stacked
//! coefficient matrix `ω = [ω₁; …; ω_τ]` is `(r·τ) × r` and each of its
//! columns is an independent Lasso problem solved by cyclic coordinate
//! descent.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serde_mat;

pub const VAR_SCHEMA: &str = "sparse-var/1";

pub const MAX_CYCLES: usize = 10_000;
pub const CHANGE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDesign {
    /// Targets, one row per predictable sample.
    pub z: DMatrix<f64>,
    /// Regressors; row `k` is `[t*_{k−1}ᵀ, …, t*_{k−τ}ᵀ]`.
    pub q: DMatrix<f64>,
    pub tau: usize,
}

/// Stacks a `r × L` series into targets and lagged regressors, lag-1 block
/// first.
pub fn build_lagged(series: &DMatrix<f64>, tau: usize) -> Result<LaggedDesign> {
    let (r, len) = series.shape();
    if tau == 0 {
        return Err(Error::invalid("tau must be at least 1"));
    }
    if len <= tau {
        return Err(Error::TooFewSamples {
            needed: tau + 1,
            found: len,
        });
    }
    let rows = len - tau;
    let z = DMatrix::from_fn(rows, r, |k, c| series[(c, k + tau)]);
    let q = DMatrix::from_fn(rows, r * tau, |k, col| {
        let (d, c) = (col / r + 1, col % r);
        series[(c, k + tau - d)]
    });
    Ok(LaggedDesign { z, q, tau })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarModel {
    #[serde(with = "serde_mat::matrix")]
    pub omega: DMatrix<f64>,
    pub tau: usize,
    pub lambda: f64,
    pub r: usize,
    /// Constant term restored after fitting on centered data.
    pub intercept: Vec<f64>,
}

impl VarModel {
    /// Lag-`d` block `ω_d` (r × r), `d` starting at 1.
    pub fn block(&self, d: usize) -> DMatrix<f64> {
        self.omega.rows((d - 1) * self.r, self.r).into_owned()
    }

    pub fn nonzeros(&self) -> usize {
        self.omega.iter().filter(|v| **v != 0.0).count()
    }
}

/// Result of one Lasso column solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoColumn {
    pub coef: DVector<f64>,
    pub cycles: usize,
    pub converged: bool,
    /// Objective after each full cycle.
    pub objective_trace: Vec<f64>,
}

pub fn lasso_objective(q: &DMatrix<f64>, z: &DVector<f64>, w: &DVector<f64>, lambda: f64) -> f64 {
    0.5 * (z - q * w).norm_squared() + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Minimizes `½‖z − Q w‖² + λ‖w‖₁` by cyclic coordinate descent.
///
/// Cycles stop once every coordinate moved by less than `1e−8` (scaled by
/// its curvature `QᵀQ_jj` when that exceeds one) or after `10⁴` cycles.
pub fn lasso_column(q: &DMatrix<f64>, z: &DVector<f64>, lambda: f64) -> Result<LassoColumn> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda = {lambda} must be a finite non-negative number")));
    }
    if q.nrows() == 0 || q.nrows() != z.len() {
        return Err(Error::dim(format!("design has {} rows, target has {}", q.nrows(), z.len())));
    }
    if q.iter().chain(z.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("design contains non-finite entries"));
    }
    let p = q.ncols();
    let gram = q.tr_mul(q);
    let corr = q.tr_mul(z);
    let mut w = DVector::zeros(p);
    // grad = Qᵀz − QᵀQ w, kept current as coordinates move.
    let mut grad = corr.clone();
    let mut objective_trace = Vec::new();
    let mut converged = false;
    let mut cycles = 0;
    while cycles < MAX_CYCLES {
        cycles += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            let g = gram[(j, j)];
            if g <= 0.0 {
                continue;
            }
            let old = w[j];
            let new = soft_threshold(grad[j] + g * old, lambda) / g;
            let delta = new - old;
            if delta != 0.0 {
                w[j] = new;
                for l in 0..p {
                    grad[l] -= gram[(l, j)] * delta;
                }
            }
            max_change = max_change.max(delta.abs() * g.max(1.0));
        }
        objective_trace.push(lasso_objective(q, z, &w, lambda));
        if max_change < CHANGE_TOL {
            converged = true;
            break;
        }
    }
    Ok(LassoColumn {
        coef: w,
        cycles,
        converged,
        objective_trace,
    })
}

/// Pure Lasso fit of every column of `Z` on `Q`, without centering; the
/// returned model has a zero intercept.
pub fn lasso_fit(d: &LaggedDesign, lambda: f64) -> Result<VarModel> {
    let r = d.z.ncols();
    if d.q.ncols() != r * d.tau {
        return Err(Error::dim("regressor width must be r·tau"));
    }
    let mut omega = DMatrix::zeros(r * d.tau, r);
    for c in 0..r {
        let sol = lasso_column(&d.q, &d.z.column(c).into_owned(), lambda)?;
        if !sol.converged {
            log::warn!("lasso column {c} stopped after {} cycles", sol.cycles);
        }
        omega.set_column(c, &sol.coef);
    }
    Ok(VarModel {
        omega,
        tau: d.tau,
        lambda,
        r,
        intercept: vec![0.0; r],
    })
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.mean()))
}

fn center_columns(m: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (c, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[c]);
    }
    out
}

/// Fits on column-centered `Z` and `Q`, then sets the intercept so that the
/// model reproduces the training means.
fn fit_centered(d: &LaggedDesign, lambda: f64) -> Result<VarModel> {
    let zm = column_means(&d.z);
    let qm = column_means(&d.q);
    let centered = LaggedDesign {
        z: center_columns(&d.z, &zm),
        q: center_columns(&d.q, &qm),
        tau: d.tau,
    };
    let mut model = lasso_fit(&centered, lambda)?;
    let intercept = zm - model.omega.tr_mul(&qm);
    model.intercept = intercept.iter().copied().collect();
    Ok(model)
}

/// Largest useful penalty `‖QᵀZ‖_∞` on the centered design; every
/// coefficient is zero at or above it.
pub fn lambda_max(d: &LaggedDesign) -> f64 {
    let qc = center_columns(&d.q, &column_means(&d.q));
    let zc = center_columns(&d.z, &column_means(&d.z));
    qc.tr_mul(&zc).amax()
}

/// `count` values spaced logarithmically over `[1e−4, 1]·λ_max`, ascending.
pub fn lambda_grid(lambda_max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lambda_max];
    }
    (0..count)
        .map(|i| lambda_max * 10f64.powf(-4.0 + 4.0 * i as f64 / (count - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda: f64,
    pub grid: Vec<f64>,
    /// Mean held-out squared error per grid value.
    pub errors: Vec<f64>,
}

/// Blocked (chronological) K-fold cross-validation over [`lambda_grid`]. Ties
/// go to the larger penalty.
pub fn select_lambda_cv(d: &LaggedDesign, folds: usize, grid_size: usize) -> Result<CvResult> {
    let rows = d.z.nrows();
    if folds < 2 || rows < 2 * folds {
        return Err(Error::TooFewSamples {
            needed: 2 * folds.max(2),
            found: rows,
        });
    }
    let lmax = lambda_max(d);
    let grid = if lmax > 0.0 {
        lambda_grid(lmax, grid_size)
    } else {
        vec![0.0]
    };
    let bounds: Vec<usize> = (0..=folds).map(|f| f * rows / folds).collect();
    let mut errors = vec![0.0; grid.len()];
    for f in 0..folds {
        let (lo, hi) = (bounds[f], bounds[f + 1]);
        let train: Vec<usize> = (0..rows).filter(|&k| k < lo || k >= hi).collect();
        let test: Vec<usize> = (lo..hi).collect();
        let train_d = LaggedDesign {
            z: d.z.select_rows(&train),
            q: d.q.select_rows(&train),
            tau: d.tau,
        };
        let zt = d.z.select_rows(&test);
        let qt = d.q.select_rows(&test);
        for (g, &lambda) in grid.iter().enumerate() {
            let model = fit_centered(&train_d, lambda)?;
            let mut pred = &qt * &model.omega;
            for (c, mut col) in pred.column_iter_mut().enumerate() {
                col.add_scalar_mut(model.intercept[c]);
            }
            errors[g] += (&zt - pred).norm_squared() / rows as f64;
        }
    }
    let mut best = 0;
    for g in 1..grid.len() {
        if errors[g] <= errors[best] {
            best = g;
        }
    }
    Ok(CvResult {
        lambda: grid[best],
        grid,
        errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarConfig {
    pub tau: usize,
    /// Fixed penalty; cross-validated when absent.
    pub lambda: Option<f64>,
    pub cv_folds: usize,
    pub cv_grid: usize,
}

impl Default for VarConfig {
    fn default() -> Self {
        Self {
            tau: 2,
            lambda: None,
            cv_folds: 5,
            cv_grid: 20,
        }
    }
}

/// Fits a sparse VAR with intercept to a `r × L` score series.
pub fn fit_var(series: &DMatrix<f64>, cfg: &VarConfig) -> Result<VarModel> {
    let d = build_lagged(series, cfg.tau)?;
    let lambda = match cfg.lambda {
        Some(l) => l,
        None => select_lambda_cv(&d, cfg.cv_folds, cfg.cv_grid)?.lambda,
    };
    fit_centered(&d, lambda)
}

/// One-step prediction from `history = [t*_{k−1}, …, t*_{k−τ}]` (r × τ,
/// most recent first).
pub fn var_predict(model: &VarModel, history: &DMatrix<f64>) -> Result<DVector<f64>> {
    if history.nrows() != model.r || history.ncols() != model.tau {
        return Err(Error::dim(format!(
            "history is {}x{}, model needs {}x{}",
            history.nrows(),
            history.ncols(),
            model.r,
            model.tau
        )));
    }
    let r = model.r;
    Ok(DVector::from_fn(r, |c, _| {
        let mut acc = model.intercept[c];
        for d in 0..model.tau {
            for i in 0..r {
                acc += model.omega[(d * r + i, c)] * history[(i, d)];
            }
        }
        acc
    }))
}

/// One-step predictions for samples `τ..L` of a `r × L` series, as columns.
pub fn predict_series(model: &VarModel, series: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if series.nrows() != model.r {
        return Err(Error::dim("series dimension does not match the model"));
    }
    let len = series.ncols();
    if len <= model.tau {
        return Err(Error::TooFewSamples {
            needed: model.tau + 1,
            found: len,
        });
    }
    let mut pred = DMatrix::zeros(model.r, len - model.tau);
    for k in model.tau..len {
        let history = DMatrix::from_fn(model.r, model.tau, |i, d| series[(i, k - 1 - d)]);
        pred.set_column(k - model.tau, &var_predict(model, &history)?);
    }
    Ok(pred)
}

/// Sample autocorrelation of the one-step residuals of each component at
/// lags `1..=max_lag` (r × max_lag). A component with zero residual variance
/// gets zeros.
pub fn residual_acf(series: &DMatrix<f64>, model: &VarModel, max_lag: usize) -> Result<DMatrix<f64>> {
    let len = series.ncols();
    if len <= model.tau + max_lag {
        return Err(Error::TooFewSamples {
            needed: model.tau + max_lag + 1,
            found: len,
        });
    }
    let pred = predict_series(model, series)?;
    let resid = series.columns(model.tau, len - model.tau) - pred;
    let mut acf = DMatrix::zeros(model.r, max_lag);
    for c in 0..model.r {
        let row = resid.row(c);
        let mean = row.mean();
        let e: Vec<f64> = row.iter().map(|v| v - mean).collect();
        let denom: f64 = e.iter().map(|v| v * v).sum();
        if denom <= f64::MIN_POSITIVE {
            continue;
        }
        for h in 1..=max_lag {
            let num: f64 = (0..e.len() - h).map(|k| e[k] * e[k + h]).sum();
            acf[(c, h - 1)] = num / denom;
        }
    }
    Ok(acf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderScore {
    pub tau: usize,
    pub aic: f64,
}

/// AIC-suggested order in `1..=max_tau`: `N ln det Σ̂ + 2·(nonzero
/// coefficients)`, every order scored on the same `L − max_tau` targets.
pub fn suggest_order(series: &DMatrix<f64>, max_tau: usize, lambda: f64) -> Result<(usize, Vec<OrderScore>)> {
    if max_tau == 0 {
        return Err(Error::invalid("max_tau must be at least 1"));
    }
    let full = build_lagged(series, max_tau)?;
    let rows = full.z.nrows() as f64;
    let r = series.nrows();
    let mut scores = Vec::with_capacity(max_tau);
    for tau in 1..=max_tau {
        let d = LaggedDesign {
            z: full.z.clone(),
            q: full.q.columns(0, r * tau).into_owned(),
            tau,
        };
        let model = fit_centered(&d, lambda)?;
        let mut resid = &d.z - &d.q * &model.omega;
        for (c, mut col) in resid.column_iter_mut().enumerate() {
            col.add_scalar_mut(-model.intercept[c]);
        }
        let cov = resid.tr_mul(&resid) / rows;
        let det = cov.determinant();
        let aic = if det > 0.0 {
            rows * det.ln() + 2.0 * model.nonzeros() as f64
        } else {
            f64::NEG_INFINITY
        };
        scores.push(OrderScore { tau, aic });
    }
    let best = scores
        .iter()
        .min_by(|a, b| a.aic.total_cmp(&b.aic))
        .map(|s| s.tau)
        .unwrap_or(1);
    Ok((best, scores))
}

/// Versioned on-disk form of a VAR model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarDocument {
    pub schema: String,
    #[serde(flatten)]
    pub model: VarModel,
}

impl VarDocument {
    pub fn new(model: VarModel) -> Self {
        Self {
            schema: VAR_SCHEMA.into(),
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(s)?;
        if doc.schema != VAR_SCHEMA {
            return Err(Error::invalid(format!("unsupported schema {:?}", doc.schema)));
        }
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
    }

    /// `x_k = Σ_d A_dᵀ x_{k−d} + e_k` started from zero with a burn-in.
    fn simulate(blocks: &[DMatrix<f64>], len: usize, seed: u64) -> DMatrix<f64> {
        let r = blocks[0].nrows();
        let burn = 200;
        let noise = normal(r, len + burn, seed);
        let mut x = DMatrix::zeros(r, len + burn);
        for k in 0..len + burn {
            let mut v = noise.column(k).into_owned();
            for (d, a) in blocks.iter().enumerate() {
                if k > d {
                    v += a.tr_mul(&x.column(k - d - 1));
                }
            }
            x.set_column(k, &v);
        }
        x.columns(burn, len).into_owned()
    }

    /// Minimum of `½‖z − Qw‖² + λ‖w‖₁` by enumerating every support and sign
    /// pattern and solving the stationarity equations on it.
    fn enumerate_lasso(q: &DMatrix<f64>, z: &DVector<f64>, lambda: f64) -> f64 {
        let p = q.ncols();
        let mut best = 0.5 * z.norm_squared();
        for mask in 1u32..(1 << p) {
            let support: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
            let qs = q.select_columns(&support);
            let g = qs.tr_mul(&qs);
            for signs in 0u32..(1 << support.len()) {
                let s = DVector::from_fn(support.len(), |i, _| if signs & (1 << i) != 0 { 1.0 } else { -1.0 });
                let Some(w) = g.clone().lu().solve(&(qs.tr_mul(z) - &s * lambda)) else { continue };
                if w.iter().zip(s.iter()).all(|(a, b)| a * b > 0.0) {
                    let mut full = DVector::zeros(p);
                    for (i, &j) in support.iter().enumerate() {
                        full[j] = w[i];
                    }
                    best = best.min(lasso_objective(q, z, &full, lambda));
                }
            }
        }
        best
    }

    fn kkt_violation(q: &DMatrix<f64>, z: &DVector<f64>, w: &DVector<f64>, lambda: f64) -> f64 {
        let grad = q.tr_mul(&(z - q * w));
        let mut worst = 0.0f64;
        for j in 0..w.len() {
            let v = if w[j] != 0.0 {
                (grad[j] - lambda * w[j].signum()).abs()
            } else {
                (grad[j].abs() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
        worst
    }

    #[test]
    fn lagged_design_by_hand() {
        let series = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let d = build_lagged(&series, 2).unwrap();
        assert_eq!(d.z, DMatrix::from_column_slice(2, 1, &[3.0, 4.0]));
        assert_eq!(d.q, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 3.0, 2.0]));
        assert_eq!(build_lagged(&series, 3).unwrap().z.nrows(), 1);
        assert!(matches!(build_lagged(&series, 4), Err(Error::TooFewSamples { .. })));
        assert!(build_lagged(&series, 0).is_err());
    }

    #[test]
    fn lagged_design_matches_index_arithmetic() {
        let series = normal(2, 12, 1);
        let tau = 3;
        let d = build_lagged(&series, tau).unwrap();
        for k in 0..12 - tau {
            for c in 0..2 {
                assert_eq!(d.z[(k, c)], series[(c, k + tau)]);
            }
            for lag in 1..=tau {
                for c in 0..2 {
                    assert_eq!(d.q[(k, (lag - 1) * 2 + c)], series[(c, k + tau - lag)]);
                }
            }
        }
    }

    #[test]
    fn unpenalized_fit_is_least_squares() {
        let d = LaggedDesign { q: normal(40, 6, 4), z: normal(40, 3, 3), tau: 2 };
        let model = lasso_fit(&d, 0.0).unwrap();
        let ls = (d.q.tr_mul(&d.q)).lu().solve(&d.q.tr_mul(&d.z)).unwrap();
        assert!((model.omega - ls).amax() < 1e-8);
    }

    #[test]
    fn penalty_at_lambda_max_zeroes_everything() {
        let d = LaggedDesign { q: normal(30, 4, 5), z: normal(30, 2, 6), tau: 2 };
        let lmax = d.q.tr_mul(&d.z).amax();
        let model = lasso_fit(&d, lmax).unwrap();
        assert!(model.omega.iter().all(|v| *v == 0.0));
        let col = lasso_column(&d.q, &d.z.column(0).into_owned(), lmax * 1.5).unwrap();
        assert_eq!(col.cycles, 1);
    }

    #[test]
    fn three_coefficients_match_enumeration() {
        for seed in 0..20 {
            let q = normal(12, 3, 100 + seed);
            let z = normal(12, 1, 200 + seed).column(0).into_owned();
            let sol = lasso_column(&q, &z, 0.5).unwrap();
            let oracle = enumerate_lasso(&q, &z, 0.5);
            assert!((lasso_objective(&q, &z, &sol.coef, 0.5) - oracle).abs() < 1e-9);
            assert!(kkt_violation(&q, &z, &sol.coef, 0.5) < 1e-6);
        }
    }

    #[test]
    fn solution_path_is_continuous() {
        let q = normal(50, 5, 7);
        let z = normal(50, 1, 8).column(0).into_owned();
        let lmax = q.tr_mul(&z).amax();
        for frac in [0.05, 0.2, 0.6] {
            let lambda = frac * lmax;
            let base = lasso_column(&q, &z, lambda).unwrap().coef;
            let mut last = f64::INFINITY;
            for delta in [1e-1, 1e-2, 1e-3, 1e-4] {
                let gap = (lasso_column(&q, &z, lambda + delta * lmax).unwrap().coef - &base).norm();
                assert!(gap <= last + 1e-9);
                last = gap;
            }
            assert!(last < 1e-3);
        }
    }

    #[test]
    fn prediction_examples() {
        let model = VarModel { omega: DMatrix::zeros(6, 3), tau: 2, lambda: 0.0, r: 3, intercept: vec![0.0; 3] };
        assert_eq!(var_predict(&model, &normal(3, 2, 1)).unwrap(), DVector::zeros(3));
        assert!(var_predict(&model, &normal(3, 1, 1)).is_err());

        let ident = VarModel { omega: DMatrix::identity(3, 3), tau: 1, lambda: 0.0, r: 3, intercept: vec![0.0; 3] };
        let h = normal(3, 1, 2);
        assert_eq!(var_predict(&ident, &h).unwrap(), h.column(0).into_owned());

        let omega = normal(6, 3, 3);
        let model = VarModel { omega: omega.clone(), tau: 2, lambda: 0.0, r: 3, intercept: vec![0.0; 3] };
        let hist = normal(3, 2, 4);
        let got = var_predict(&model, &hist).unwrap();
        for c in 0..3 {
            let mut acc = 0.0;
            for d in 0..2 {
                for i in 0..3 {
                    acc += omega[(d * 3 + i, c)] * hist[(i, d)];
                }
            }
            assert!((got[c] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn prediction_reproduces_design_product() {
        let series = normal(3, 30, 9);
        let d = build_lagged(&series, 2).unwrap();
        let model = lasso_fit(&d, 0.3).unwrap();
        for k in 0..d.q.nrows() {
            let hist = DMatrix::from_fn(3, 2, |i, lag| d.q[(k, lag * 3 + i)]);
            let got = var_predict(&model, &hist).unwrap();
            for c in 0..3 {
                let mut row_product = 0.0;
                for j in 0..6 {
                    row_product += d.q[(k, j)] * model.omega[(j, c)];
                }
                assert_eq!(got[c], row_product);
            }
        }
        let series_pred = predict_series(&model, &series).unwrap();
        let product = (&d.q * &model.omega).transpose();
        assert!((series_pred - product).amax() < 1e-12);
    }

    #[test]
    fn zero_residuals_give_zero_acf() {
        let series = DMatrix::from_fn(2, 20, |_, _| 1.5);
        let model = VarModel { omega: DMatrix::zeros(4, 2), tau: 2, lambda: 0.0, r: 2, intercept: vec![1.5, 1.5] };
        assert_eq!(residual_acf(&series, &model, 5).unwrap(), DMatrix::zeros(2, 5));
        assert!(residual_acf(&series, &model, 18).is_err());
    }

    #[test]
    fn ar1_residuals_are_white() {
        let a = DMatrix::from_element(1, 1, 0.8);
        let series = simulate(&[a], 2000, 11);
        let model = fit_var(&series, &VarConfig { tau: 1, lambda: Some(0.0), ..Default::default() }).unwrap();
        assert!((model.omega[(0, 0)] - 0.8).abs() < 0.05);
        let acf = residual_acf(&series, &model, 1).unwrap();
        assert!(acf[(0, 0)].abs() < 0.1);
    }

    #[test]
    fn white_noise_acf_within_bartlett_band() {
        let series = normal(3, 600, 12);
        let model = fit_var(&series, &VarConfig::default()).unwrap();
        let acf = residual_acf(&series, &model, 20).unwrap();
        let band = 2.0 / ((600 - model.tau) as f64).sqrt();
        let inside = acf.iter().filter(|v| v.abs() < band).count();
        assert!(inside as f64 >= 0.9 * acf.len() as f64);
    }

    #[test]
    fn cross_validation_and_intercept() {
        let a1 = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.2, 0.3]);
        let a2 = DMatrix::from_row_slice(2, 2, &[-0.2, 0.0, 0.0, 0.1]);
        let mut series = simulate(&[a1, a2], 800, 13);
        series.row_mut(0).add_scalar_mut(4.0);
        let d = build_lagged(&series, 2).unwrap();
        let cv = select_lambda_cv(&d, 5, 20).unwrap();
        assert_eq!(cv.grid.len(), 20);
        assert!(cv.grid.contains(&cv.lambda));
        let lmax = lambda_max(&d);
        assert!((cv.grid[0] - 1e-4 * lmax).abs() < 1e-12 * lmax && (cv.grid[19] - lmax).abs() < 1e-12 * lmax);
        let model = fit_var(&series, &VarConfig::default()).unwrap();
        assert_eq!(model.lambda, cv.lambda);
        let pred = predict_series(&model, &series).unwrap();
        let resid_mean = (series.columns(2, 798) - pred).column_mean();
        assert!(resid_mean.amax() < 1e-8);
    }

    #[test]
    fn aic_prefers_true_order() {
        let a1 = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.0, 0.3]);
        let a2 = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, -0.35]);
        let series = simulate(&[a1, a2], 1500, 14);
        let (tau, scores) = suggest_order(&series, 4, 0.0).unwrap();
        assert_eq!(scores.len(), 4);
        assert_eq!(tau, 2);
    }

    #[test]
    fn document_round_trip() {
        let series = normal(3, 60, 15);
        let model = fit_var(&series, &VarConfig { lambda: Some(1.0), ..Default::default() }).unwrap();
        let doc = VarDocument::new(model);
        assert_eq!(VarDocument::from_json(&doc.to_json().unwrap()).unwrap(), doc);
    }

    proptest! {
        #[test]
        fn kkt_and_monotone_objective(seed in 0u64..10_000, p in 1usize..6, frac in 0.0f64..1.2) {
            let q = normal(15, p, seed);
            let z = normal(15, 1, seed + 77_777).column(0).into_owned();
            let lambda = frac * q.tr_mul(&z).amax();
            let sol = lasso_column(&q, &z, lambda).unwrap();
            prop_assert!(sol.converged);
            prop_assert!(kkt_violation(&q, &z, &sol.coef, lambda) < 1e-6);
            for w in sol.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
            }
        }
    }
}
