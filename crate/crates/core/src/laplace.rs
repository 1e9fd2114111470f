//! Sparse PCA with a Laplace prior on the loadings, fit by mean-field
//! variational inference.
//!
//! Each sample is modelled as `y_i = P t_i + x̄ + ξ_i` with `t_i ~ N(0, I)`,
//! `x̄ ~ N(0, ς⁻¹ I)` and `ξ_i ~ N(0, ϑ⁻¹ I)`. The Laplace prior on `P_ji` is
//! written as a Gaussian scale mixture: `P_ji | η_ji ~ N(0, η_ji)` with an
//! exponential prior on the variance `η_ji`. The rank is fixed.
//!
//! Posterior factors: every row of `P` has its own `r × r` covariance, all
//! scores share one covariance, `x̄` has an isotropic covariance and `ϑ` is
//! Gamma. Only the mean of `q(η)` is used.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::data::{DataMatrix, Scaler};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, orthonormalize, spd_inverse, symmetrize, truncated_svd};
use crate::serde_mat;

pub const LAPLACE_SCHEMA: &str = "vbspca-laplace/1";

const INIT_COVARIANCE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaplaceHyper {
    /// Laplace scale `φ`; smaller values shrink loadings harder.
    pub varphi: f64,
    pub c0: f64,
    pub d0: f64,
    /// Prior precision of the mean offset `x̄`.
    pub varsigma: f64,
    pub r: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for LaplaceHyper {
    fn default() -> Self {
        Self {
            varphi: 1.0,
            c0: 1e-5,
            d0: 1e-5,
            varsigma: 1e-3,
            r: 5,
            max_iters: 20_000,
            tol: 1e-5,
        }
    }
}

impl LaplaceHyper {
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let positive = [self.varphi, self.c0, self.d0, self.varsigma, self.tol];
        if !positive.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::invalid("varphi, c0, d0, varsigma and tol must be positive"));
        }
        if self.r == 0 || self.r > m.min(n) {
            return Err(Error::invalid(format!("r = {} must lie in 1..={}", self.r, m.min(n))));
        }
        Ok(())
    }
}

/// Variational posterior of the Laplace-prior model.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceState {
    /// `E[P]`, m × r.
    pub mu_p: DMatrix<f64>,
    /// Covariance of each row of `P`.
    pub sigma_p: Vec<DMatrix<f64>>,
    /// `E[t_i]` stored as columns, r × n.
    pub mu_t: DMatrix<f64>,
    pub sigma_t: DMatrix<f64>,
    pub mu_xbar: DVector<f64>,
    /// Variance of every coordinate of `x̄`.
    pub sigma_xbar: f64,
    pub theta_shape: f64,
    pub theta_rate: f64,
    /// `E[η]`, m × r.
    pub mu_eta: DMatrix<f64>,
}

impl LaplaceState {
    pub fn e_theta(&self) -> f64 {
        self.theta_shape / self.theta_rate
    }

    /// `E|P_ji|` under the Gaussian marginal of each entry.
    pub fn e_abs_p(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.mu_p.nrows(), self.mu_p.ncols(), |j, c| {
            folded_normal_mean(self.mu_p[(j, c)], self.sigma_p[j][(c, c)])
        })
    }

    pub fn min_covariance_eigenvalue(&self) -> f64 {
        self.sigma_p
            .iter()
            .map(min_eigenvalue)
            .fold(min_eigenvalue(&self.sigma_t), f64::min)
    }

    fn n_samples(&self) -> usize {
        self.mu_t.ncols()
    }
}

/// Mean of `|Z|` for `Z ~ N(mu, var)`.
pub fn folded_normal_mean(mu: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return mu.abs();
    }
    let s = var.sqrt();
    s * (2.0 / PI).sqrt() * (-mu * mu / (2.0 * var)).exp() + mu * erf(mu / (s * std::f64::consts::SQRT_2))
}

/// `E[η_ji] = ½(φ + √(2φ) E|P_ji|)`.
pub fn eta_mean(varphi: f64, e_abs: f64) -> f64 {
    0.5 * (varphi + (2.0 * varphi).sqrt() * e_abs)
}

/// Truncated-SVD initialization shared with the Gaussian variant. The seed
/// only fills components beyond the numerical rank of `X`.
pub fn init_laplace(x: &DataMatrix, h: &LaplaceHyper, seed: u64) -> Result<LaplaceState> {
    let (m, n) = (x.n_sensors(), x.n_samples());
    h.validate(m, n)?;
    let v = x.values();
    let len = v.len() as f64;
    let mean = v.sum() / len;
    let var = v.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / len;
    if !(var > 0.0) {
        return Err(Error::Degenerate("data matrix has zero variance".into()));
    }
    let r = h.r;
    let (u, s, vk) = truncated_svd(v, r);
    let s_max = s[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
    let mut mu_p = DMatrix::zeros(m, r);
    let mut mu_t = DMatrix::zeros(r, n);
    for c in 0..r {
        if s[c] > 1e-12 * s_max {
            let w = s[c].sqrt();
            mu_p.set_column(c, &(u.column(c) * w));
            mu_t.set_row(c, &(vk.column(c) * w).transpose());
        } else {
            let w = 1e-6 * s_max.sqrt();
            for j in 0..m {
                mu_p[(j, c)] = w * draw() / (m as f64).sqrt();
            }
            for i in 0..n {
                mu_t[(c, i)] = w * draw() / (n as f64).sqrt();
            }
        }
    }
    let sigma_p = vec![DMatrix::identity(r, r) * INIT_COVARIANCE; m];
    let mu_eta = DMatrix::from_fn(m, r, |j, c| {
        eta_mean(h.varphi, folded_normal_mean(mu_p[(j, c)], INIT_COVARIANCE))
    });
    let e_theta = 1.0 / var;
    let theta_shape = h.c0 + 0.5 * (n * m) as f64;
    Ok(LaplaceState {
        mu_p,
        sigma_p,
        mu_t,
        sigma_t: DMatrix::identity(r, r) * INIT_COVARIANCE,
        mu_xbar: DVector::zeros(m),
        sigma_xbar: 1.0 / (n as f64 * e_theta + h.varsigma),
        theta_shape,
        theta_rate: theta_shape / e_theta,
        mu_eta,
    })
}

/// `Σ_i E‖y_i − P t_i − x̄‖²` under the factorized posterior.
fn expected_sq_residual(
    y: &DMatrix<f64>,
    mu_p: &DMatrix<f64>,
    sigma_p: &[DMatrix<f64>],
    mu_t: &DMatrix<f64>,
    sigma_t: &DMatrix<f64>,
    mu_xbar: &DVector<f64>,
    sigma_xbar: f64,
) -> f64 {
    let (m, n) = (y.nrows() as f64, y.ncols() as f64);
    let mut resid = y - mu_p * mu_t;
    for mut col in resid.column_iter_mut() {
        col -= mu_xbar;
    }
    let sum_sp = sigma_p
        .iter()
        .fold(DMatrix::zeros(mu_p.ncols(), mu_p.ncols()), |acc, s| acc + s);
    let epp = mu_p.tr_mul(mu_p) + &sum_sp;
    let ttt = mu_t * mu_t.transpose();
    resid.norm_squared() + n * (&epp * sigma_t).trace() + (&sum_sp * ttt).trace() + n * m * sigma_xbar
}

/// One sweep in the order P, t, x̄, ϑ, η.
pub fn sweep_laplace(state: &LaplaceState, x: &DataMatrix, h: &LaplaceHyper) -> Result<LaplaceState> {
    let y = x.values();
    let (m, n) = (y.nrows(), y.ncols());
    let r = state.mu_p.ncols();
    if state.mu_p.nrows() != m || state.n_samples() != n {
        return Err(Error::dim("state does not match data shape"));
    }
    let theta = state.e_theta();

    // q(P): per row, Σ_j = (ϑ Σ_i E[t_i t_iᵀ] + dg(E[η_j])⁻¹)⁻¹,
    // μ_j = ϑ Σ_j Σ_i E[t_i](y_ji − E[x̄_j]).
    let ett = &state.mu_t * state.mu_t.transpose() + &state.sigma_t * n as f64;
    let mut centered = y.clone();
    for mut col in centered.column_iter_mut() {
        col -= &state.mu_xbar;
    }
    let cross = &centered * state.mu_t.transpose();
    let mut mu_p = DMatrix::zeros(m, r);
    let mut sigma_p = Vec::with_capacity(m);
    for j in 0..m {
        let mut precision = &ett * theta;
        for c in 0..r {
            precision[(c, c)] += 1.0 / state.mu_eta[(j, c)];
        }
        let (mut cov, _) = spd_inverse(&precision)?;
        symmetrize(&mut cov);
        let row = (&cov * cross.row(j).transpose()) * theta;
        mu_p.set_row(j, &row.transpose());
        sigma_p.push(cov);
    }

    // q(t): Σt = (ϑ E[PᵀP] + I)⁻¹, μ_i = ϑ Σt E[P]ᵀ(y_i − E[x̄]).
    let sum_sp = sigma_p.iter().fold(DMatrix::zeros(r, r), |acc, s| acc + s);
    let epp = mu_p.tr_mul(&mu_p) + &sum_sp;
    let sigma_t = score_covariance(&epp, theta)?;
    let mu_t = (&sigma_t * mu_p.transpose() * &centered) * theta;

    // q(x̄): Σ = (nϑ + ς)⁻¹ I, μ = ϑ Σ Σ_i (y_i − E[P] E[t_i]).
    let sigma_xbar = 1.0 / (n as f64 * theta + h.varsigma);
    let low_rank = &mu_p * &mu_t;
    let mu_xbar = DVector::from_fn(m, |j, _| {
        theta * sigma_xbar * (0..n).map(|i| y[(j, i)] - low_rank[(j, i)]).sum::<f64>()
    });

    // q(ϑ): c = c0 + nm/2, d = d0 + ½ Σ_i E‖y_i − P t_i − x̄‖².
    let sq = expected_sq_residual(y, &mu_p, &sigma_p, &mu_t, &sigma_t, &mu_xbar, sigma_xbar);
    if !(sq.is_finite() && sq > 0.0) {
        return Err(Error::Numerical(format!("expected squared residual is {sq}")));
    }
    let theta_rate = h.d0 + 0.5 * sq;

    // q(η): only its mean is needed.
    let mu_eta = DMatrix::from_fn(m, r, |j, c| {
        eta_mean(h.varphi, folded_normal_mean(mu_p[(j, c)], sigma_p[j][(c, c)]))
    });

    Ok(LaplaceState {
        mu_p,
        sigma_p,
        mu_t,
        sigma_t,
        mu_xbar,
        sigma_xbar,
        theta_shape: h.c0 + 0.5 * (n * m) as f64,
        theta_rate,
        mu_eta,
    })
}

/// `(ϑ E[PᵀP] + I)⁻¹`.
fn score_covariance(epp: &DMatrix<f64>, theta: f64) -> Result<DMatrix<f64>> {
    let r = epp.nrows();
    let (mut cov, _) = spd_inverse(&(epp * theta + DMatrix::identity(r, r)))?;
    symmetrize(&mut cov);
    Ok(cov)
}

fn relative_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / new.abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    /// Per sweep, the larger of the relative changes of `‖E[P]‖_F` and
    /// `‖E[t]‖_F`.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceModel {
    #[serde(with = "serde_mat::matrix")]
    pub loading: DMatrix<f64>,
    pub latent_scale: Vec<f64>,
    pub noise_precision: f64,
    pub mean_correction: Vec<f64>,
    pub rank: usize,
    pub diagnostics: LaplaceDiagnostics,
}

#[derive(Debug, Clone)]
pub struct LaplaceFit {
    pub model: LaplaceModel,
    pub state: LaplaceState,
}

pub fn fit_laplace(x: &DataMatrix, h: &LaplaceHyper, seed: u64) -> Result<LaplaceModel> {
    fit_laplace_detailed(x, h, seed).map(|f| f.model)
}

/// Sweeps until the relative changes of `‖E[P]‖_F` and `‖E[t]‖_F` both
/// drop below `tol`, or `max_iters` is reached.
pub fn fit_laplace_detailed(x: &DataMatrix, h: &LaplaceHyper, seed: u64) -> Result<LaplaceFit> {
    let mut state = init_laplace(x, h, seed)?;
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..h.max_iters {
        let next = sweep_laplace(&state, x, h)?;
        let dp = relative_change(next.mu_p.norm(), state.mu_p.norm());
        let dt = relative_change(next.mu_t.norm(), state.mu_t.norm());
        trace.push(dp.max(dt));
        state = next;
        if dp < h.tol && dt < h.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("laplace fit did not converge in {} sweeps", h.max_iters);
    }
    let diagnostics = LaplaceDiagnostics {
        converged,
        iterations: trace.len(),
        trace,
    };
    let model = summarize(&state, diagnostics);
    Ok(LaplaceFit { model, state })
}

fn summarize(state: &LaplaceState, diagnostics: LaplaceDiagnostics) -> LaplaceModel {
    let r = state.mu_p.ncols();
    let energy = |i: usize| state.mu_p.column(i).norm() * state.mu_t.row(i).norm();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| energy(b).total_cmp(&energy(a)));
    let loading = orthonormalize(&state.mu_p.select_columns(&order));
    let n = state.n_samples() as f64;
    let latent_scale = order
        .iter()
        .map(|&i| {
            let row = state.mu_t.row(i);
            let mean = row.sum() / n;
            row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .collect();
    LaplaceModel {
        loading,
        latent_scale,
        noise_precision: state.e_theta(),
        mean_correction: state.mu_xbar.iter().copied().collect(),
        rank: r,
        diagnostics,
    }
}

/// Latent coordinates `loadingᵀ y` of a standardized sample.
pub fn project_laplace(model: &LaplaceModel, y: &DVector<f64>) -> Result<DVector<f64>> {
    crate::gaussian::project(&model.loading, y)
}

/// Versioned on-disk form of a fitted Laplace model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceDocument {
    pub schema: String,
    #[serde(flatten)]
    pub model: LaplaceModel,
    pub scaler: Scaler,
    pub hyper: LaplaceHyper,
}

impl LaplaceDocument {
    pub fn new(model: LaplaceModel, scaler: Scaler, hyper: LaplaceHyper) -> Self {
        Self {
            schema: LAPLACE_SCHEMA.into(),
            model,
            scaler,
            hyper,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(s)?;
        if doc.schema != LAPLACE_SCHEMA {
            return Err(Error::invalid(format!("unsupported schema {:?}", doc.schema)));
        }
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::subspace_angle_deg;
    use crate::synth;
    use proptest::prelude::*;

    #[test]
    fn score_covariance_plug_in() {
        let st = score_covariance(&DMatrix::identity(4, 4), 1.0).unwrap();
        assert!((st - DMatrix::identity(4, 4) * 0.5).norm() < 1e-15);
    }

    #[test]
    fn eta_mean_arithmetic() {
        assert_eq!(eta_mean(2.0, 0.0), 1.0);
        assert!((eta_mean(2.0, 3.0) - 4.0).abs() < 1e-15);
    }

    /// Trapezoid integration of `|z|` against the normal density.
    fn folded_mean_by_quadrature(mu: f64, var: f64) -> f64 {
        let s = var.sqrt();
        let (lo, hi) = (mu - 12.0 * s, mu + 12.0 * s);
        let steps = 200_000;
        let dz = (hi - lo) / steps as f64;
        let f = |z: f64| z.abs() * (-(z - mu).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
        let mut acc = 0.5 * (f(lo) + f(hi));
        for k in 1..steps {
            acc += f(lo + k as f64 * dz);
        }
        acc * dz
    }

    #[test]
    fn folded_normal_matches_quadrature() {
        for &(mu, var) in &[(0.0, 1.0), (0.3, 0.04), (-1.5, 0.5), (2.0, 1e-4), (-0.01, 2.0)] {
            let exact = folded_normal_mean(mu, var);
            assert!((exact - folded_mean_by_quadrature(mu, var)).abs() < 1e-8, "mu {mu} var {var}");
        }
        assert!((folded_normal_mean(0.0, 1.0) - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert_eq!(folded_normal_mean(-3.0, 0.0), 3.0);
    }

    #[test]
    fn noise_free_rank_one_is_reconstructed() {
        let u = DVector::from_fn(6, |j, _| (j as f64 + 1.0).sin() + 0.3);
        let v = DVector::from_fn(40, |i, _| (0.37 * i as f64).cos());
        let x = DataMatrix::from_values(&u * v.transpose()).unwrap();
        let h = LaplaceHyper { r: 1, ..Default::default() };
        let fit = fit_laplace_detailed(&x, &h, 0).unwrap();
        let s = &fit.state;
        let mut recon = &s.mu_p * &s.mu_t;
        for mut col in recon.column_iter_mut() {
            col += &s.mu_xbar;
        }
        let rel = (x.values() - recon).norm_squared() / x.values().norm_squared();
        assert!(rel < 1e-4, "relative error {rel}");
    }

    #[test]
    fn invariants_hold_every_sweep() {
        let p = synth::low_rank(12, 150, 3, 20.0, 4);
        let h = LaplaceHyper { r: 3, ..Default::default() };
        let mut s = init_laplace(&p.data, &h, 0).unwrap();
        for _ in 0..60 {
            s = sweep_laplace(&s, &p.data, &h).unwrap();
            assert!(s.min_covariance_eigenvalue() > 0.0);
            assert!(s.sigma_xbar > 0.0 && s.e_theta() > 0.0);
            assert!(s.mu_eta.iter().all(|&e| e > 0.0));
            let abs = s.e_abs_p();
            for (a, m) in abs.iter().zip(s.mu_p.iter()) {
                assert!(*a >= m.abs());
            }
            for cov in &s.sigma_p {
                assert_eq!(cov, &cov.transpose());
            }
        }
    }

    #[test]
    fn recovers_clean_subspace() {
        let p = synth::low_rank(16, 300, 3, 20.0, 8);
        let h = LaplaceHyper { r: 3, ..Default::default() };
        let model = fit_laplace(&p.data, &h, 0).unwrap();
        assert!(model.diagnostics.converged);
        assert!(subspace_angle_deg(&p.loading, &model.loading) < 5.0);
        let gram = model.loading.tr_mul(&model.loading);
        assert!((gram - DMatrix::identity(3, 3)).norm() < 1e-8);
        let noise = 1.0 / model.noise_precision;
        assert!(noise > 0.5 * p.noise_var && noise < 2.0 * p.noise_var);
    }

    #[test]
    fn stronger_penalty_does_not_add_large_entries() {
        let p = synth::sparse_low_rank(12, 150, 3, 20.0, 0.6, 6);
        let mut counts = Vec::new();
        let mut last = usize::MAX;
        for varphi in [4.0, 1.0, 0.25, 0.0625, 0.015625, 1e-3, 1e-4] {
            let h = LaplaceHyper { r: 3, varphi, max_iters: 2000, ..Default::default() };
            let fit = fit_laplace_detailed(&p.data, &h, 0).unwrap();
            let count = fit.state.mu_p.iter().filter(|v| v.abs() > 1e-3).count();
            assert!(count <= last, "varphi {varphi}: {count} > {last}");
            last = count;
            counts.push(count);
        }
        assert!(counts.last() < counts.first());
    }

    #[test]
    fn fits_are_reproducible() {
        let p = synth::low_rank(10, 80, 2, 20.0, 5);
        let h = LaplaceHyper { r: 2, ..Default::default() };
        assert_eq!(fit_laplace(&p.data, &h, 3).unwrap(), fit_laplace(&p.data, &h, 3).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        let zero = DataMatrix::from_values(DMatrix::zeros(3, 5)).unwrap();
        assert!(matches!(init_laplace(&zero, &LaplaceHyper { r: 1, ..Default::default() }, 0), Err(Error::Degenerate(_))));
        let p = synth::low_rank(4, 20, 1, 20.0, 0);
        assert!(init_laplace(&p.data, &LaplaceHyper { r: 5, ..Default::default() }, 0).is_err());
        assert!(init_laplace(&p.data, &LaplaceHyper { r: 1, varphi: 0.0, ..Default::default() }, 0).is_err());
    }

    fn model() -> &'static LaplaceModel {
        static MODEL: std::sync::OnceLock<LaplaceModel> = std::sync::OnceLock::new();
        MODEL.get_or_init(|| {
            let p = synth::low_rank(8, 100, 3, 20.0, 2);
            fit_laplace(&p.data, &LaplaceHyper { r: 3, ..Default::default() }, 0).unwrap()
        })
    }

    #[test]
    fn projection_examples() {
        let model = model();
        assert_eq!(project_laplace(model, &DVector::zeros(8)).unwrap(), DVector::zeros(3));
        let e1 = project_laplace(model, &model.loading.column(0).into_owned()).unwrap();
        assert!((e1 - DVector::from_vec(vec![1.0, 0.0, 0.0])).norm() < 1e-8);
        assert!(project_laplace(model, &DVector::zeros(9)).is_err());
        let y = DVector::from_fn(8, |j, _| (j as f64 * 0.9).cos());
        let got = project_laplace(model, &y).unwrap();
        for c in 0..3 {
            let acc: f64 = (0..8).map(|j| model.loading[(j, c)] * y[j]).sum();
            assert!((got[c] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn document_round_trip() {
        let p = synth::low_rank(6, 50, 2, 20.0, 1);
        let h = LaplaceHyper { r: 2, ..Default::default() };
        let doc = LaplaceDocument::new(fit_laplace(&p.data, &h, 0).unwrap(), Scaler::fit(&p.data).unwrap(), h);
        assert_eq!(LaplaceDocument::from_json(&doc.to_json().unwrap()).unwrap(), doc);
        let other = doc.to_json().unwrap().replace(LAPLACE_SCHEMA, crate::gaussian::GAUSSIAN_SCHEMA);
        assert!(LaplaceDocument::from_json(&other).is_err());
    }

    proptest! {
        #[test]
        fn folded_mean_dominates_absolute_mean(mu in -10.0f64..10.0, var in 1e-8f64..10.0) {
            prop_assert!(folded_normal_mean(mu, var) >= mu.abs());
        }

        #[test]
        fn projection_is_linear(
            y1 in prop::collection::vec(-5.0f64..5.0, 8),
            y2 in prop::collection::vec(-5.0f64..5.0, 8),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let (y1, y2) = (DVector::from_vec(y1), DVector::from_vec(y2));
            let lhs = project_laplace(model(), &(&y1 * a + &y2 * b)).unwrap();
            let rhs = project_laplace(model(), &y1).unwrap() * a + project_laplace(model(), &y2).unwrap() * b;
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
