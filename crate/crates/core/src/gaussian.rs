//! Sparse PCA with an ARD Gaussian prior, fit by mean-field variational
//! inference.
//!
//! The standardized data matrix `X` (sensors × samples) is decomposed as
//! `X = P Tᵀ + X̄ + Ξ`. Columns `p_i` of `P` and `t_i` of `T` share a Gamma
//! distributed precision `γ_i`; components whose precision diverges are
//! pruned, which is how the rank is selected. `X̄` is an entry-wise sparse
//! term whose precisions `α_ji` share a Gamma hyperprior tied to the noise
//! level, and `Ξ` is isotropic Gaussian noise of precision `β` under a
//! Jeffreys prior.
//!
//! A component is pruned once its `E[γ_i]` exceeds `prune_threshold` times
//! the smallest active `E[γ]`.
//!
//! Posterior factors: rows of `P` are Gaussian with one shared `k × k`
//! covariance, likewise rows of `T`; every `X̄_ji` is an independent scalar
//! Gaussian; `γ_i`, `α_ji` and `β` are Gamma.

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::data::{DataMatrix, Scaler};
use crate::error::{Error, Result};
use crate::linalg::{log_det_spd, min_eigenvalue, orthonormalize, spd_inverse, symmetrize, truncated_svd};
use crate::serde_mat;

pub const GAUSSIAN_SCHEMA: &str = "vbspca-gaussian/1";

const INIT_COVARIANCE: f64 = 1e-2;

/// Prior mean of `α_ji / β` for an entry the sparse term leaves alone; it
/// caps the share of an ordinary residual leaked into `X̄` at `1/(1 + 100)`.
const ALPHA_OFF_RATIO: f64 = 1e2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianHyper {
    pub a0: f64,
    pub b0: f64,
    pub r_max: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub prune_threshold: f64,
    /// Residual magnitude, in noise standard deviations, above which an entry
    /// is explained by the sparse term `X̄` instead of the noise.
    pub outlier_threshold: f64,
}

impl Default for GaussianHyper {
    fn default() -> Self {
        Self {
            a0: 1e-5,
            b0: 1e-5,
            r_max: 10,
            max_iters: 500,
            tol: 1e-6,
            prune_threshold: 20.0,
            outlier_threshold: 4.0,
        }
    }
}

impl GaussianHyper {
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        if !(self.a0 > 0.0 && self.b0 > 0.0) {
            return Err(Error::invalid("a0 and b0 must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        if !(self.prune_threshold > 1.0) {
            return Err(Error::invalid("prune_threshold is a ratio and must exceed 1"));
        }
        if !(self.outlier_threshold > 0.0) {
            return Err(Error::invalid("outlier_threshold must be positive"));
        }
        if self.r_max == 0 || self.r_max > m.min(n) {
            return Err(Error::invalid(format!(
                "r_max = {} must lie in 1..={}",
                self.r_max,
                m.min(n)
            )));
        }
        Ok(())
    }
}

/// Variational posterior of the Gaussian-prior model.
///
/// Gamma factors are stored by shape and rate; `e_*` accessors return the
/// posterior means. Inactive components keep zero mean columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mu_p: DMatrix<f64>,
    pub sigma_p: DMatrix<f64>,
    pub mu_t: DMatrix<f64>,
    pub sigma_t: DMatrix<f64>,
    pub mu_xbar: DMatrix<f64>,
    pub sigma_xbar: DMatrix<f64>,
    pub gamma_shape: f64,
    pub gamma_rate: DVector<f64>,
    pub alpha_rate: DMatrix<f64>,
    /// Shape and rate of the Gamma hyperprior on every `α_ji`.
    pub alpha_prior: (f64, f64),
    pub beta_shape: f64,
    pub beta_rate: f64,
    pub active_mask: Vec<bool>,
}

impl GaussianState {
    pub fn e_gamma(&self) -> DVector<f64> {
        self.gamma_rate.map(|b| self.gamma_shape / b)
    }

    /// Shape of every `q(α_ji)`.
    pub fn alpha_shape(&self) -> f64 {
        self.alpha_prior.0 + 0.5
    }

    pub fn e_alpha(&self) -> DMatrix<f64> {
        let shape = self.alpha_shape();
        self.alpha_rate.map(|b| shape / b)
    }

    pub fn e_beta(&self) -> f64 {
        self.beta_shape / self.beta_rate
    }

    pub fn active_indices(&self) -> Vec<usize> {
        self.active_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.active_mask.iter().filter(|&&a| a).count()
    }

    /// Smallest eigenvalue over both shared covariances, restricted to the
    /// active block.
    pub fn min_covariance_eigenvalue(&self) -> f64 {
        let act = self.active_indices();
        let sp = self.sigma_p.select_rows(&act).select_columns(&act);
        let st = self.sigma_t.select_rows(&act).select_columns(&act);
        min_eigenvalue(&sp).min(min_eigenvalue(&st))
    }

    fn n_sensors(&self) -> usize {
        self.mu_p.nrows()
    }

    fn n_samples(&self) -> usize {
        self.mu_t.nrows()
    }
}

fn population_variance(x: &DMatrix<f64>) -> f64 {
    let len = x.len() as f64;
    let mean = x.sum() / len;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len
}

/// Truncated-SVD initialization. The seed only fills components beyond the
/// numerical rank of `X`, whose singular vectors are otherwise arbitrary.
pub fn init_state(x: &DataMatrix, h: &GaussianHyper, seed: u64) -> Result<GaussianState> {
    let (m, n) = (x.n_sensors(), x.n_samples());
    h.validate(m, n)?;
    let v = x.values();
    let var = population_variance(v);
    if !(var > 0.0) {
        return Err(Error::Degenerate("data matrix has zero variance".into()));
    }
    let k = h.r_max;
    let (u, s, vk) = truncated_svd(v, k);
    let s_max = s[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu_p = DMatrix::zeros(m, k);
    let mut mu_t = DMatrix::zeros(n, k);
    for c in 0..k {
        if s[c] > 1e-12 * s_max {
            let w = s[c].sqrt();
            mu_p.set_column(c, &(u.column(c) * w));
            mu_t.set_column(c, &(vk.column(c) * w));
        } else {
            let w = 1e-6 * s_max.sqrt();
            for j in 0..m {
                mu_p[(j, c)] = w * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) / (m as f64).sqrt();
            }
            for i in 0..n {
                mu_t[(i, c)] = w * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) / (n as f64).sqrt();
            }
        }
    }
    let gamma_shape = gamma_posterior(h, m, n, 0.0, 0.0).0;
    let beta_shape = 0.5 * (m * n) as f64;
    let e_beta = 1.0 / var;
    let noise_var = robust_noise_variance(v, &u, &s, &vk).max(1e-12 * var);
    let kappa2 = h.outlier_threshold * h.outlier_threshold;
    let a_alpha = 2.0 * kappa2 / ALPHA_OFF_RATIO;
    let b_alpha = a_alpha * noise_var / ALPHA_OFF_RATIO;
    let e_alpha = a_alpha / b_alpha;
    Ok(GaussianState {
        mu_p,
        sigma_p: DMatrix::identity(k, k) * INIT_COVARIANCE,
        mu_t,
        sigma_t: DMatrix::identity(k, k) * INIT_COVARIANCE,
        mu_xbar: DMatrix::zeros(m, n),
        sigma_xbar: DMatrix::from_element(m, n, 1.0 / (e_beta + e_alpha)),
        gamma_shape,
        gamma_rate: DVector::from_element(k, gamma_shape),
        alpha_rate: DMatrix::from_element(m, n, (a_alpha + 0.5) / e_alpha),
        alpha_prior: (a_alpha, b_alpha),
        beta_shape,
        beta_rate: beta_shape / e_beta,
        active_mask: vec![true; k],
    })
}

/// Noise variance of the residual left by the rank-k truncated SVD, from the
/// median absolute residual so that gross outliers do not inflate it, and
/// corrected for the degrees of freedom the truncation used.
fn robust_noise_variance(x: &DMatrix<f64>, u: &DMatrix<f64>, s: &DVector<f64>, v: &DMatrix<f64>) -> f64 {
    let (m, n, k) = (x.nrows(), x.ncols(), s.len());
    if (m - k) * (n - k) == 0 {
        return 0.0;
    }
    let resid = x - u * DMatrix::from_diagonal(s) * v.transpose();
    let mut abs: Vec<f64> = resid.iter().map(|e| e.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mid = abs.len() / 2;
    let median = if abs.len() % 2 == 0 { 0.5 * (abs[mid - 1] + abs[mid]) } else { abs[mid] };
    let sigma = 1.482_602_218_505_602 * median;
    sigma * sigma * (m * n) as f64 / ((m - k) * (n - k)) as f64
}

/// Active-component view of the factor moments.
struct Factors {
    p: DMatrix<f64>,
    t: DMatrix<f64>,
    sp: DMatrix<f64>,
    st: DMatrix<f64>,
}

impl Factors {
    fn of(state: &GaussianState, act: &[usize]) -> Self {
        Self {
            p: state.mu_p.select_columns(act),
            t: state.mu_t.select_columns(act),
            sp: state.sigma_p.select_rows(act).select_columns(act),
            st: state.sigma_t.select_rows(act).select_columns(act),
        }
    }
}

/// `E‖X − P Tᵀ − X̄‖²_F` under the factorized posterior.
fn expected_sq_residual(
    x: &DMatrix<f64>,
    f: &Factors,
    mu_xbar: &DMatrix<f64>,
    sigma_xbar: &DMatrix<f64>,
) -> f64 {
    let (m, n) = (x.nrows() as f64, x.ncols() as f64);
    let resid = x - &f.p * f.t.transpose() - mu_xbar;
    let ptp = f.p.tr_mul(&f.p);
    let ttt = f.t.tr_mul(&f.t);
    resid.norm_squared()
        + n * (&ptp * &f.st).trace()
        + m * (&ttt * &f.sp).trace()
        + m * n * (&f.sp * &f.st).trace()
        + sigma_xbar.sum()
}

fn check_pd(s: &DMatrix<f64>, what: &str) -> Result<()> {
    if cfg!(debug_assertions) {
        let e = min_eigenvalue(s);
        if !(e > 0.0) {
            return Err(Error::Numerical(format!("{what} lost positive definiteness (eigmin {e:e})")));
        }
    }
    Ok(())
}

/// One coordinate-ascent sweep in the order P, T, P/T scale balance, X̄, γ,
/// α, β.
pub fn sweep_gaussian(state: &GaussianState, x: &DataMatrix, h: &GaussianHyper) -> Result<GaussianState> {
    let xv = x.values();
    let (m, n) = (xv.nrows(), xv.ncols());
    if state.n_sensors() != m || state.n_samples() != n {
        return Err(Error::dim("state does not match data shape"));
    }
    let act = state.active_indices();
    if act.is_empty() {
        return Err(Error::AllPruned);
    }
    let e_gamma = DVector::from_iterator(act.len(), act.iter().map(|&i| state.gamma_shape / state.gamma_rate[i]));
    let beta = state.e_beta();
    let Factors { t, st, .. } = Factors::of(state, &act);

    let alpha_shape = state.alpha_shape();
    let centered = xv - &state.mu_xbar;

    // q(P): Σp = (β E[TᵀT] + dg(E[γ]))⁻¹, rows μ_j = β Σp E[T]ᵀ (x_j − E[x̄_j]).
    let ett = t.tr_mul(&t) + &st * n as f64;
    let sp = factor_covariance(&ett, beta, &e_gamma)?;
    check_pd(&sp, "Σp")?;
    let p = (&centered * &t) * (&sp * beta);

    // q(T), symmetric in the roles of P and T.
    let epp = p.tr_mul(&p) + &sp * m as f64;
    let st = factor_covariance(&epp, beta, &e_gamma)?;
    check_pd(&st, "Σt")?;
    let t = centered.tr_mul(&p) * (&st * beta);
    let (p, t, sp, st) = rebalance(p, t, sp, st, &e_gamma);

    // q(X̄_ji): variance 1/(β + E[α_ji]), mean shrinks the low-rank residual.
    let low_rank = &p * t.transpose();
    let mut mu_xbar = DMatrix::zeros(m, n);
    let mut sigma_xbar = DMatrix::zeros(m, n);
    for i in 0..n {
        for j in 0..m {
            let e_alpha = alpha_shape / state.alpha_rate[(j, i)];
            let var = 1.0 / (beta + e_alpha);
            sigma_xbar[(j, i)] = var;
            mu_xbar[(j, i)] = beta * var * (xv[(j, i)] - low_rank[(j, i)]);
        }
    }

    // q(γ): a = a0 + (m + n)/2, b_i = b0 + (E[p_iᵀp_i] + E[t_iᵀt_i])/2.
    let mut gamma_rate = state.gamma_rate.clone();
    for (c, &i) in act.iter().enumerate() {
        let epp_i = p.column(c).norm_squared() + m as f64 * sp[(c, c)];
        let ett_i = t.column(c).norm_squared() + n as f64 * st[(c, c)];
        gamma_rate[i] = gamma_posterior(h, m, n, epp_i, ett_i).1;
    }

    // q(α_ji) = Gam(a_α + 1/2, b_α + E[X̄_ji²]/2). With a_α = b_α = 0 this is
    // the Jeffreys result E[α_ji] = 1/(μ² + σ²).
    let b_alpha = state.alpha_prior.1;
    let alpha_rate = mu_xbar.zip_map(&sigma_xbar, |mu, var| b_alpha + 0.5 * (mu * mu + var));

    // q(β) = Gam(mn/2, E‖X − PTᵀ − X̄‖²/2).
    let f = Factors { p, t, sp, st };
    let sq = expected_sq_residual(xv, &f, &mu_xbar, &sigma_xbar);
    if !(sq.is_finite() && sq > 0.0) {
        return Err(Error::Numerical(format!("expected squared residual is {sq}")));
    }

    let mut next = GaussianState {
        mu_xbar,
        sigma_xbar,
        gamma_rate,
        alpha_rate,
        beta_rate: 0.5 * sq,
        ..state.clone()
    };
    scatter(&mut next, &act, f);
    Ok(next)
}

/// Shared row covariance `(β S + dg(E[γ]))⁻¹` for second moment `S`.
fn factor_covariance(second_moment: &DMatrix<f64>, beta: f64, e_gamma: &DVector<f64>) -> Result<DMatrix<f64>> {
    let mut precision = second_moment * beta;
    for (c, g) in e_gamma.iter().enumerate() {
        precision[(c, c)] += g;
    }
    let (mut cov, _) = spd_inverse(&precision)?;
    symmetrize(&mut cov);
    Ok(cov)
}

/// Shape and rate of `q(γ_i)` given `E[p_iᵀp_i]` and `E[t_iᵀt_i]`.
fn gamma_posterior(h: &GaussianHyper, m: usize, n: usize, epp: f64, ett: f64) -> (f64, f64) {
    (h.a0 + 0.5 * (m + n) as f64, h.b0 + 0.5 * (epp + ett))
}

/// Rescales `p_i → d_i p_i`, `t_i → t_i / d_i` (covariances transformed
/// accordingly) with each `d_i` maximizing the ELBO at fixed `γ`. The product
/// `P Tᵀ` and the likelihood are unchanged; only the prior and entropy terms
/// move, giving `γ A u² − (m − n) u − γ B = 0` for `u = d²`, where
/// `A = E‖p_i‖²` and `B = E‖t_i‖²`. Without this step the split of scale
/// between `P` and `T` converges very slowly.
fn rebalance(
    mut p: DMatrix<f64>,
    mut t: DMatrix<f64>,
    mut sp: DMatrix<f64>,
    mut st: DMatrix<f64>,
    e_gamma: &DVector<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = (p.nrows() as f64, t.nrows() as f64);
    let k = p.ncols();
    let mut d = DVector::from_element(k, 1.0);
    for c in 0..k {
        let a = p.column(c).norm_squared() + m * sp[(c, c)];
        let b = t.column(c).norm_squared() + n * st[(c, c)];
        let g = e_gamma[c];
        if !(a > 0.0 && b > 0.0) {
            continue;
        }
        let diff = m - n;
        let u = (diff + (diff * diff + 4.0 * g * g * a * b).sqrt()) / (2.0 * g * a);
        if u.is_finite() && u > 0.0 {
            d[c] = u.sqrt();
        }
    }
    for c in 0..k {
        p.column_mut(c).scale_mut(d[c]);
        t.column_mut(c).scale_mut(1.0 / d[c]);
    }
    for r in 0..k {
        for c in 0..k {
            sp[(r, c)] *= d[r] * d[c];
            st[(r, c)] /= d[r] * d[c];
        }
    }
    (p, t, sp, st)
}

/// Writes active-block factors back into the full-width state.
fn scatter(state: &mut GaussianState, act: &[usize], f: Factors) {
    for (c, &i) in act.iter().enumerate() {
        state.mu_p.set_column(i, &f.p.column(c));
        state.mu_t.set_column(i, &f.t.column(c));
        for (d, &l) in act.iter().enumerate() {
            state.sigma_p[(i, l)] = f.sp[(c, d)];
            state.sigma_t[(i, l)] = f.st[(c, d)];
        }
    }
}

fn gamma_entropy(shape: f64, rate: f64) -> f64 {
    shape - rate.ln() + ln_gamma(shape) + (1.0 - shape) * digamma(shape)
}

/// Individual ELBO contributions, reported when the total is not finite.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ElboTerms {
    pub likelihood: f64,
    pub prior_p: f64,
    pub prior_t: f64,
    pub prior_gamma: f64,
    pub prior_xbar: f64,
    pub prior_alpha: f64,
    pub prior_beta: f64,
    pub entropy_p: f64,
    pub entropy_t: f64,
    pub entropy_xbar: f64,
    pub entropy_gamma: f64,
    pub entropy_alpha: f64,
    pub entropy_beta: f64,
}

impl ElboTerms {
    pub fn total(&self) -> f64 {
        self.likelihood
            + self.prior_p
            + self.prior_t
            + self.prior_gamma
            + self.prior_xbar
            + self.prior_alpha
            + self.prior_beta
            + self.entropy_p
            + self.entropy_t
            + self.entropy_xbar
            + self.entropy_gamma
            + self.entropy_alpha
            + self.entropy_beta
    }
}

/// ELBO split by term. Jeffreys priors are improper, so their normalizing
/// constants are dropped; the bound is defined up to that constant.
pub fn elbo_terms(state: &GaussianState, x: &DataMatrix, h: &GaussianHyper) -> Result<ElboTerms> {
    let xv = x.values();
    let (m, n) = (xv.nrows() as f64, xv.ncols() as f64);
    let ln2pi = (2.0 * PI).ln();
    let act = state.active_indices();
    let k = act.len() as f64;
    let f = Factors::of(state, &act);

    let (c, d) = (state.beta_shape, state.beta_rate);
    let e_beta = c / d;
    let e_ln_beta = digamma(c) - d.ln();
    let sq = expected_sq_residual(xv, &f, &state.mu_xbar, &state.sigma_xbar);

    let mut t = ElboTerms {
        likelihood: 0.5 * m * n * (e_ln_beta - ln2pi) - 0.5 * e_beta * sq,
        prior_beta: -e_ln_beta,
        entropy_beta: gamma_entropy(c, d),
        ..Default::default()
    };

    let a = state.gamma_shape;
    let ln_gamma_a0 = ln_gamma(h.a0);
    for (col, &i) in act.iter().enumerate() {
        let b = state.gamma_rate[i];
        let e_g = a / b;
        let e_ln_g = digamma(a) - b.ln();
        let epp = f.p.column(col).norm_squared() + m * f.sp[(col, col)];
        let ett = f.t.column(col).norm_squared() + n * f.st[(col, col)];
        t.prior_p += 0.5 * m * e_ln_g - 0.5 * e_g * epp;
        t.prior_t += 0.5 * n * e_ln_g - 0.5 * e_g * ett;
        t.prior_gamma += h.a0 * h.b0.ln() - ln_gamma_a0 + (h.a0 - 1.0) * e_ln_g - h.b0 * e_g;
        t.entropy_gamma += gamma_entropy(a, b);
    }
    t.prior_p -= 0.5 * m * k * ln2pi;
    t.prior_t -= 0.5 * n * k * ln2pi;
    if !act.is_empty() {
        t.entropy_p = m * (0.5 * k * (1.0 + ln2pi) + 0.5 * log_det_spd(&f.sp)?);
        t.entropy_t = n * (0.5 * k * (1.0 + ln2pi) + 0.5 * log_det_spd(&f.st)?);
    }

    let (a_alpha, b_alpha) = state.alpha_prior;
    let shape = state.alpha_shape();
    let psi = digamma(shape);
    let h_alpha_const = shape + ln_gamma(shape) + (1.0 - shape) * psi;
    let prior_alpha_const = a_alpha * b_alpha.ln() - ln_gamma(a_alpha);
    for (idx, &rate) in state.alpha_rate.iter().enumerate() {
        let mu = state.mu_xbar[idx];
        let var = state.sigma_xbar[idx];
        let e_alpha = shape / rate;
        let e_ln_alpha = psi - rate.ln();
        t.prior_xbar += 0.5 * e_ln_alpha - 0.5 * e_alpha * (mu * mu + var) - 0.5 * ln2pi;
        t.prior_alpha += prior_alpha_const + (a_alpha - 1.0) * e_ln_alpha - b_alpha * e_alpha;
        t.entropy_xbar += 0.5 * (2.0 * PI * E * var).ln();
        t.entropy_alpha += h_alpha_const - rate.ln();
    }
    Ok(t)
}

/// Evidence lower bound of the current posterior approximation.
pub fn compute_elbo(state: &GaussianState, x: &DataMatrix, h: &GaussianHyper) -> Result<f64> {
    let terms = elbo_terms(state, x, h)?;
    let total = terms.total();
    if !total.is_finite() {
        return Err(Error::Numerical(format!("non-finite ELBO; terms: {terms:?}")));
    }
    Ok(total)
}

/// Deactivates every component whose `E[γ_i]` exceeds `prune_threshold`
/// times the smallest active `E[γ]`.
pub fn prune(state: &GaussianState, h: &GaussianHyper) -> Result<GaussianState> {
    let e_gamma = state.e_gamma();
    let floor = state
        .active_indices()
        .into_iter()
        .map(|i| e_gamma[i])
        .fold(f64::INFINITY, f64::min);
    let cutoff = h.prune_threshold * floor;
    let mut next = state.clone();
    for i in 0..next.active_mask.len() {
        if next.active_mask[i] && e_gamma[i] > cutoff {
            next.active_mask[i] = false;
            next.mu_p.column_mut(i).fill(0.0);
            next.mu_t.column_mut(i).fill(0.0);
            for l in 0..next.active_mask.len() {
                next.sigma_p[(i, l)] = 0.0;
                next.sigma_p[(l, i)] = 0.0;
                next.sigma_t[(i, l)] = 0.0;
                next.sigma_t[(l, i)] = 0.0;
            }
            next.sigma_p[(i, i)] = 1.0 / e_gamma[i];
            next.sigma_t[(i, i)] = 1.0 / e_gamma[i];
        }
    }
    if next.rank() == 0 {
        return Err(Error::AllPruned);
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    /// Convergence metric after every sweep: the ELBO for the Gaussian
    /// variant, the largest relative parameter change for the Laplace one.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    #[serde(with = "serde_mat::matrix")]
    pub loading: DMatrix<f64>,
    pub latent_scale: Vec<f64>,
    pub noise_precision: f64,
    pub mean_correction: Vec<f64>,
    pub rank: usize,
    pub diagnostics: FitDiagnostics,
}

/// ELBO before and after one sweep, and the active count after pruning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub elbo_before: f64,
    pub elbo_after: f64,
    pub active_after_prune: usize,
}

#[derive(Debug, Clone)]
pub struct GaussianFit {
    pub model: GaussianModel,
    pub state: GaussianState,
    pub sweeps: Vec<SweepRecord>,
}

pub fn fit_gaussian(x: &DataMatrix, h: &GaussianHyper, seed: u64) -> Result<GaussianModel> {
    fit_gaussian_detailed(x, h, seed).map(|f| f.model)
}

/// Alternates sweeps and pruning until the relative ELBO change drops below
/// `tol` on a sweep that pruned nothing, or `max_iters` is reached.
pub fn fit_gaussian_detailed(x: &DataMatrix, h: &GaussianHyper, seed: u64) -> Result<GaussianFit> {
    let mut state = init_state(x, h, seed)?;
    let mut elbo = compute_elbo(&state, x, h)?;
    let mut sweeps = Vec::new();
    let mut converged = false;
    for _ in 0..h.max_iters {
        let next = sweep_gaussian(&state, x, h)?;
        let after = compute_elbo(&next, x, h)?;
        let pruned = prune(&next, h)?;
        sweeps.push(SweepRecord {
            elbo_before: elbo,
            elbo_after: after,
            active_after_prune: pruned.rank(),
        });
        let changed = (after - elbo).abs() / after.abs().max(f64::MIN_POSITIVE);
        if pruned.rank() < next.rank() {
            log::debug!("pruned to rank {} after sweep {}", pruned.rank(), sweeps.len());
            elbo = compute_elbo(&pruned, x, h)?;
            state = pruned;
            continue;
        }
        state = pruned;
        elbo = after;
        if changed < h.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("gaussian fit did not converge in {} sweeps", h.max_iters);
    }
    let diagnostics = FitDiagnostics {
        converged,
        iterations: sweeps.len(),
        trace: sweeps.iter().map(|s| s.elbo_after).collect(),
    };
    let model = summarize(&state, diagnostics);
    Ok(GaussianFit { model, state, sweeps })
}

/// Orders surviving components by the energy of `p_i t_iᵀ` and returns the
/// orthonormalized loading plus per-component score variance.
fn summarize(state: &GaussianState, diagnostics: FitDiagnostics) -> GaussianModel {
    let mut act = state.active_indices();
    let energy = |i: usize| state.mu_p.column(i).norm() * state.mu_t.column(i).norm();
    act.sort_by(|&a, &b| energy(b).total_cmp(&energy(a)));
    let loading = orthonormalize(&state.mu_p.select_columns(&act));
    let n = state.n_samples() as f64;
    let latent_scale = act
        .iter()
        .map(|&i| {
            let col = state.mu_t.column(i);
            let mean = col.sum() / n;
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .collect();
    let mean_correction = state
        .mu_xbar
        .row_iter()
        .map(|r| r.sum() / n)
        .collect();
    GaussianModel {
        rank: act.len(),
        loading,
        latent_scale,
        noise_precision: state.e_beta(),
        mean_correction,
        diagnostics,
    }
}

/// Latent coordinates `loadingᵀ y` of a standardized sample.
pub fn project_gaussian(model: &GaussianModel, y: &DVector<f64>) -> Result<DVector<f64>> {
    project(&model.loading, y)
}

pub(crate) fn project(loading: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.len() != loading.nrows() {
        return Err(Error::dim(format!(
            "sample of length {} for a loading over {} sensors",
            y.len(),
            loading.nrows()
        )));
    }
    Ok(loading.tr_mul(y))
}

/// Versioned on-disk form of a fitted Gaussian model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDocument {
    pub schema: String,
    #[serde(flatten)]
    pub model: GaussianModel,
    pub scaler: Scaler,
    pub hyper: GaussianHyper,
}

impl GaussianDocument {
    pub fn new(model: GaussianModel, scaler: Scaler, hyper: GaussianHyper) -> Self {
        Self {
            schema: GAUSSIAN_SCHEMA.into(),
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
        if doc.schema != GAUSSIAN_SCHEMA {
            return Err(Error::invalid(format!("unsupported schema {:?}", doc.schema)));
        }
        Ok(doc)
    }
}
