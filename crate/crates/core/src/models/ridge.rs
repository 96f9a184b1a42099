//! Bayesian ridge regression fitted by evidence maximization.
//!
//! Noise precision α and weight precision λ are re-estimated from the
//! posterior mean `w = α(λI + αXᵀX)⁻¹Xᵀy` with MacKay's fixed-point updates
//! under Gamma(α₁, α₂) and Gamma(λ₁, λ₂) hyperpriors. The Gram matrix of the
//! smaller dimension is diagonalized once, so each iteration is `O(p·min(n, p))`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::ModelInternals;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeInternals {
    pub coef: Vec<f64>,
    pub intercept: f64,
    /// Noise precision.
    pub alpha: f64,
    /// Weight precision.
    pub lambda: f64,
    pub iterations: usize,
}

impl RidgeInternals {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coef).map(|(x, w)| x * w).sum::<f64>()
    }
}

fn to_dmatrix(x: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[[i, j]])
}

/// Posterior mean `α(λI + αXᵀX)⁻¹Xᵀy` for fixed precisions, no centring.
pub fn posterior_mean(x: ArrayView2<'_, f64>, y: &[f64], alpha: f64, lambda: f64) -> Vec<f64> {
    let xm = to_dmatrix(x);
    let yv = DVector::from_column_slice(y);
    Spectral::new(&xm, &yv).coef(alpha, lambda).as_slice().to_vec()
}

/// Eigendecomposition of XᵀX (p ≤ n) or XXᵀ (p > n) plus the projections
/// needed to form the posterior mean for any (α, λ).
struct Spectral {
    eigvals: Vec<f64>,
    /// p ≤ n: Vᵀ Xᵀy. p > n: Uᵀ y.
    proj: DVector<f64>,
    /// p ≤ n: V (p×p). p > n: XᵀU (p×n).
    basis: DMatrix<f64>,
}

impl Spectral {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let (n, p) = x.shape();
        if p <= n {
            let eig = SymmetricEigen::new(x.transpose() * x);
            let proj = eig.eigenvectors.transpose() * (x.transpose() * y);
            Spectral {
                eigvals: eig.eigenvalues.iter().map(|v| v.max(0.0)).collect(),
                proj,
                basis: eig.eigenvectors,
            }
        } else {
            let eig = SymmetricEigen::new(x * x.transpose());
            let proj = eig.eigenvectors.transpose() * y;
            Spectral {
                eigvals: eig.eigenvalues.iter().map(|v| v.max(0.0)).collect(),
                proj,
                basis: x.transpose() * eig.eigenvectors,
            }
        }
    }

    fn coef(&self, alpha: f64, lambda: f64) -> DVector<f64> {
        // XᵀX route: w = V diag(α/(λ+αs)) VᵀXᵀy.
        // XXᵀ route: w = αXᵀ(λI+αXXᵀ)⁻¹y = XᵀU diag(α/(λ+αs)) Uᵀy.
        let scaled = DVector::from_iterator(
            self.proj.len(),
            self.proj
                .iter()
                .zip(&self.eigvals)
                .map(|(v, s)| v * alpha / (lambda + alpha * s)),
        );
        &self.basis * scaled
    }
}

#[derive(Clone, Copy)]
struct Priors {
    alpha_1: f64,
    alpha_2: f64,
    lambda_1: f64,
    lambda_2: f64,
}

fn log_marginal_likelihood(
    n: usize,
    p: usize,
    eigvals: &[f64],
    alpha: f64,
    lambda: f64,
    sse: f64,
    coef_sq: f64,
    pr: Priors,
) -> f64 {
    // eigenvalues beyond min(n, p) are zero
    let logdet_sigma = -eigvals.iter().map(|s| (lambda + alpha * s).ln()).sum::<f64>()
        - (p - eigvals.len().min(p)) as f64 * lambda.ln();
    let mut score = pr.lambda_1 * lambda.ln() - pr.lambda_2 * lambda;
    score += pr.alpha_1 * alpha.ln() - pr.alpha_2 * alpha;
    score += 0.5
        * (p as f64 * lambda.ln() + n as f64 * alpha.ln() - alpha * sse - lambda * coef_sq + logdet_sigma
            - n as f64 * (2.0 * std::f64::consts::PI).ln());
    score
}

pub(super) fn fit(x: ArrayView2<'_, f64>, y: &[f64], params: &BTreeMap<String, f64>) -> (ModelInternals, Vec<f64>) {
    let (n, p) = x.dim();
    let pr = Priors {
        alpha_1: params["alpha_1"],
        alpha_2: params["alpha_2"],
        lambda_1: params["lambda_1"],
        lambda_2: params["lambda_2"],
    };
    let max_iter = params["max_iter"] as usize;
    let tol = params["tol"];
    let fit_intercept = params["fit_intercept"] == 1.0;

    let mut xm = to_dmatrix(x);
    let mut yv = DVector::from_column_slice(y);
    let (x_mean, y_mean) = if fit_intercept {
        let means: Vec<f64> = (0..p).map(|j| xm.column(j).mean()).collect();
        for (j, m) in means.iter().enumerate() {
            xm.column_mut(j).add_scalar_mut(-m);
        }
        let ym = yv.mean();
        yv.add_scalar_mut(-ym);
        (means, ym)
    } else {
        (vec![0.0; p], 0.0)
    };

    let spectral = Spectral::new(&xm, &yv);
    let var_y = yv.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let mut alpha = 1.0 / (var_y + f64::EPSILON);
    let mut lambda = 1.0;
    let mut log = Vec::new();
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let coef = spectral.coef(alpha, lambda);
        let resid = &yv - &xm * &coef;
        let sse = resid.norm_squared();
        let coef_sq = coef.norm_squared();
        log.push(log_marginal_likelihood(
            n,
            p,
            &spectral.eigvals,
            alpha,
            lambda,
            sse,
            coef_sq,
            pr,
        ));

        let gamma: f64 = spectral.eigvals.iter().map(|s| alpha * s / (lambda + alpha * s)).sum();
        let new_lambda = (gamma + 2.0 * pr.lambda_1) / (coef_sq + 2.0 * pr.lambda_2);
        let new_alpha = (n as f64 - gamma + 2.0 * pr.alpha_1) / (sse + 2.0 * pr.alpha_2);
        if !(new_alpha.is_finite() && new_lambda.is_finite() && new_alpha > 0.0 && new_lambda > 0.0) {
            break;
        }
        let change = ((new_alpha - alpha) / alpha)
            .abs()
            .max(((new_lambda - lambda) / lambda).abs());
        alpha = new_alpha;
        lambda = new_lambda;
        if change < tol {
            break;
        }
    }
    let coef: Vec<f64> = spectral.coef(alpha, lambda).iter().copied().collect();
    let intercept = y_mean - coef.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    (
        ModelInternals::BayesianRidge(RidgeInternals {
            coef,
            intercept,
            alpha,
            lambda,
            iterations,
        }),
        log,
    )
}
