//! Covariance estimation, delta-method back-transformation, report
//! summaries, information criteria, and stratified pooling.
//!
//! The regular covariance is the inverse observed information (negated
//! finite-difference Hessian of the weighted log-likelihood). The robust
//! alternative is the sandwich A^-1 B A^-1 with B = sum_i w_i^2 U_i U_i',
//! squared weights exactly as the estimator is defined. Log-transformed
//! intercept-only parameters are reported through exp with delta-method
//! standard errors and exponentiated confidence bounds; coefficients of
//! log-linked parameters that carry covariates are already unconstrained and
//! pass through unchanged.

use crate::error::{Error, Result};
use crate::likelihood::LikelihoodContext;
use crate::linalg::{inverse, Matrix};
use crate::model::ParameterLayout;
use crate::numdiff;
use crate::special::{normal_cdf, normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovKind {
    Regular,
    Sandwich,
}

#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub matrix: Matrix,
    pub kind: CovKind,
}

/// One line of the parameter-estimates report. Missing inference fields mean
/// covariance estimation failed; the point estimate is still reported.
#[derive(Debug, Clone)]
pub struct EstimateRow {
    pub label: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub t_value: Option<f64>,
    pub p_value: Option<f64>,
}

/// Observed information: negated central-difference Hessian of the weighted
/// total log-likelihood, symmetrized.
pub fn observed_information(ctx: &LikelihoodContext, theta: &[f64]) -> Result<Matrix> {
    let hess = numdiff::central_hessian(|th| ctx.total_loglik(th), theta)?;
    Ok(hess.scaled(-1.0).symmetrized())
}

/// Regular covariance: inverse information, symmetrized.
pub fn covariance_regular(info: &Matrix) -> Result<Matrix> {
    let cov = inverse(info)?.symmetrized();
    check_diagonal(&cov)?;
    Ok(cov)
}

/// Robust sandwich covariance A^-1 B A^-1 from the information matrix and
/// the n x k score contributions.
pub fn sandwich(info: &Matrix, scores: &Matrix, weights: &[f64]) -> Result<Matrix> {
    let b = score_outer_sum(scores, weights);
    sandwich_from_b(info, &b)
}

/// B = sum_i w_i^2 U_i U_i'.
pub fn score_outer_sum(scores: &Matrix, weights: &[f64]) -> Matrix {
    let k = scores.ncols;
    let mut b = Matrix::zeros(k, k);
    for i in 0..scores.nrows {
        let w2 = weights[i] * weights[i];
        let u = scores.row(i);
        for r in 0..k {
            for c in 0..k {
                b[(r, c)] += w2 * u[r] * u[c];
            }
        }
    }
    b
}

pub fn sandwich_from_b(info: &Matrix, b: &Matrix) -> Result<Matrix> {
    let ainv = inverse(info)?;
    let cov = ainv.matmul(b).matmul(&ainv).symmetrized();
    check_diagonal(&cov)?;
    Ok(cov)
}

fn check_diagonal(cov: &Matrix) -> Result<()> {
    for (j, v) in cov.diag().iter().enumerate() {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::Inference(format!(
                "covariance diagonal entry {j} is {v}; estimates are reported without \
                 standard errors"
            )));
        }
    }
    Ok(())
}

/// Original-scale estimates, standard errors, confidence bounds, and the
/// delta-transformed covariance.
#[derive(Debug, Clone)]
pub struct BackTransformed {
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub cov_original: Matrix,
}

/// Map optimizer-scale estimates and covariance to the reporting scale.
/// Slots flagged `back_transform` become exp(slot) with SE exp(slot)*SE_log
/// and exponentiated log-scale confidence bounds; all other slots pass
/// through with plain normal intervals.
pub fn back_transform(
    theta: &[f64],
    cov: &Matrix,
    layout: &ParameterLayout,
    alpha: f64,
) -> Result<BackTransformed> {
    check_diagonal(cov)?;
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    let k = theta.len();
    let mut estimates = Vec::with_capacity(k);
    let mut std_errors = Vec::with_capacity(k);
    let mut ci_lower = Vec::with_capacity(k);
    let mut ci_upper = Vec::with_capacity(k);
    let mut jac = vec![1.0; k];
    for (j, slot) in layout.slots.iter().enumerate() {
        let se_optim = cov[(j, j)].sqrt();
        if slot.back_transform {
            let est = theta[j].exp();
            estimates.push(est);
            std_errors.push(est * se_optim);
            ci_lower.push((theta[j] - z * se_optim).exp());
            ci_upper.push((theta[j] + z * se_optim).exp());
            jac[j] = est;
        } else {
            estimates.push(theta[j]);
            std_errors.push(se_optim);
            ci_lower.push(theta[j] - z * se_optim);
            ci_upper.push(theta[j] + z * se_optim);
        }
    }
    let mut cov_original = cov.clone();
    for r in 0..k {
        for c in 0..k {
            cov_original[(r, c)] *= jac[r] * jac[c];
        }
    }
    Ok(BackTransformed {
        estimates,
        std_errors,
        ci_lower,
        ci_upper,
        cov_original,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SummaryRow {
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub t_value: Option<f64>,
    pub p_value: Option<f64>,
}

/// Plain normal-theory summaries: CI = estimate +/- z SE, t = estimate/SE,
/// two-sided normal p. A zero SE leaves t and p undefined.
pub fn summarize(estimates: &[f64], std_errors: &[f64], alpha: f64) -> Result<Vec<SummaryRow>> {
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    Ok(estimates
        .iter()
        .zip(std_errors.iter())
        .map(|(&est, &se)| {
            let (t, p) = t_and_p(est, se);
            SummaryRow {
                ci_lower: est - z * se,
                ci_upper: est + z * se,
                t_value: t,
                p_value: p,
            }
        })
        .collect())
}

pub fn t_and_p(estimate: f64, se: f64) -> (Option<f64>, Option<f64>) {
    if se > 0.0 && se.is_finite() {
        let t = estimate / se;
        let p = 2.0 * (1.0 - normal_cdf(t.abs()));
        (Some(t), Some(p))
    } else {
        (None, None)
    }
}

/// Assemble report rows from back-transformed results (t and p use the
/// reporting-scale estimate and SE; intervals come from the transform-aware
/// path).
pub fn make_rows(layout: &ParameterLayout, bt: &BackTransformed) -> Vec<EstimateRow> {
    layout
        .slots
        .iter()
        .enumerate()
        .map(|(j, slot)| {
            let (t, p) = t_and_p(bt.estimates[j], bt.std_errors[j]);
            EstimateRow {
                label: slot.label.clone(),
                estimate: bt.estimates[j],
                std_error: Some(bt.std_errors[j]),
                ci_lower: Some(bt.ci_lower[j]),
                ci_upper: Some(bt.ci_upper[j]),
                t_value: t,
                p_value: p,
            }
        })
        .collect()
}

/// AIC = -2 max log L + 2k, BIC = -2 max log L + ln(n) k.
pub fn information_criteria(loglik: f64, k: usize, n: usize) -> (f64, f64) {
    let aic = -2.0 * loglik + 2.0 * k as f64;
    let bic = -2.0 * loglik + (n as f64).ln() * k as f64;
    (aic, bic)
}

/// Sample-size-weighted pooling across strata: estimates are averaged with
/// weights n_s/n, covariances with (n_s/n)^2.
pub fn pool_strata(
    estimates: &[Vec<f64>],
    covariances: &[Option<Matrix>],
    sizes: &[usize],
) -> Result<(Vec<f64>, Option<Matrix>)> {
    if estimates.is_empty() {
        return Err(Error::Inference("no strata to pool".to_string()));
    }
    let k = estimates[0].len();
    for e in estimates {
        if e.len() != k {
            return Err(Error::Inference(
                "stratified fits have mismatched parameter layouts".to_string(),
            ));
        }
    }
    let n: usize = sizes.iter().sum();
    let mut pooled = vec![0.0; k];
    for (est, &ns) in estimates.iter().zip(sizes.iter()) {
        let w = ns as f64 / n as f64;
        for (p, e) in pooled.iter_mut().zip(est.iter()) {
            *p += w * e;
        }
    }
    let mut pooled_cov = Some(Matrix::zeros(k, k));
    for (cov, &ns) in covariances.iter().zip(sizes.iter()) {
        match (&mut pooled_cov, cov) {
            (Some(acc), Some(c)) => {
                let w = ns as f64 / n as f64;
                *acc = acc.add(&c.scaled(w * w));
            }
            _ => pooled_cov = None,
        }
    }
    Ok((pooled, pooled_cov))
}
