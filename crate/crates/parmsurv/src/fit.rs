//! Maximum-likelihood fitting: automatic initialization, optimizer-scale
//! transforms, three maximization algorithms over finite-difference
//! derivatives, and stratified orchestration with sample-size-weighted
//! pooling.
//!
//! Newton-Raphson (default) solves with the finite-difference Hessian and a
//! backtracking Armijo line search, falling back to steepest ascent whenever
//! the Hessian is not usable. Quasi-Newton maintains a BFGS inverse-Hessian
//! approximation; trust region takes dogleg steps on the same derivatives.
//! Non-convergence is always reported as such with the best iterate.

use crate::data::ObservationSet;
use crate::design::{build_design, infer_schema, CovariateSchema};
use crate::dist::{Constraint, Family};
use crate::error::{Error, Result};
use crate::inference::{
    back_transform, covariance_regular, information_criteria, make_rows, observed_information,
    pool_strata, sandwich, summarize, EstimateRow,
};
use crate::likelihood::{LikelihoodContext, ThetaVector};
use crate::linalg::{cholesky, cholesky_solve, dot, norm2, Matrix};
use crate::model::{build_layout, ModelSpec, ParameterLayout};
use crate::numdiff;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    #[default]
    NewtonRaphson,
    QuasiNewton,
    TrustRegion,
}

impl Algorithm {
    pub fn from_name(name: &str) -> Option<Algorithm> {
        match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "newtonraphson" | "newton" | "nr" => Some(Algorithm::NewtonRaphson),
            "quasinewton" | "bfgs" | "qn" => Some(Algorithm::QuasiNewton),
            "trustregion" | "tr" => Some(Algorithm::TrustRegion),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::NewtonRaphson => "newton-raphson",
            Algorithm::QuasiNewton => "quasi-newton",
            Algorithm::TrustRegion => "trust-region",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub algorithm: Algorithm,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// 0 silent, 1 final status, 2 per-iteration log-likelihood, 3 plus
    /// gradient norms, 4 plus step details, 5 plus Hessian conditioning.
    pub verbosity: u8,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            algorithm: Algorithm::NewtonRaphson,
            max_iterations: 200,
            gradient_tolerance: 1e-6,
            verbosity: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceStatus {
    Converged,
    NotConverged,
}

#[derive(Debug, Clone)]
pub struct ConvergenceRecord {
    pub status: ConvergenceStatus,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub message: String,
}

impl ConvergenceRecord {
    pub fn converged(&self) -> bool {
        self.status == ConvergenceStatus::Converged
    }
}

fn vlog(options: &FitOptions, level: u8, msg: impl FnOnce() -> String) {
    if options.verbosity >= level {
        eprintln!("{}", msg());
    }
}

// ---------------------------------------------------------------------------
// Initialization and scale transforms
// ---------------------------------------------------------------------------

/// Automatic starting values: the location intercept gets mean(log tau) and
/// the sigma slot log(sd(log tau)); nonzero-constrained shapes start at 0.5,
/// other positive parameters at 1 (0 on the log scale); custom free
/// parameters at 0. Covariate coefficients start at 0. User-supplied values
/// (original scale) override slot-wise.
pub fn initialize(
    ctx: &LikelihoodContext,
    user_init: &[(String, f64)],
) -> Result<(Vec<f64>, Vec<String>)> {
    let mut warnings = Vec::new();
    let n = ctx.n();
    if n == 0 {
        return Err(Error::Data("no valid observations".to_string()));
    }
    if ctx.taus.iter().any(|&t| t <= 0.0) {
        return Err(Error::Data(
            "observed times must be positive for initialization".to_string(),
        ));
    }
    let logs: Vec<f64> = ctx.taus.iter().map(|t| t.ln()).collect();
    let mean = logs.iter().sum::<f64>() / n as f64;
    let sd = if n >= 2 {
        let ss: f64 = logs.iter().map(|l| (l - mean) * (l - mean)).sum();
        (ss / (n as f64 - 1.0)).sqrt()
    } else {
        warnings.push("single observation: scale initialized to 1".to_string());
        1.0
    };
    let sd = if sd > 0.0 && sd.is_finite() {
        sd
    } else {
        warnings.push("log observed times have zero spread: scale initialized to 1".to_string());
        1.0
    };

    let mut theta = vec![0.0; ctx.k()];
    let location = ctx.family.location();
    let is_builtin = matches!(ctx.family, Family::BuiltIn(_));
    for ((name, constraint), (_, range)) in
        ctx.family.param_specs().iter().zip(ctx.layout.ranges.iter())
    {
        let intercept = range.start;
        theta[intercept] = if name.eq_ignore_ascii_case(&location) {
            mean
        } else if is_builtin {
            match (name.as_str(), constraint) {
                ("sigma", _) => sd.ln(),
                // nonzero-constrained shapes, and q which plays the same
                // role in the generalized F, start away from zero
                ("q", _) | (_, Constraint::NonZero) => 0.5,
                // positive parameters start at 1, i.e. 0 on the log scale
                _ => 0.0,
            }
        } else {
            // custom: positive parameters at 1 (log slot 0), others at 0
            0.0
        };
    }

    apply_user_init(&ctx.layout, user_init, &mut theta)?;

    for (j, slot) in ctx.layout.slots.iter().enumerate() {
        let clamped = theta[j]
            .max(slot.lower.unwrap_or(f64::NEG_INFINITY))
            .min(slot.upper.unwrap_or(f64::INFINITY));
        if clamped != theta[j] {
            warnings.push(format!(
                "initial value for '{}' moved inside its bounds",
                slot.label
            ));
            theta[j] = clamped;
        }
    }
    Ok((theta, warnings))
}

fn apply_user_init(
    layout: &ParameterLayout,
    user_init: &[(String, f64)],
    theta: &mut [f64],
) -> Result<()> {
    for (key, value) in user_init {
        let (param, column) = match key.split_once(':') {
            Some((p, c)) => (p.trim(), Some(c.trim())),
            None => (key.trim(), None),
        };
        let range = layout.range_of(param).ok_or_else(|| {
            Error::Model(format!("init names unknown parameter '{param}'"))
        })?;
        let j = match column {
            None => range.start,
            Some(col) => layout.slots[range.clone()]
                .iter()
                .position(|s| s.column.eq_ignore_ascii_case(col))
                .map(|off| range.start + off)
                .ok_or_else(|| {
                    Error::Model(format!(
                        "init names unknown coefficient '{col}' of parameter '{param}'"
                    ))
                })?,
        };
        if layout.slots[j].transform {
            if *value <= 0.0 {
                return Err(Error::Model(format!(
                    "init for log-transformed '{key}' must be positive, got {value}"
                )));
            }
            theta[j] = value.ln();
        } else {
            theta[j] = *value;
        }
    }
    Ok(())
}

/// Original-scale slot values -> optimizer scale (log-transformed slots hold
/// logs).
pub fn to_optim_scale(layout: &ParameterLayout, values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .zip(layout.slots.iter())
        .map(|(&v, slot)| {
            if slot.transform {
                if v <= 0.0 {
                    return Err(Error::Model(format!(
                        "value {v} for log slot '{}' is not positive",
                        slot.label
                    )));
                }
                Ok(v.ln())
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Inverse of `to_optim_scale`.
pub fn from_optim_scale(layout: &ParameterLayout, theta: &[f64]) -> Vec<f64> {
    theta
        .iter()
        .zip(layout.slots.iter())
        .map(|(&v, slot)| if slot.transform { v.exp() } else { v })
        .collect()
}

/// Reporting-scale point estimates (exp only for back-transform slots).
fn reporting_estimates(layout: &ParameterLayout, theta: &[f64]) -> Vec<f64> {
    theta
        .iter()
        .zip(layout.slots.iter())
        .map(|(&v, slot)| if slot.back_transform { v.exp() } else { v })
        .collect()
}

// ---------------------------------------------------------------------------
// Maximization
// ---------------------------------------------------------------------------

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;

fn clamp_to_bounds(layout: &ParameterLayout, theta: &mut [f64]) {
    for (v, slot) in theta.iter_mut().zip(layout.slots.iter()) {
        if let Some(lo) = slot.lower {
            if *v < lo {
                *v = lo;
            }
        }
        if let Some(hi) = slot.upper {
            if *v > hi {
                *v = hi;
            }
        }
    }
}

fn try_objective(ctx: &LikelihoodContext, theta: &[f64]) -> Option<f64> {
    match ctx.total_loglik(theta) {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

fn gradient(ctx: &LikelihoodContext, theta: &[f64]) -> Result<Vec<f64>> {
    numdiff::central_gradient(|th| ctx.total_loglik(th), theta)
        .map_err(|e| Error::Optim(format!("gradient evaluation failed: {e}")))
}

/// Ascent-gradient norm with components pointing out of an active bound
/// zeroed, so a maximum pinned at a user bound still registers as
/// stationary.
fn projected_gradient_norm(layout: &ParameterLayout, theta: &[f64], grad: &[f64]) -> f64 {
    let mut sum = 0.0;
    for ((slot, &t), &g) in layout.slots.iter().zip(theta.iter()).zip(grad.iter()) {
        let blocked_low = slot.lower.map_or(false, |lo| t <= lo && g < 0.0);
        let blocked_high = slot.upper.map_or(false, |hi| t >= hi && g > 0.0);
        if !(blocked_low || blocked_high) {
            sum += g * g;
        }
    }
    sum.sqrt()
}

/// Backtracking line search with halving and the Armijo condition on the
/// effective (bound-clamped) displacement.
fn line_search(
    ctx: &LikelihoodContext,
    theta: &[f64],
    f0: f64,
    grad: &[f64],
    dir: &[f64],
    options: &FitOptions,
) -> Option<(Vec<f64>, f64, f64)> {
    if dot(grad, dir) <= 0.0 {
        return None;
    }
    let mut alpha = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let mut trial: Vec<f64> = theta
            .iter()
            .zip(dir.iter())
            .map(|(t, d)| t + alpha * d)
            .collect();
        clamp_to_bounds(&ctx.layout, &mut trial);
        let effective_slope: f64 = trial
            .iter()
            .zip(theta.iter())
            .zip(grad.iter())
            .map(|((t, t0), g)| g * (t - t0))
            .sum();
        if effective_slope > 0.0 {
            if let Some(f) = try_objective(ctx, &trial) {
                if f >= f0 + ARMIJO_C * effective_slope {
                    vlog(options, 4, || {
                        format!("    step accepted: alpha = {alpha:.3e}, loglik = {f:.8}")
                    });
                    return Some((trial, f, alpha));
                }
            }
        }
        alpha *= 0.5;
    }
    None
}

fn newton_direction(
    ctx: &LikelihoodContext,
    theta: &[f64],
    grad: &[f64],
    options: &FitOptions,
) -> Option<Vec<f64>> {
    let hess = numdiff::central_hessian(|th| ctx.total_loglik(th), theta).ok()?;
    let a = hess.scaled(-1.0).symmetrized();
    let l = cholesky(&a)?;
    vlog(options, 5, || {
        let d = l.diag();
        let max = d.iter().cloned().fold(f64::MIN, f64::max);
        let min = d.iter().cloned().fold(f64::MAX, f64::min);
        format!(
            "    information Cholesky pivots in [{:.3e}, {:.3e}] (cond ~ {:.3e})",
            min * min,
            max * max,
            (max / min).powi(2)
        )
    });
    Some(cholesky_solve(&l, grad))
}

/// Maximize the weighted log-likelihood from `theta0`. Returns the final
/// iterate and a convergence record; a gradient norm above tolerance at
/// return is always reported as NotConverged.
pub fn maximize(
    ctx: &LikelihoodContext,
    theta0: &[f64],
    options: &FitOptions,
) -> Result<(Vec<f64>, ConvergenceRecord)> {
    let mut theta = theta0.to_vec();
    clamp_to_bounds(&ctx.layout, &mut theta);
    let f0 = ctx
        .total_loglik(&theta)
        .map_err(|e| Error::Optim(format!("objective not evaluable at the starting point: {e}")))?;
    if !f0.is_finite() {
        return Err(Error::Optim(format!(
            "objective not finite at the starting point ({f0})"
        )));
    }
    let result = match options.algorithm {
        Algorithm::NewtonRaphson => newton_raphson(ctx, theta, f0, options),
        Algorithm::QuasiNewton => quasi_newton(ctx, theta, f0, options),
        Algorithm::TrustRegion => trust_region(ctx, theta, f0, options),
    }?;
    vlog(options, 1, || {
        let (theta, rec) = &result;
        format!(
            "{}: {} after {} iteration(s), gradient norm {:.3e}, loglik {:.6}",
            options.algorithm.name(),
            match rec.status {
                ConvergenceStatus::Converged => "converged",
                ConvergenceStatus::NotConverged => "NOT converged",
            },
            rec.iterations,
            rec.gradient_norm,
            try_objective(ctx, theta).unwrap_or(f64::NAN)
        )
    });
    Ok(result)
}

fn finish(
    status: ConvergenceStatus,
    iterations: usize,
    gradient_norm: f64,
    message: impl Into<String>,
) -> ConvergenceRecord {
    ConvergenceRecord {
        status,
        iterations,
        gradient_norm,
        message: message.into(),
    }
}

fn newton_raphson(
    ctx: &LikelihoodContext,
    mut theta: Vec<f64>,
    mut f: f64,
    options: &FitOptions,
) -> Result<(Vec<f64>, ConvergenceRecord)> {
    let mut iterations = 0;
    loop {
        let g = gradient(ctx, &theta)?;
        let gnorm = projected_gradient_norm(&ctx.layout, &theta, &g);
        vlog(options, 2, || format!("iter {iterations}: loglik = {f:.8}"));
        vlog(options, 3, || format!("    gradient norm = {gnorm:.6e}"));
        if gnorm <= options.gradient_tolerance {
            return Ok((theta, finish(ConvergenceStatus::Converged, iterations, gnorm, "gradient norm within tolerance")));
        }
        if iterations >= options.max_iterations {
            return Ok((theta, finish(ConvergenceStatus::NotConverged, iterations, gnorm, "iteration limit reached")));
        }
        iterations += 1;
        let newton = newton_direction(ctx, &theta, &g, options)
            .filter(|d| dot(&g, d) > 0.0);
        let used_newton = newton.is_some();
        vlog(options, 4, || {
            format!(
                "    direction: {}",
                if used_newton { "newton" } else { "steepest ascent" }
            )
        });
        let dir = newton.unwrap_or_else(|| g.clone());
        match line_search(ctx, &theta, f, &g, &dir, options) {
            Some((t, fv, _)) => {
                theta = t;
                f = fv;
            }
            None if used_newton => {
                // retry along the gradient before giving up
                match line_search(ctx, &theta, f, &g, &g, options) {
                    Some((t, fv, _)) => {
                        theta = t;
                        f = fv;
                    }
                    None => {
                        return Ok((theta, finish(ConvergenceStatus::NotConverged, iterations, gnorm, "line search failed")));
                    }
                }
            }
            None => {
                return Ok((theta, finish(ConvergenceStatus::NotConverged, iterations, gnorm, "line search failed")));
            }
        }
    }
}

fn quasi_newton(
    ctx: &LikelihoodContext,
    mut theta: Vec<f64>,
    mut f: f64,
    options: &FitOptions,
) -> Result<(Vec<f64>, ConvergenceRecord)> {
    let k = theta.len();
    let mut hinv = Matrix::identity(k);
    let mut g = gradient(ctx, &theta)?;
    let mut iterations = 0;
    loop {
        let gnorm = projected_gradient_norm(&ctx.layout, &theta, &g);
        vlog(options, 2, || format!("iter {iterations}: loglik = {f:.8}"));
        vlog(options, 3, || format!("    gradient norm = {gnorm:.6e}"));
        if gnorm <= options.gradient_tolerance {
            return Ok((theta, finish(ConvergenceStatus::Converged, iterations, gnorm, "gradient norm within tolerance")));
        }
        if iterations >= options.max_iterations {
            return Ok((theta, finish(ConvergenceStatus::NotConverged, iterations, gnorm, "iteration limit reached")));
        }
        iterations += 1;
        let mut dir = hinv.matvec(&g);
        if dot(&g, &dir) <= 0.0 {
            hinv = Matrix::identity(k);
            dir = g.clone();
        }
        let Some((theta_new, f_new, _)) = line_search(ctx, &theta, f, &g, &dir, options) else {
            return Ok((theta, finish(ConvergenceStatus::NotConverged, iterations, gnorm, "line search failed")));
        };
        let g_new = gradient(ctx, &theta_new)?;
        // BFGS update on the minimization of -loglik: y is the change of
        // the descent gradient
        let s: Vec<f64> = theta_new.iter().zip(theta.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g.iter().zip(g_new.iter()).map(|(old, new)| old - new).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm2(&s) * norm2(&y) {
            hinv = bfgs_update(&hinv, &s, &y, sy);
        } else {
            vlog(options, 4, || "    curvature condition failed; BFGS update skipped".to_string());
        }
        theta = theta_new;
        f = f_new;
        g = g_new;
    }
}

fn bfgs_update(h: &Matrix, s: &[f64], y: &[f64], sy: f64) -> Matrix {
    let k = s.len();
    let rho = 1.0 / sy;
    let hy = h.matvec(y);
    let yhy = dot(y, &hy);
    let mut out = h.clone();
    for i in 0..k {
        for j in 0..k {
            out[(i, j)] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                + rho * rho * yhy * s[i] * s[j]
                + rho * s[i] * s[j];
        }
    }
    out.symmetrized()
}

fn trust_region(
    ctx: &LikelihoodContext,
    mut theta: Vec<f64>,
    mut f: f64,
    options: &FitOptions,
) -> Result<(Vec<f64>, ConvergenceRecord)> {
    let mut delta = 1.0_f64;
    let mut iterations = 0;
    loop {
        let g = gradient(ctx, &theta)?;
        let gnorm = projected_gradient_norm(&ctx.layout, &theta, &g);
        vlog(options, 2, || format!("iter {iterations}: loglik = {f:.8}"));
        vlog(options, 3, || format!("    gradient norm = {gnorm:.6e}, radius = {delta:.3e}"));
        if gnorm <= options.gradient_tolerance {
            return Ok((theta, finish(ConvergenceStatus::Converged, iterations, gnorm, "gradient norm within tolerance")));
        }
        if iterations >= options.max_iterations {
            return Ok((theta, finish(ConvergenceStatus::NotConverged, iterations, gnorm, "iteration limit reached")));
        }
        if delta < 1e-13 {
            return Ok((theta, finish(ConvergenceStatus::NotConverged, iterations, gnorm, "trust region collapsed")));
        }
        iterations += 1;
        let a = numdiff::central_hessian(|th| ctx.total_loglik(th), &theta)
            .ok()
            .map(|h| h.scaled(-1.0).symmetrized());
        let step = dogleg_step(&g, a.as_ref(), delta, gnorm);
        let predicted = match &a {
            Some(a) => dot(&g, &step) - 0.5 * dot(&step, &a.matvec(&step)),
            None => dot(&g, &step) - 0.5 * dot(&step, &step),
        };
        let mut trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, p)| t + p).collect();
        clamp_to_bounds(&ctx.layout, &mut trial);
        let ft = try_objective(ctx, &trial);
        let rho = match ft {
            Some(v) if predicted > 0.0 => (v - f) / predicted,
            _ => -1.0,
        };
        let step_norm = norm2(&step);
        if rho < 0.25 {
            delta *= 0.25;
        } else if rho > 0.75 && step_norm >= 0.99 * delta {
            delta = (2.0 * delta).min(1e8);
        }
        if let Some(v) = ft {
            if rho > 1e-4 && v > f {
                vlog(options, 4, || {
                    format!("    dogleg step accepted: |p| = {step_norm:.3e}, rho = {rho:.3})")
                });
                theta = trial;
                f = v;
            }
        }
    }
}

fn dogleg_step(g: &[f64], a: Option<&Matrix>, delta: f64, gnorm: f64) -> Vec<f64> {
    let scale_to = |v: &[f64], len: f64| -> Vec<f64> {
        let n = norm2(v);
        v.iter().map(|x| x * len / n).collect()
    };
    let newton = a.and_then(|a| {
        let l = cholesky(a)?;
        Some(cholesky_solve(&l, g))
    });
    // Cauchy point along the ascent gradient
    let cauchy = match a {
        Some(a) => {
            let ag = a.matvec(g);
            let gag = dot(g, &ag);
            if gag > 0.0 {
                let tau = dot(g, g) / gag;
                g.iter().map(|x| x * tau).collect::<Vec<f64>>()
            } else {
                scale_to(g, delta)
            }
        }
        None => g.to_vec(),
    };
    if let Some(pb) = newton {
        if norm2(&pb) <= delta {
            return pb;
        }
        let pu_norm = norm2(&cauchy);
        if pu_norm >= delta {
            return scale_to(&cauchy, delta);
        }
        // walk the dogleg segment from the Cauchy point toward the Newton
        // point until it crosses the radius
        let diff: Vec<f64> = pb.iter().zip(cauchy.iter()).map(|(b, u)| b - u).collect();
        let aa = dot(&diff, &diff);
        let bb = 2.0 * dot(&cauchy, &diff);
        let cc = pu_norm * pu_norm - delta * delta;
        let tau = if aa > 0.0 {
            (-bb + (bb * bb - 4.0 * aa * cc).max(0.0).sqrt()) / (2.0 * aa)
        } else {
            0.0
        };
        cauchy
            .iter()
            .zip(diff.iter())
            .map(|(u, d)| u + tau.clamp(0.0, 1.0) * d)
            .collect()
    } else if norm2(&cauchy) > delta {
        let _ = gnorm;
        scale_to(&cauchy, delta)
    } else {
        cauchy
    }
}

// ---------------------------------------------------------------------------
// Fit orchestration
// ---------------------------------------------------------------------------

/// Everything prediction needs from a fitted model.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub family: Family,
    pub layout: ParameterLayout,
    pub schema: Vec<CovariateSchema>,
    pub param_covars: Vec<(String, Vec<String>)>,
    pub alpha: f64,
    pub robust: bool,
}

/// A single-stratum maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct StratumFit {
    pub label: Option<String>,
    pub n: usize,
    pub theta: ThetaVector,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub rows: Vec<EstimateRow>,
    /// Optimizer-scale rows (printed when log_result is requested).
    pub log_rows: Vec<EstimateRow>,
    pub estimates_original: Vec<f64>,
    pub cov_optim: Option<Matrix>,
    pub cov_original: Option<Matrix>,
    pub convergence: ConvergenceRecord,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: FittedModel,
    pub stratified: bool,
    pub strata: Vec<StratumFit>,
    /// Pooled rows (identical to the single stratum's when unstratified).
    pub rows: Vec<EstimateRow>,
    pub log_rows: Vec<EstimateRow>,
    /// Summed across strata when stratified.
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub n: usize,
    pub k: usize,
    pub cov_original: Option<Matrix>,
    pub convergence: ConvergenceRecord,
    pub warnings: Vec<String>,
}

/// Fit the model: unstratified is a single maximization plus inference;
/// stratified fits each stratum separately (in sorted label order) and pools
/// estimates with sample-size weights.
pub fn fit_model(
    spec: &ModelSpec,
    set: &ObservationSet,
    options: &FitOptions,
) -> Result<FitResult> {
    spec.validate()?;
    if set.is_empty() {
        return Err(Error::Data("no valid observations".to_string()));
    }
    let referenced = spec.referenced_covariates();
    let schema = infer_schema(set, &referenced, &spec.class_cov, spec.refgrp.as_deref())?;
    let param_covars = spec.param_covars()?;

    let stratified = !spec.strata.is_empty();
    let groups: Vec<(Option<String>, Vec<usize>)> = if stratified {
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, obs) in set.observations.iter().enumerate() {
            let label = obs.stratum.clone().ok_or_else(|| {
                Error::Data(format!("observation {} has no stratum label", i + 1))
            })?;
            map.entry(label).or_default().push(i);
        }
        map.into_iter().map(|(l, idx)| (Some(l), idx)).collect()
    } else {
        vec![(None, (0..set.len()).collect())]
    };

    let mut warnings = Vec::new();
    let mut strata_fits: Vec<StratumFit> = Vec::new();
    let mut shared_layout: Option<ParameterLayout> = None;
    for (label, indices) in groups {
        let subset = set.subset(&indices);
        let designs = build_design(&subset, &schema, &param_covars)?;
        let layout = build_layout(spec, &designs)?;
        let k = layout.k();
        if subset.len() < k {
            return Err(Error::Data(format!(
                "stratum '{}' has {} observations but the model has {k} parameters",
                label.as_deref().unwrap_or("<all>"),
                subset.len()
            )));
        }
        if let Some(first) = &shared_layout {
            if *first != layout {
                return Err(Error::Model(
                    "stratified fits produced different parameter layouts".to_string(),
                ));
            }
        } else {
            shared_layout = Some(layout.clone());
        }
        let ctx = LikelihoodContext::new(spec.family.clone(), layout.clone(), designs, &subset)?;
        let (theta0, init_warnings) = initialize(&ctx, &spec.init)?;
        warnings.extend(init_warnings);
        let (theta, convergence) = maximize(&ctx, &theta0, options)?;
        if !convergence.converged() {
            warnings.push(format!(
                "stratum '{}': {}",
                label.as_deref().unwrap_or("<all>"),
                convergence.message
            ));
        }
        let loglik = ctx
            .total_loglik(&theta)
            .map_err(|e| Error::Optim(format!("final log-likelihood evaluation failed: {e}")))?;
        let (aic, bic) = information_criteria(loglik, k, subset.len());

        let inference = (|| -> Result<(Matrix, crate::inference::BackTransformed)> {
            let info = observed_information(&ctx, &theta)?;
            let cov = if spec.robust {
                let scores = ctx.score_contributions(&theta)?;
                sandwich(&info, &scores, &ctx.weights)?
            } else {
                covariance_regular(&info)?
            };
            let bt = back_transform(&theta, &cov, &layout, spec.alpha)?;
            Ok((cov, bt))
        })();

        let stratum = match inference {
            Ok((cov_optim, bt)) => {
                let rows = make_rows(&layout, &bt);
                let log_ses: Vec<f64> = cov_optim.diag().iter().map(|v| v.sqrt()).collect();
                let log_rows = rows_from_plain(&layout, &theta, &log_ses, spec.alpha)?;
                StratumFit {
                    label,
                    n: subset.len(),
                    theta: ThetaVector::new(theta.clone(), k)?,
                    loglik,
                    aic,
                    bic,
                    estimates_original: bt.estimates.clone(),
                    rows,
                    log_rows,
                    cov_optim: Some(cov_optim),
                    cov_original: Some(bt.cov_original),
                    convergence,
                }
            }
            Err(e) => {
                warnings.push(format!(
                    "inference failure in stratum '{}': {e}",
                    stratum_name(&label)
                ));
                let estimates = reporting_estimates(&layout, &theta);
                let rows = estimate_only_rows(&layout, &estimates);
                let log_rows = estimate_only_rows(&layout, &theta);
                StratumFit {
                    label,
                    n: subset.len(),
                    theta: ThetaVector::new(theta.clone(), k)?,
                    loglik,
                    aic,
                    bic,
                    estimates_original: estimates,
                    rows,
                    log_rows,
                    cov_optim: None,
                    cov_original: None,
                    convergence,
                }
            }
        };
        strata_fits.push(stratum);
    }

    let layout = shared_layout.expect("at least one stratum");
    let model = FittedModel {
        family: spec.family.clone(),
        layout: layout.clone(),
        schema,
        param_covars,
        alpha: spec.alpha,
        robust: spec.robust,
    };

    let k = layout.k();
    let n: usize = strata_fits.iter().map(|s| s.n).sum();
    let merged = merge_convergence(&strata_fits);
    if !stratified {
        let s = &strata_fits[0];
        return Ok(FitResult {
            model,
            stratified,
            rows: s.rows.clone(),
            log_rows: s.log_rows.clone(),
            loglik: s.loglik,
            aic: s.aic,
            bic: s.bic,
            n,
            k,
            cov_original: s.cov_original.clone(),
            convergence: merged,
            warnings,
            strata: strata_fits,
        });
    }

    let sizes: Vec<usize> = strata_fits.iter().map(|s| s.n).collect();
    let estimates: Vec<Vec<f64>> = strata_fits.iter().map(|s| s.estimates_original.clone()).collect();
    let covs: Vec<Option<Matrix>> = strata_fits.iter().map(|s| s.cov_original.clone()).collect();
    let (pooled_est, pooled_cov) = pool_strata(&estimates, &covs, &sizes)?;
    let rows = match &pooled_cov {
        Some(cov) => {
            let ses: Vec<f64> = cov.diag().iter().map(|v| v.sqrt()).collect();
            rows_from_plain(&layout, &pooled_est, &ses, spec.alpha)?
        }
        None => estimate_only_rows(&layout, &pooled_est),
    };
    let thetas: Vec<Vec<f64>> = strata_fits.iter().map(|s| s.theta.as_slice().to_vec()).collect();
    let optim_covs: Vec<Option<Matrix>> = strata_fits.iter().map(|s| s.cov_optim.clone()).collect();
    let (pooled_log_est, pooled_log_cov) = pool_strata(&thetas, &optim_covs, &sizes)?;
    let log_rows = match &pooled_log_cov {
        Some(cov) => {
            let ses: Vec<f64> = cov.diag().iter().map(|v| v.sqrt()).collect();
            rows_from_plain(&layout, &pooled_log_est, &ses, spec.alpha)?
        }
        None => estimate_only_rows(&layout, &pooled_log_est),
    };
    let loglik: f64 = strata_fits.iter().map(|s| s.loglik).sum();
    let aic: f64 = strata_fits.iter().map(|s| s.aic).sum();
    let bic: f64 = strata_fits.iter().map(|s| s.bic).sum();
    Ok(FitResult {
        model,
        stratified,
        rows,
        log_rows,
        loglik,
        aic,
        bic,
        n,
        k,
        cov_original: pooled_cov,
        convergence: merged,
        warnings,
        strata: strata_fits,
    })
}

fn stratum_name(label: &Option<String>) -> String {
    label.clone().unwrap_or_else(|| "<all>".to_string())
}

fn rows_from_plain(
    layout: &ParameterLayout,
    estimates: &[f64],
    ses: &[f64],
    alpha: f64,
) -> Result<Vec<EstimateRow>> {
    let summaries = summarize(estimates, ses, alpha)?;
    Ok(layout
        .slots
        .iter()
        .zip(estimates.iter().zip(ses.iter().zip(summaries.iter())))
        .map(|(slot, (&est, (&se, sum)))| EstimateRow {
            label: slot.label.clone(),
            estimate: est,
            std_error: Some(se),
            ci_lower: Some(sum.ci_lower),
            ci_upper: Some(sum.ci_upper),
            t_value: sum.t_value,
            p_value: sum.p_value,
        })
        .collect())
}

fn estimate_only_rows(layout: &ParameterLayout, estimates: &[f64]) -> Vec<EstimateRow> {
    layout
        .slots
        .iter()
        .zip(estimates.iter())
        .map(|(slot, &est)| EstimateRow {
            label: slot.label.clone(),
            estimate: est,
            std_error: None,
            ci_lower: None,
            ci_upper: None,
            t_value: None,
            p_value: None,
        })
        .collect()
}

fn merge_convergence(strata: &[StratumFit]) -> ConvergenceRecord {
    let all_ok = strata.iter().all(|s| s.convergence.converged());
    let iterations = strata.iter().map(|s| s.convergence.iterations).sum();
    let gradient_norm = strata
        .iter()
        .map(|s| s.convergence.gradient_norm)
        .fold(0.0, f64::max);
    ConvergenceRecord {
        status: if all_ok {
            ConvergenceStatus::Converged
        } else {
            ConvergenceStatus::NotConverged
        },
        iterations,
        gradient_norm,
        message: if all_ok {
            "all strata converged".to_string()
        } else {
            strata
                .iter()
                .filter(|s| !s.convergence.converged())
                .map(|s| format!("stratum '{}': {}", stratum_name(&s.label), s.convergence.message))
                .collect::<Vec<_>>()
                .join("; ")
        },
    }
}
