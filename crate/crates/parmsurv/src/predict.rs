//! Survival and hazard predictions at user-supplied covariate rows and time
//! points, with delta-method standard errors, plus 100-tick trajectory grids
//! with pointwise confidence bands for extrapolation plots.
//!
//! Standard errors propagate the fitted covariance through a central
//! finite-difference gradient of the prediction with respect to the
//! coefficient vector. Bands are plain normal intervals on the natural
//! scale, clamped to [0, 1] for survival and [0, inf) for hazard; clamping
//! is flagged in the curve metadata.

use crate::data::Value;
use crate::design::encode_row;
use crate::error::{Error, Result};
use crate::fit::{FitResult, FittedModel, StratumFit};
use crate::linalg::{dot, Matrix};
use crate::model::Link;
use crate::numdiff;
use crate::special::normal_quantile;

/// One prediction case: a time point plus covariate values matching the
/// fitted schema.
#[derive(Debug, Clone)]
pub struct PredictionRow {
    pub time: f64,
    pub covariates: Vec<(String, Value)>,
}

impl PredictionRow {
    fn get(&self, name: &str) -> Option<Value> {
        self.covariates
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.clone())
    }
}

/// Point predictions with uncertainty for one row under one stratum fit.
#[derive(Debug, Clone)]
pub struct PredictionPoint {
    pub row_index: usize,
    pub stratum: Option<String>,
    pub time: f64,
    pub survival: f64,
    pub survival_se: Option<f64>,
    pub survival_lower: Option<f64>,
    pub survival_upper: Option<f64>,
    pub hazard: f64,
    pub hazard_se: Option<f64>,
    pub hazard_lower: Option<f64>,
    pub hazard_upper: Option<f64>,
}

/// A 100-tick survival/hazard trajectory for one prediction group.
#[derive(Debug, Clone)]
pub struct TrajectoryCurve {
    pub group: String,
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub survival_lower: Option<Vec<f64>>,
    pub survival_upper: Option<Vec<f64>>,
    pub hazard: Vec<f64>,
    pub hazard_lower: Option<Vec<f64>>,
    pub hazard_upper: Option<Vec<f64>>,
    /// True when any band endpoint was clamped into its natural range.
    pub clamped: bool,
}

/// Per-parameter design rows for one prediction case.
fn design_rows_for(model: &FittedModel, row: &PredictionRow) -> Result<Vec<Vec<f64>>> {
    model
        .param_covars
        .iter()
        .map(|(_, covars)| {
            encode_row(
                &model.schema,
                covars,
                &|name| row.get(name),
                "(prediction row)",
            )
        })
        .collect()
}

fn params_from(model: &FittedModel, design_rows: &[Vec<f64>], theta: &[f64]) -> Result<Vec<f64>> {
    let mut params = Vec::with_capacity(design_rows.len());
    for (row, (_, range)) in design_rows.iter().zip(model.layout.ranges.iter()) {
        let lp = dot(row, &theta[range.clone()]);
        let link = model.layout.slots[range.start].link;
        let value = match link {
            Link::Identity => lp,
            Link::Log => lp.exp(),
        };
        if !value.is_finite() {
            return Err(Error::Predict("non-finite linked parameter".to_string()));
        }
        params.push(value);
    }
    Ok(params)
}

struct DeltaSe {
    se: f64,
    lower: f64,
    upper: f64,
}

/// Delta-method SE of `f(theta)` with a plain normal band at z.
fn delta_se(
    f: &dyn Fn(&[f64]) -> Result<f64>,
    theta: &[f64],
    cov: &Matrix,
    z: f64,
    value: f64,
) -> Result<DeltaSe> {
    let grad = numdiff::central_gradient(|th| f(th), theta)?;
    let mut quad = 0.0;
    for i in 0..grad.len() {
        for j in 0..grad.len() {
            quad += grad[i] * cov[(i, j)] * grad[j];
        }
    }
    if quad < 0.0 {
        quad = 0.0;
    }
    let se = quad.sqrt();
    Ok(DeltaSe {
        se,
        lower: value - z * se,
        upper: value + z * se,
    })
}

fn predict_one(
    model: &FittedModel,
    stratum: &StratumFit,
    design_rows: &[Vec<f64>],
    time: f64,
    z: f64,
    row_index: usize,
) -> Result<PredictionPoint> {
    if !(time > 0.0) || !time.is_finite() {
        return Err(Error::Predict(format!(
            "prediction time must be positive, got {time}"
        )));
    }
    let family = &model.family;
    let surv_fn = |th: &[f64]| -> Result<f64> {
        let params = params_from(model, design_rows, th)?;
        family.survival(&params, time)
    };
    let haz_fn = |th: &[f64]| -> Result<f64> {
        let params = params_from(model, design_rows, th)?;
        family.hazard(&params, time)
    };
    let survival = surv_fn(&stratum.theta)?;
    let hazard = haz_fn(&stratum.theta)?;
    let (survival_se, s_lo, s_hi, hazard_se, h_lo, h_hi) = match &stratum.cov_optim {
        Some(cov) => {
            let s = delta_se(&surv_fn, &stratum.theta, cov, z, survival)?;
            let h = delta_se(&haz_fn, &stratum.theta, cov, z, hazard)?;
            (
                Some(s.se),
                Some(s.lower.clamp(0.0, 1.0)),
                Some(s.upper.clamp(0.0, 1.0)),
                Some(h.se),
                Some(h.lower.max(0.0)),
                Some(h.upper.max(0.0)),
            )
        }
        None => (None, None, None, None, None, None),
    };
    Ok(PredictionPoint {
        row_index,
        stratum: stratum.label.clone(),
        time,
        survival,
        survival_se,
        survival_lower: s_lo,
        survival_upper: s_hi,
        hazard,
        hazard_se,
        hazard_lower: h_lo,
        hazard_upper: h_hi,
    })
}

/// Predict survival and hazard (with delta-method SEs and bands at the
/// fit's alpha) at every row; stratified fits produce one output per row per
/// stratum.
pub fn predict_at(fit: &FitResult, rows: &[PredictionRow]) -> Result<Vec<PredictionPoint>> {
    if !fit.convergence.converged() {
        return Err(Error::Predict(
            "predictions require a converged fit".to_string(),
        ));
    }
    let z = normal_quantile(1.0 - fit.model.alpha / 2.0)?;
    let mut out = Vec::new();
    for stratum in &fit.strata {
        for (i, row) in rows.iter().enumerate() {
            let design_rows = design_rows_for(&fit.model, row)?;
            out.push(predict_one(&fit.model, stratum, &design_rows, row.time, z, i)?);
        }
    }
    Ok(out)
}

/// Group label: "cov=value" pairs joined by ", ", stratum appended as
/// "stratum=s"; "all" when the model has neither.
fn group_label(model: &FittedModel, row: &PredictionRow, stratum: &Option<String>) -> String {
    let mut parts: Vec<String> = Vec::new();
    for schema in &model.schema {
        if let Some(v) = row.get(schema.name()) {
            parts.push(format!("{}={}", schema.name(), v.display()));
        }
    }
    if let Some(s) = stratum {
        parts.push(format!("stratum={s}"));
    }
    if parts.is_empty() {
        "all".to_string()
    } else {
        parts.join(", ")
    }
}

/// 100-tick trajectories from t_L/100 to t_L: rows are deduplicated on
/// covariate values (time ignored), one curve per unique row and stratum.
pub fn trajectories(
    fit: &FitResult,
    rows: &[PredictionRow],
    t_max: f64,
    with_bands: bool,
) -> Result<Vec<TrajectoryCurve>> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::Predict(format!(
            "pred_max_time must be positive, got {t_max}"
        )));
    }
    if !fit.convergence.converged() {
        return Err(Error::Predict(
            "trajectories require a converged fit".to_string(),
        ));
    }
    let z = normal_quantile(1.0 - fit.model.alpha / 2.0)?;
    // deduplicate on the encoded covariate values
    let mut unique: Vec<(&PredictionRow, Vec<Vec<f64>>)> = Vec::new();
    for row in rows {
        let design_rows = design_rows_for(&fit.model, row)?;
        if !unique.iter().any(|(_, d)| *d == design_rows) {
            unique.push((row, design_rows));
        }
    }
    let ticks: Vec<f64> = (1..=100).map(|j| t_max * j as f64 / 100.0).collect();
    let mut curves = Vec::new();
    for stratum in &fit.strata {
        for (row, design_rows) in &unique {
            let mut curve = TrajectoryCurve {
                group: group_label(&fit.model, row, &stratum.label),
                times: ticks.clone(),
                survival: Vec::with_capacity(ticks.len()),
                survival_lower: with_bands.then(|| Vec::with_capacity(ticks.len())),
                survival_upper: with_bands.then(|| Vec::with_capacity(ticks.len())),
                hazard: Vec::with_capacity(ticks.len()),
                hazard_lower: with_bands.then(|| Vec::with_capacity(ticks.len())),
                hazard_upper: with_bands.then(|| Vec::with_capacity(ticks.len())),
                clamped: false,
            };
            for &t in &ticks {
                let point = predict_one(&fit.model, stratum, design_rows, t, z, 0)?;
                curve.survival.push(point.survival);
                curve.hazard.push(point.hazard);
                if with_bands {
                    let (s_lo, s_hi) = (
                        point.survival_lower.unwrap_or(point.survival),
                        point.survival_upper.unwrap_or(point.survival),
                    );
                    let (h_lo, h_hi) = (
                        point.hazard_lower.unwrap_or(point.hazard),
                        point.hazard_upper.unwrap_or(point.hazard),
                    );
                    if let (Some(se_s), Some(se_h)) = (point.survival_se, point.hazard_se) {
                        let raw_s_lo = point.survival - z * se_s;
                        let raw_s_hi = point.survival + z * se_s;
                        let raw_h_lo = point.hazard - z * se_h;
                        if raw_s_lo < 0.0 || raw_s_hi > 1.0 || raw_h_lo < 0.0 {
                            curve.clamped = true;
                        }
                    }
                    curve.survival_lower.as_mut().unwrap().push(s_lo);
                    curve.survival_upper.as_mut().unwrap().push(s_hi);
                    curve.hazard_lower.as_mut().unwrap().push(h_lo);
                    curve.hazard_upper.as_mut().unwrap().push(h_hi);
                }
            }
            curves.push(curve);
        }
    }
    Ok(curves)
}
