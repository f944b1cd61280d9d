//! Report rendering: the printed parameter-estimates tables, the criteria
//! line, deletion and convergence notes, the prediction table, and the
//! machine-readable JSON document. Rendering never recomputes statistics;
//! every number comes straight from the fit and prediction structures.
//!
//! Formatting follows the printed-report conventions: 5 decimals for
//! estimates/SEs/CI bounds, 2 for t values, 4 for p values with p below
//! 1e-4 shown as "<.0001" (stored precision is never altered).

use crate::data::DeletionLog;
use crate::fit::{ConvergenceStatus, FitResult, StratumFit};
use crate::inference::EstimateRow;
use crate::predict::{PredictionPoint, PredictionRow, TrajectoryCurve};
use serde::Serialize;

pub fn fmt5(v: f64) -> String {
    format!("{v:.5}")
}

pub fn fmt_opt5(v: Option<f64>) -> String {
    v.map(fmt5).unwrap_or_else(|| ".".to_string())
}

pub fn fmt_t(v: Option<f64>) -> String {
    v.map(|t| format!("{t:.2}")).unwrap_or_else(|| ".".to_string())
}

pub fn fmt_p(v: Option<f64>) -> String {
    match v {
        None => ".".to_string(),
        Some(p) if p < 1e-4 => "<.0001".to_string(),
        Some(p) => format!("{p:.4}"),
    }
}

fn confidence_percent(alpha: f64) -> String {
    let conf = (1.0 - alpha) * 100.0;
    if (conf - conf.round()).abs() < 1e-9 {
        format!("{:.0}", conf.round())
    } else {
        format!("{conf:.1}")
    }
}

fn estimates_table(rows: &[EstimateRow], alpha: f64) -> String {
    let conf = confidence_percent(alpha);
    let header = vec![
        "Variable".to_string(),
        "Estimate".to_string(),
        "S.E.".to_string(),
        format!("{conf}% CI Lower"),
        format!("{conf}% CI Upper"),
        "t Value".to_string(),
        "Pr>|t|".to_string(),
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                fmt5(r.estimate),
                fmt_opt5(r.std_error),
                fmt_opt5(r.ci_lower),
                fmt_opt5(r.ci_upper),
                fmt_t(r.t_value),
                fmt_p(r.p_value),
            ]
        })
        .collect();
    let widths: Vec<usize> = header
        .iter()
        .enumerate()
        .map(|(j, h)| {
            body.iter()
                .map(|r| r[j].len())
                .chain(std::iter::once(h.len()))
                .max()
                .unwrap_or(0)
                + if j > 0 { 2 } else { 0 }
        })
        .collect();
    let render = |cells: &[String]| -> String {
        let mut line = format!("{:<w$}", cells[0], w = widths[0]);
        for (c, w) in cells.iter().zip(widths.iter()).skip(1) {
            line.push_str(&format!("{c:>w$}"));
        }
        line.push('\n');
        line
    };
    let mut out = render(&header);
    for cells in &body {
        out.push_str(&render(cells));
    }
    out
}

fn criteria_line(loglik: f64, aic: f64, bic: f64) -> String {
    format!(
        "{:<18}{:>12}{:>12}\n{:<18}{:>12}{:>12}\n",
        "Log-likelihood",
        "AIC",
        "BIC",
        format!("{loglik:.3}"),
        format!("{aic:.3}"),
        format!("{bic:.3}")
    )
}

fn stratum_section(s: &StratumFit, alpha: f64, log_result: bool) -> String {
    let mut out = String::new();
    if let Some(label) = &s.label {
        out.push_str(&format!("Stratum: {label} (n = {})\n\n", s.n));
    }
    out.push_str("Parameter Estimates\n");
    out.push_str(&estimates_table(&s.rows, alpha));
    out.push('\n');
    if log_result {
        out.push_str("Parameter Estimates (log scale)\n");
        out.push_str(&estimates_table(&s.log_rows, alpha));
        out.push('\n');
    }
    out.push_str(&criteria_line(s.loglik, s.aic, s.bic));
    out.push('\n');
    out
}

/// The printed run report.
pub fn render_report(
    fit: &FitResult,
    deletions: &DeletionLog,
    predictions: Option<(&[PredictionRow], &[PredictionPoint])>,
    log_result: bool,
) -> String {
    let alpha = fit.model.alpha;
    let mut out = String::new();
    if fit.stratified {
        for s in &fit.strata {
            out.push_str(&stratum_section(s, alpha, log_result));
        }
        out.push_str("Pooled Parameter Estimates (sample-size weights)\n");
        out.push_str(&estimates_table(&fit.rows, alpha));
        out.push('\n');
        if log_result {
            out.push_str("Pooled Parameter Estimates (log scale)\n");
            out.push_str(&estimates_table(&fit.log_rows, alpha));
            out.push('\n');
        }
        out.push_str("Summed across strata:\n");
        out.push_str(&criteria_line(fit.loglik, fit.aic, fit.bic));
        out.push('\n');
    } else {
        out.push_str(&stratum_section(&fit.strata[0], alpha, log_result));
    }

    if let Some((rows, points)) = predictions {
        out.push_str("Prediction\n");
        out.push_str(&prediction_table(rows, points));
        out.push('\n');
    }

    out.push_str("Convergence\n");
    out.push_str(&format!(
        "status: {}; iterations: {}; final gradient norm: {:.3e}\n{}\n",
        match fit.convergence.status {
            ConvergenceStatus::Converged => "converged",
            ConvergenceStatus::NotConverged => "NOT converged",
        },
        fit.convergence.iterations,
        fit.convergence.gradient_norm,
        fit.convergence.message,
    ));
    out.push('\n');

    out.push_str("Deleted observations\n");
    if deletions.total_deleted() == 0 {
        out.push_str(&format!(
            "none ({} rows read, {} retained)\n",
            deletions.input_rows, deletions.retained
        ));
    } else {
        for (reason, count) in &deletions.counts {
            out.push_str(&format!("{}: {count}\n", reason.describe()));
        }
        out.push_str(&format!(
            "total deleted: {} ({} rows read, {} retained)\n",
            deletions.total_deleted(),
            deletions.input_rows,
            deletions.retained
        ));
    }

    if !fit.warnings.is_empty() {
        out.push_str("\nWarnings\n");
        for w in &fit.warnings {
            out.push_str(&format!("- {w}\n"));
        }
    }
    out
}

fn prediction_table(rows: &[PredictionRow], points: &[PredictionPoint]) -> String {
    let covariate_names: Vec<String> = rows
        .first()
        .map(|r| r.covariates.iter().map(|(n, _)| n.clone()).collect())
        .unwrap_or_default();
    let stratified = points.iter().any(|p| p.stratum.is_some());
    let fmt3 = |v: Option<f64>| v.map(|s| format!("{s:.3}")).unwrap_or_else(|| ".".into());
    let mut header: Vec<String> = vec!["Obs".to_string()];
    if stratified {
        header.push("stratum".to_string());
    }
    header.extend(covariate_names.iter().cloned());
    header.extend(
        ["time", "Survival", "Survival SE", "Hazard", "Hazard SE"]
            .iter()
            .map(|s| s.to_string()),
    );
    let mut body: Vec<Vec<String>> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let row = &rows[p.row_index];
        let mut cells = vec![(i + 1).to_string()];
        if stratified {
            cells.push(p.stratum.clone().unwrap_or_else(|| ".".into()));
        }
        cells.extend(row.covariates.iter().map(|(_, v)| v.display()));
        cells.push(crate::data::format_number(p.time));
        cells.push(format!("{:.3}", p.survival));
        cells.push(fmt3(p.survival_se));
        cells.push(format!("{:.3}", p.hazard));
        cells.push(fmt3(p.hazard_se));
        body.push(cells);
    }
    let widths: Vec<usize> = header
        .iter()
        .enumerate()
        .map(|(j, h)| {
            body.iter()
                .map(|r| r[j].len())
                .chain(std::iter::once(h.len()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let render = |cells: &[String]| -> String {
        cells
            .iter()
            .zip(widths.iter())
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            + "\n"
    };
    let mut out = render(&header);
    for cells in &body {
        out.push_str(&render(cells));
    }
    out
}

/// Curve export: group, time, surv, surv_lo, surv_hi, haz, haz_lo, haz_hi.
pub fn curves_csv(curves: &[TrajectoryCurve]) -> String {
    let mut out = String::from("group,time,surv,surv_lo,surv_hi,haz,haz_lo,haz_hi\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for c in curves {
        for i in 0..c.times.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                csv_escape(&c.group),
                c.times[i],
                c.survival[i],
                opt(c.survival_lower.as_ref().map(|v| v[i])),
                opt(c.survival_upper.as_ref().map(|v| v[i])),
                c.hazard[i],
                opt(c.hazard_lower.as_ref().map(|v| v[i])),
                opt(c.hazard_upper.as_ref().map(|v| v[i])),
            ));
        }
    }
    out
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

// ---------------------------------------------------------------------------
// Machine-readable results
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct JsonRow {
    variable: String,
    estimate: f64,
    std_error: Option<f64>,
    ci_lower: Option<f64>,
    ci_upper: Option<f64>,
    t_value: Option<f64>,
    p_value: Option<f64>,
}

impl JsonRow {
    fn from(row: &EstimateRow) -> JsonRow {
        JsonRow {
            variable: row.label.clone(),
            estimate: row.estimate,
            std_error: row.std_error,
            ci_lower: row.ci_lower,
            ci_upper: row.ci_upper,
            t_value: row.t_value,
            p_value: row.p_value,
        }
    }
}

#[derive(Serialize)]
struct JsonStratum {
    label: Option<String>,
    n: usize,
    loglik: f64,
    aic: f64,
    bic: f64,
    converged: bool,
    iterations: usize,
    gradient_norm: f64,
    estimates: Vec<JsonRow>,
    log_scale_estimates: Vec<JsonRow>,
    covariance_original: Option<Vec<Vec<f64>>>,
    covariance_optimizer: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
struct JsonPrediction {
    row: usize,
    stratum: Option<String>,
    time: f64,
    covariates: Vec<(String, String)>,
    survival: f64,
    survival_se: Option<f64>,
    survival_lower: Option<f64>,
    survival_upper: Option<f64>,
    hazard: f64,
    hazard_se: Option<f64>,
    hazard_lower: Option<f64>,
    hazard_upper: Option<f64>,
}

#[derive(Serialize)]
struct JsonDeletions {
    input_rows: usize,
    retained: usize,
    deleted: Vec<(String, usize)>,
}

#[derive(Serialize)]
struct JsonReport {
    config: serde_json::Value,
    n: usize,
    k: usize,
    loglik: f64,
    aic: f64,
    bic: f64,
    converged: bool,
    convergence_message: String,
    estimates: Vec<JsonRow>,
    log_scale_estimates: Vec<JsonRow>,
    strata: Vec<JsonStratum>,
    deletions: JsonDeletions,
    predictions: Vec<JsonPrediction>,
    warnings: Vec<String>,
}

fn matrix_json(m: &Option<crate::linalg::Matrix>) -> Option<Vec<Vec<f64>>> {
    m.as_ref()
        .map(|m| (0..m.nrows).map(|i| m.row(i).to_vec()).collect())
}

/// One JSON document per run: config echo, estimates, covariances,
/// criteria, deletion log, predictions.
pub fn results_json(
    config_echo: serde_json::Value,
    fit: &FitResult,
    deletions: &DeletionLog,
    predictions: Option<(&[PredictionRow], &[PredictionPoint])>,
) -> serde_json::Value {
    let report = JsonReport {
        config: config_echo,
        n: fit.n,
        k: fit.k,
        loglik: fit.loglik,
        aic: fit.aic,
        bic: fit.bic,
        converged: fit.convergence.converged(),
        convergence_message: fit.convergence.message.clone(),
        estimates: fit.rows.iter().map(JsonRow::from).collect(),
        log_scale_estimates: fit.log_rows.iter().map(JsonRow::from).collect(),
        strata: fit
            .strata
            .iter()
            .map(|s| JsonStratum {
                label: s.label.clone(),
                n: s.n,
                loglik: s.loglik,
                aic: s.aic,
                bic: s.bic,
                converged: s.convergence.converged(),
                iterations: s.convergence.iterations,
                gradient_norm: s.convergence.gradient_norm,
                estimates: s.rows.iter().map(JsonRow::from).collect(),
                log_scale_estimates: s.log_rows.iter().map(JsonRow::from).collect(),
                covariance_original: matrix_json(&s.cov_original),
                covariance_optimizer: matrix_json(&s.cov_optim),
            })
            .collect(),
        deletions: JsonDeletions {
            input_rows: deletions.input_rows,
            retained: deletions.retained,
            deleted: deletions
                .counts
                .iter()
                .map(|(r, c)| (r.describe().to_string(), *c))
                .collect(),
        },
        predictions: predictions
            .map(|(rows, points)| {
                points
                    .iter()
                    .map(|p| JsonPrediction {
                        row: p.row_index + 1,
                        stratum: p.stratum.clone(),
                        time: p.time,
                        covariates: rows[p.row_index]
                            .covariates
                            .iter()
                            .map(|(n, v)| (n.clone(), v.display()))
                            .collect(),
                        survival: p.survival,
                        survival_se: p.survival_se,
                        survival_lower: p.survival_lower,
                        survival_upper: p.survival_upper,
                        hazard: p.hazard,
                        hazard_se: p.hazard_se,
                        hazard_lower: p.hazard_lower,
                        hazard_upper: p.hazard_upper,
                    })
                    .collect()
            })
            .unwrap_or_default(),
        warnings: fit.warnings.clone(),
    };
    serde_json::to_value(report).expect("serializable report")
}
