//! Command-line surface: flags mirror the modeling options one for one
//! (--data/--t1/--censor/--covars/--anc/--dist, custom-distribution
//! expressions, robust/alpha/strata/weight, prediction inputs), runs the
//! fit, renders the report, and writes the output files.
//!
//! Outputs land in the output directory (flag --outdir, env PARMSURV_OUTDIR):
//! report.txt, results.json, and, when trajectories are requested,
//! curves.csv, surv.svg, and haz.svg. Exit code 0 on a converged fit, 2 when
//! the optimizer did not converge (the report is still written), 1 on input
//! errors (nothing is written).

use crate::data::{self, ResponseMapping, Value};
use crate::dist::{DistributionId, Family};
use crate::error::{Error, Result};
use crate::expr::{self, FnRole, ProvidedFn};
use crate::fit::{self, Algorithm, FitOptions};
use crate::model::{self, ModelSpec};
use crate::predict::{self, PredictionRow};
use crate::report;
use crate::svg::{self, PlotKind};
use clap::Parser;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Parser, Debug, Clone, Serialize)]
#[command(
    name = "parmsurv",
    version,
    about = "Flexible parametric survival regression with long-term predictions"
)]
pub struct Cli {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,

    /// Lower interval bound (or the observed time when --censor is given).
    #[arg(long)]
    pub t1: String,

    /// Upper interval bound column (format 1). Exactly one of --t2/--censor.
    #[arg(long)]
    pub t2: Option<String>,

    /// Censoring-status column (format 2, right censoring only).
    #[arg(long)]
    pub censor: Option<String>,

    /// Censoring value in the status column.
    #[arg(long, default_value = "0")]
    pub censval: String,

    /// Space-delimited covariates on the location parameter.
    #[arg(long)]
    pub covars: Option<String>,

    /// Ancillary-parameter covariates, e.g. "sigma(age sex), lambda(sex)".
    #[arg(long)]
    pub anc: Option<String>,

    /// Space-delimited numeric columns to treat as classification.
    #[arg(long = "class-cov")]
    pub class_cov: Option<String>,

    /// Comma-delimited reference levels, one per classification covariate.
    #[arg(long)]
    pub refgrp: Option<String>,

    /// Space-delimited stratification columns.
    #[arg(long)]
    pub strata: Option<String>,

    /// Case-weight column.
    #[arg(long)]
    pub weight: Option<String>,

    /// Built-in distribution: exp, weibull, gamma, lnorm, gompertz, llogis,
    /// gengamma, genf, genf_orig.
    #[arg(long)]
    pub dist: Option<String>,

    /// Custom hazard expression in `time` and the parameters.
    #[arg(long, allow_hyphen_values = true)]
    pub hazard: Option<String>,
    /// Custom survival expression.
    #[arg(long, allow_hyphen_values = true)]
    pub survival: Option<String>,
    /// Custom density expression.
    #[arg(long, allow_hyphen_values = true)]
    pub density: Option<String>,
    /// Custom log-hazard expression.
    #[arg(long = "log-hazard", allow_hyphen_values = true)]
    pub log_hazard: Option<String>,
    /// Custom log-survival expression.
    #[arg(long = "log-survival", allow_hyphen_values = true)]
    pub log_survival: Option<String>,
    /// Custom log-density expression.
    #[arg(long = "log-density", allow_hyphen_values = true)]
    pub log_density: Option<String>,

    /// Parameter-preparation statements, e.g. "mu=exp(-beta);".
    #[arg(long = "custom-prep")]
    pub custom_prep: Option<String>,

    /// Space-delimited ancillary parameter names of a custom distribution.
    #[arg(long = "param-anc")]
    pub param_anc: Option<String>,

    /// Location parameter name of a custom distribution.
    #[arg(long, default_value = "beta")]
    pub location: String,

    /// Space-delimited custom parameters to log-transform (positive).
    #[arg(long = "log-transf-param")]
    pub log_transf_param: Option<String>,

    /// Lower bounds as "param=value" pairs, comma-delimited.
    #[arg(long)]
    pub lower: Option<String>,

    /// Upper bounds as "param=value" pairs, comma-delimited.
    #[arg(long)]
    pub upper: Option<String>,

    /// Initial values on the original scale: "param=value" or
    /// "param:column=value" pairs, comma-delimited.
    #[arg(long)]
    pub init: Option<String>,

    /// Robust (sandwich) standard errors: yes/no/t/f/true/false/1/0.
    #[arg(long, default_value = "no")]
    pub robust: String,

    /// Significance level for confidence intervals.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Also print the optimizer-scale (log) estimates table.
    #[arg(long = "log-result", default_value = "no")]
    pub log_result: String,

    /// Optimizer verbosity 0-5.
    #[arg(long, default_value_t = 0)]
    pub verbosity: u8,

    /// Optimizer: newton-raphson (default), quasi-newton, trust-region.
    #[arg(long, default_value = "newton-raphson")]
    pub algorithm: String,

    /// Iteration limit.
    #[arg(long = "max-iter", default_value_t = 200)]
    pub max_iter: usize,

    /// Gradient-norm convergence tolerance.
    #[arg(long = "gtol", default_value_t = 1e-6)]
    pub gtol: f64,

    /// Prediction dataset (CSV with a `time` column plus model covariates).
    #[arg(long)]
    pub pred: Option<PathBuf>,

    /// Longest prediction time t_L for 100-tick trajectory curves and plots.
    #[arg(long = "pred-max-time")]
    pub pred_max_time: Option<f64>,

    /// Show pointwise confidence bands in the plots.
    #[arg(long = "pred-plot-cl", default_value = "yes")]
    pub pred_plot_cl: String,

    /// Additional missing-value tokens, comma-delimited (the empty cell and
    /// "." always count as missing).
    #[arg(long = "missing-tokens", default_value = ".")]
    pub missing_tokens: String,

    /// Output directory.
    #[arg(long, env = "PARMSURV_OUTDIR", default_value = "parmsurv_out")]
    pub outdir: PathBuf,
}

/// Parse command-line arguments (library entry point for tests).
pub fn parse_args<I, T>(argv: I) -> Result<Cli>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(argv).map_err(|e| Error::Config(e.to_string()))
}

fn parse_bool(text: &str, flag: &str) -> Result<bool> {
    match text.trim().to_ascii_lowercase().as_str() {
        "yes" | "y" | "t" | "true" | "1" => Ok(true),
        "no" | "n" | "f" | "false" | "0" => Ok(false),
        other => Err(Error::Config(format!(
            "cannot read '{other}' as a yes/no value for --{flag}"
        ))),
    }
}

fn split_ws(text: &Option<String>) -> Vec<String> {
    text.as_deref()
        .map(|s| s.split_whitespace().map(|w| w.to_string()).collect())
        .unwrap_or_default()
}

fn parse_kv_list(text: &str, flag: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, value) = part.split_once('=').ok_or_else(|| {
            Error::Config(format!("--{flag} entry '{part}' is not name=value"))
        })?;
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::Config(format!("--{flag} entry '{part}' has a non-numeric value"))
        })?;
        out.push((name.trim().to_string(), value));
    }
    Ok(out)
}

fn custom_functions(cli: &Cli) -> Result<Vec<ProvidedFn>> {
    let sources = [
        (FnRole::Density, false, &cli.density),
        (FnRole::Hazard, false, &cli.hazard),
        (FnRole::Survival, false, &cli.survival),
        (FnRole::Density, true, &cli.log_density),
        (FnRole::Hazard, true, &cli.log_hazard),
        (FnRole::Survival, true, &cli.log_survival),
    ];
    let mut out = Vec::new();
    for (role, log_form, source) in sources {
        if let Some(src) = source {
            out.push(ProvidedFn {
                role,
                log_form,
                expr: expr::parse(src)?,
            });
        }
    }
    Ok(out)
}

/// Build the model family and full spec from the parsed flags.
pub fn build_spec(cli: &Cli) -> Result<ModelSpec> {
    let custom_fns = custom_functions(cli)?;
    let family = match (&cli.dist, custom_fns.is_empty()) {
        (Some(_), false) => {
            return Err(Error::Config(
                "--dist conflicts with custom distribution expressions".to_string(),
            ))
        }
        (Some(name), true) => {
            let id = DistributionId::from_name(name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown distribution '{name}' (expected one of exp, weibull, gamma, \
                     lnorm, gompertz, llogis, gengamma, genf, genf_orig)"
                ))
            })?;
            Family::BuiltIn(id)
        }
        (None, false) => {
            let prep = match &cli.custom_prep {
                Some(src) => expr::parse_prep(src)?,
                None => expr::PrepProgram::default(),
            };
            let custom = expr::CustomDistribution::new(
                &cli.location,
                &split_ws(&cli.param_anc),
                &split_ws(&cli.log_transf_param),
                custom_fns,
                prep,
            )?;
            Family::Custom(Arc::new(expr::assemble(custom)))
        }
        (None, true) => {
            return Err(Error::Config(
                "either --dist or two custom distribution expressions are required".to_string(),
            ))
        }
    };

    let mut bounds: Vec<(String, Option<f64>, Option<f64>)> = Vec::new();
    if let Some(text) = &cli.lower {
        for (name, v) in parse_kv_list(text, "lower")? {
            bounds.push((name, Some(v), None));
        }
    }
    if let Some(text) = &cli.upper {
        for (name, v) in parse_kv_list(text, "upper")? {
            if let Some(entry) = bounds.iter_mut().find(|(n, _, _)| *n == name) {
                entry.2 = Some(v);
            } else {
                bounds.push((name, None, Some(v)));
            }
        }
    }

    Ok(ModelSpec {
        family,
        covars: split_ws(&cli.covars),
        anc: match &cli.anc {
            Some(src) => model::parse_anc(src)?,
            None => Vec::new(),
        },
        class_cov: split_ws(&cli.class_cov),
        refgrp: cli.refgrp.as_deref().map(crate::design::parse_refgrp),
        init: match &cli.init {
            Some(text) => parse_kv_list(text, "init")?,
            None => Vec::new(),
        },
        bounds,
        alpha: cli.alpha,
        robust: parse_bool(&cli.robust, "robust")?,
        strata: split_ws(&cli.strata),
        weight: cli.weight.clone(),
        log_result: parse_bool(&cli.log_result, "log-result")?,
    })
}

fn missing_tokens(cli: &Cli) -> Vec<String> {
    let mut tokens = vec![String::new()];
    for t in cli.missing_tokens.split(',') {
        let t = t.trim().to_string();
        if !tokens.contains(&t) {
            tokens.push(t);
        }
    }
    tokens
}

fn load_predictions(path: &Path, tokens: &[String]) -> Result<Vec<PredictionRow>> {
    let table = data::load_table(path, tokens)?;
    let time_idx = table.column_index("time").ok_or_else(|| {
        Error::Predict("the prediction dataset needs a column named 'time'".to_string())
    })?;
    let mut rows = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let time = match &row[time_idx] {
            Value::Num(v) => *v,
            other => {
                return Err(Error::Predict(format!(
                    "prediction row {}: time is '{}', expected a positive number",
                    i + 1,
                    other.display()
                )))
            }
        };
        let covariates = table
            .columns
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != time_idx)
            .map(|(j, name)| (name.clone(), row[j].clone()))
            .collect();
        rows.push(PredictionRow { time, covariates });
    }
    Ok(rows)
}

/// Run a full modeling pass. Returns the process exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    let tokens = missing_tokens(cli);
    let table = data::load_table(&cli.data, &tokens)?;
    let mapping = ResponseMapping {
        t1: cli.t1.clone(),
        t2: cli.t2.clone(),
        censor: cli.censor.clone(),
        censval: cli.censval.clone(),
        weight: cli.weight.clone(),
        strata: split_ws(&cli.strata),
    };
    let set = data::normalize_response(&table, &mapping)?;
    let spec = build_spec(cli)?;
    if cli.pred_max_time.is_some() && cli.pred.is_none() {
        return Err(Error::Config(
            "--pred-max-time requires --pred".to_string(),
        ));
    }
    let options = FitOptions {
        algorithm: Algorithm::from_name(&cli.algorithm).ok_or_else(|| {
            Error::Config(format!(
                "unknown algorithm '{}' (expected newton-raphson, quasi-newton, or trust-region)",
                cli.algorithm
            ))
        })?,
        max_iterations: cli.max_iter,
        gradient_tolerance: cli.gtol,
        verbosity: cli.verbosity,
    };

    let mut fit = fit::fit_model(&spec, &set, &options)?;

    // predictions (skipped with a warning when the fit did not converge)
    let pred_rows = match &cli.pred {
        Some(path) => Some(load_predictions(path, &tokens)?),
        None => None,
    };
    let with_bands = parse_bool(&cli.pred_plot_cl, "pred-plot-cl")?;
    let mut points = None;
    let mut curves = None;
    if let Some(rows) = &pred_rows {
        if fit.convergence.converged() {
            points = Some(predict::predict_at(&fit, rows)?);
            if let Some(t_max) = cli.pred_max_time {
                curves = Some(predict::trajectories(&fit, rows, t_max, with_bands)?);
            }
        } else {
            fit.warnings
                .push("predictions skipped: the fit did not converge".to_string());
        }
    }

    // all computation done; write outputs
    std::fs::create_dir_all(&cli.outdir)?;
    let predictions = match (&pred_rows, &points) {
        (Some(rows), Some(points)) => Some((rows.as_slice(), points.as_slice())),
        _ => None,
    };
    let report_text = report::render_report(&fit, &set.deletions, predictions, spec.log_result);
    std::fs::write(cli.outdir.join("report.txt"), &report_text)?;
    let config_echo = serde_json::to_value(cli).expect("serializable config");
    let json = report::results_json(config_echo, &fit, &set.deletions, predictions);
    std::fs::write(
        cli.outdir.join("results.json"),
        serde_json::to_string_pretty(&json).expect("serializable results") + "\n",
    )?;
    if let Some(curves) = &curves {
        std::fs::write(cli.outdir.join("curves.csv"), report::curves_csv(curves))?;
        std::fs::write(
            cli.outdir.join("surv.svg"),
            svg::render_plot(curves, PlotKind::Survival, with_bands)?,
        )?;
        std::fs::write(
            cli.outdir.join("haz.svg"),
            svg::render_plot(curves, PlotKind::Hazard, with_bands)?,
        )?;
    }
    print!("{report_text}");
    Ok(if fit.convergence.converged() { 0 } else { 2 })
}
