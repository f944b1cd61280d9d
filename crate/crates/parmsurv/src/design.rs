//! Covariate schemas and design matrices. Non-numeric columns become
//! classification covariates automatically; numeric columns can be forced to
//! classification. A K-level classification covariate yields K-1 dummy
//! columns named `covariate_level`, with the reference level defaulting to
//! the first level in ascending order and overridable per covariate.

use crate::data::{ObservationSet, Value};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum CovariateSchema {
    Continuous {
        name: String,
    },
    Classification {
        name: String,
        /// Ordered distinct level labels (ascending numeric for numeric
        /// columns, ascending lexicographic otherwise).
        levels: Vec<String>,
        reference: String,
    },
}

impl CovariateSchema {
    pub fn name(&self) -> &str {
        match self {
            CovariateSchema::Continuous { name } => name,
            CovariateSchema::Classification { name, .. } => name,
        }
    }

    /// The encoded column names this covariate contributes.
    pub fn encoded_columns(&self) -> Vec<String> {
        match self {
            CovariateSchema::Continuous { name } => vec![name.clone()],
            CovariateSchema::Classification { name, levels, reference } => levels
                .iter()
                .filter(|l| *l != reference)
                .map(|l| format!("{name}_{l}"))
                .collect(),
        }
    }
}

/// Parse a comma-delimited reference-group list; levels may contain spaces.
pub fn parse_refgrp(src: &str) -> Vec<String> {
    src.split(',').map(|s| s.trim().to_string()).collect()
}

/// Infer a schema for every referenced covariate.
pub fn infer_schema(
    set: &ObservationSet,
    covars: &[String],
    class_cov: &[String],
    refgrp: Option<&[String]>,
) -> Result<Vec<CovariateSchema>> {
    let mut schemas = Vec::with_capacity(covars.len());
    let mut class_positions = Vec::new();
    for name in covars {
        let idx = set.covariate_index(name).ok_or_else(|| {
            Error::Design(format!("unknown covariate '{name}'"))
        })?;
        let mut any_text = false;
        let mut all_numeric = true;
        for obs in &set.observations {
            match &obs.covariates[idx] {
                Value::Text(_) => {
                    any_text = true;
                    all_numeric = false;
                }
                Value::Num(_) => {}
                Value::Missing => {}
            }
        }
        let forced = class_cov.iter().any(|c| c.eq_ignore_ascii_case(name));
        if any_text || forced {
            let mut numeric_levels: Vec<f64> = Vec::new();
            let mut labels: Vec<String> = Vec::new();
            for obs in &set.observations {
                let v = &obs.covariates[idx];
                if v.is_missing() {
                    continue;
                }
                let label = v.display();
                if !labels.contains(&label) {
                    labels.push(label);
                    if let Value::Num(x) = v {
                        numeric_levels.push(*x);
                    }
                }
            }
            if all_numeric && numeric_levels.len() == labels.len() {
                let mut pairs: Vec<(f64, String)> =
                    numeric_levels.into_iter().zip(labels).collect();
                pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                labels = pairs.into_iter().map(|(_, l)| l).collect();
            } else {
                labels.sort();
            }
            if labels.is_empty() {
                return Err(Error::Design(format!(
                    "classification covariate '{name}' has no observed levels"
                )));
            }
            class_positions.push(schemas.len());
            schemas.push(CovariateSchema::Classification {
                name: name.clone(),
                reference: labels[0].clone(),
                levels: labels,
            });
        } else {
            schemas.push(CovariateSchema::Continuous { name: name.clone() });
        }
    }
    if let Some(refs) = refgrp {
        if refs.len() != class_positions.len() {
            return Err(Error::Design(format!(
                "refgrp has {} entries but there are {} classification covariates",
                refs.len(),
                class_positions.len()
            )));
        }
        for (pos, r) in class_positions.iter().zip(refs.iter()) {
            if let CovariateSchema::Classification { name, levels, reference } =
                &mut schemas[*pos]
            {
                if !levels.contains(r) {
                    return Err(Error::Design(format!(
                        "refgrp level '{r}' is not an observed level of '{name}' \
                         (levels: {})",
                        levels.join(", ")
                    )));
                }
                *reference = r.clone();
            }
        }
    }
    Ok(schemas)
}

/// Numeric design matrix for one distribution parameter. The first column is
/// the intercept.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub parameter: String,
    pub columns: Vec<String>,
    pub nrows: usize,
    values: Vec<f64>,
}

impl DesignMatrix {
    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.columns.len();
        &self.values[i * p..(i + 1) * p]
    }
}

fn schema_for<'a>(schema: &'a [CovariateSchema], name: &str) -> Result<&'a CovariateSchema> {
    schema
        .iter()
        .find(|s| s.name().eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Design(format!("unknown covariate '{name}'")))
}

/// Encode one covariate value into its design cells.
fn encode_value(schema: &CovariateSchema, value: &Value, out: &mut Vec<f64>, ctx: &str) -> Result<()> {
    match schema {
        CovariateSchema::Continuous { name } => match value {
            Value::Num(v) => {
                out.push(*v);
                Ok(())
            }
            other => Err(Error::Design(format!(
                "continuous covariate '{name}' has non-numeric value '{}' {ctx}",
                other.display()
            ))),
        },
        CovariateSchema::Classification { name, levels, reference } => {
            if value.is_missing() {
                return Err(Error::Design(format!(
                    "classification covariate '{name}' has a missing value {ctx}"
                )));
            }
            let label = value.display();
            if !levels.contains(&label) {
                return Err(Error::Design(format!(
                    "classification covariate '{name}' has unseen level '{label}' {ctx}"
                )));
            }
            for l in levels.iter().filter(|l| *l != reference) {
                out.push(if *l == label { 1.0 } else { 0.0 });
            }
            Ok(())
        }
    }
}

/// Encode a full design row (intercept first) for the given covariate list,
/// reading values through `get`.
pub fn encode_row(
    schema: &[CovariateSchema],
    covars: &[String],
    get: &dyn Fn(&str) -> Option<Value>,
    ctx: &str,
) -> Result<Vec<f64>> {
    let mut row = vec![1.0];
    for name in covars {
        let entry = schema_for(schema, name)?;
        let value = get(entry.name()).ok_or_else(|| {
            Error::Design(format!("no value for covariate '{name}' {ctx}"))
        })?;
        encode_value(entry, &value, &mut row, ctx)?;
    }
    Ok(row)
}

/// Build one design matrix per distribution parameter. Parameters with no
/// covariates get the intercept-only matrix.
pub fn build_design(
    set: &ObservationSet,
    schema: &[CovariateSchema],
    param_covars: &[(String, Vec<String>)],
) -> Result<Vec<DesignMatrix>> {
    let n = set.len();
    let mut out = Vec::with_capacity(param_covars.len());
    for (param, covars) in param_covars {
        let mut columns = vec!["intercept".to_string()];
        for name in covars {
            columns.extend(schema_for(schema, name)?.encoded_columns());
        }
        let mut values = Vec::with_capacity(n * columns.len());
        for (i, obs) in set.observations.iter().enumerate() {
            let ctx = format!("(row {})", i + 1);
            let row = encode_row(
                schema,
                covars,
                &|name| {
                    set.covariate_index(name)
                        .map(|idx| obs.covariates[idx].clone())
                },
                &ctx,
            )?;
            values.extend(row);
        }
        out.push(DesignMatrix {
            parameter: param.clone(),
            columns,
            nrows: n,
            values,
        });
    }
    Ok(out)
}
