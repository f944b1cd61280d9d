//! Data ingestion and response normalization.
//!
//! Input tables arrive as CSV with a header row. The time-to-event response
//! comes in one of two layouts: two bound columns (t1, t2) where a missing
//! bound means an open interval, or an observed time plus a censoring-status
//! column for right-censored data. Both are normalized to the bound form.
//! Records violating the validity rules are deleted and counted per rule;
//! deletions are always reported, never silent.

use crate::error::{Error, Result};
use std::collections::HashSet;
use std::fmt;
use std::path::Path;

/// A table cell: numeric where parseable, missing where it matched a missing
/// token, text otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Text(String),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Display form used for level labels and group labels.
    pub fn display(&self) -> String {
        match self {
            Value::Num(v) => format_number(*v),
            Value::Text(s) => s.clone(),
            Value::Missing => ".".to_string(),
        }
    }
}

/// Shortest plain rendering of a numeric cell (1.0 prints as "1").
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.eq_ignore_ascii_case(name))
    }
}

pub const DEFAULT_MISSING_TOKENS: [&str; 2] = ["", "."];

/// Load a CSV file with a header row. Cells are typed numeric where
/// parseable and missing where they match one of `missing_tokens`.
pub fn load_table(path: &Path, missing_tokens: &[String]) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot read '{}': {e}", path.display())))?;
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("bad header in '{}': {e}", path.display())))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut seen = HashSet::new();
    for c in &columns {
        if !seen.insert(c.to_ascii_lowercase()) {
            return Err(Error::Data(format!("duplicate column name '{c}'")));
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            Error::Data(format!("row {}: {e}", i + 1))
        })?;
        let row: Vec<Value> = record.iter().map(|cell| parse_cell(cell, missing_tokens)).collect();
        rows.push(row);
    }
    Ok(RawTable { columns, rows })
}

fn parse_cell(cell: &str, missing_tokens: &[String]) -> Value {
    let trimmed = cell.trim();
    if missing_tokens.iter().any(|t| t == trimmed) {
        return Value::Missing;
    }
    match trimmed.parse::<f64>() {
        Ok(v) => Value::Num(v),
        Err(_) => Value::Text(trimmed.to_string()),
    }
}

/// Canonical interval bounds of the time-to-event response. A missing bound
/// is an open end: (t1, missing) is right-censored at t1, (missing, t2) is
/// left-censored at t2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseBounds {
    pub t1: Option<f64>,
    pub t2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensorKind {
    Event,
    RightCensored,
    LeftCensored,
    IntervalCensored,
}

impl ResponseBounds {
    /// The censoring kind the bounds satisfy, if any; every valid
    /// observation satisfies exactly one.
    pub fn censor_kind(&self) -> Option<CensorKind> {
        match (self.t1, self.t2) {
            (Some(a), Some(b)) if a == b && a > 0.0 => Some(CensorKind::Event),
            (Some(a), None) if a > 0.0 => Some(CensorKind::RightCensored),
            (None, Some(b)) if b > 0.0 => Some(CensorKind::LeftCensored),
            (Some(a), Some(b)) if a > 0.0 && a < b => Some(CensorKind::IntervalCensored),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Observation {
    pub bounds: ResponseBounds,
    pub kind: CensorKind,
    pub weight: f64,
    pub stratum: Option<String>,
    /// Covariate cells, aligned with `ObservationSet::covariate_names`.
    pub covariates: Vec<Value>,
}

/// Why a record was deleted during normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeletionReason {
    BothBoundsMissing,
    NegativeTime,
    NonPositiveTime,
    BoundsReversed,
    MissingCensorStatus,
}

impl DeletionReason {
    pub const ALL: [DeletionReason; 5] = [
        DeletionReason::BothBoundsMissing,
        DeletionReason::NegativeTime,
        DeletionReason::NonPositiveTime,
        DeletionReason::BoundsReversed,
        DeletionReason::MissingCensorStatus,
    ];

    pub fn describe(&self) -> &'static str {
        match self {
            DeletionReason::BothBoundsMissing => "both time bounds missing",
            DeletionReason::NegativeTime => "negative time value",
            DeletionReason::NonPositiveTime => "time bound not strictly positive",
            DeletionReason::BoundsReversed => "t1 greater than t2",
            DeletionReason::MissingCensorStatus => "missing censoring status",
        }
    }
}

impl fmt::Display for DeletionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

#[derive(Debug, Clone, Default)]
pub struct DeletionLog {
    pub counts: Vec<(DeletionReason, usize)>,
    pub input_rows: usize,
    pub retained: usize,
}

impl DeletionLog {
    fn record(&mut self, reason: DeletionReason) {
        if let Some(entry) = self.counts.iter_mut().find(|(r, _)| *r == reason) {
            entry.1 += 1;
        } else {
            self.counts.push((reason, 1));
        }
    }

    pub fn total_deleted(&self) -> usize {
        self.counts.iter().map(|(_, n)| n).sum()
    }
}

/// Validated time-to-event records with weights, strata, and raw covariates.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    pub covariate_names: Vec<String>,
    pub observations: Vec<Observation>,
    pub deletions: DeletionLog,
    pub strata_columns: Vec<String>,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names
            .iter()
            .position(|c| c.eq_ignore_ascii_case(name))
    }

    /// A copy holding only the observations at `indices` (used to split by
    /// stratum).
    pub fn subset(&self, indices: &[usize]) -> ObservationSet {
        ObservationSet {
            covariate_names: self.covariate_names.clone(),
            observations: indices.iter().map(|&i| self.observations[i].clone()).collect(),
            deletions: DeletionLog::default(),
            strata_columns: self.strata_columns.clone(),
        }
    }
}

/// Which columns hold the response, weight, and strata.
#[derive(Debug, Clone, Default)]
pub struct ResponseMapping {
    pub t1: String,
    pub t2: Option<String>,
    pub censor: Option<String>,
    /// Raw censoring value token; numeric cells compare numerically, text
    /// cells compare as trimmed case-sensitive text.
    pub censval: String,
    pub weight: Option<String>,
    pub strata: Vec<String>,
}

/// Normalize the response into canonical bounds, applying the deletion
/// rules and carrying weights, strata, and all remaining columns as
/// covariates.
pub fn normalize_response(table: &RawTable, mapping: &ResponseMapping) -> Result<ObservationSet> {
    if mapping.t2.is_some() == mapping.censor.is_some() {
        return Err(Error::Config(
            "exactly one of t2/censor must be given to select the response format".to_string(),
        ));
    }
    let t1_idx = require_column(table, &mapping.t1)?;
    let t2_idx = mapping.t2.as_deref().map(|c| require_column(table, c)).transpose()?;
    let censor_idx = mapping
        .censor
        .as_deref()
        .map(|c| require_column(table, c))
        .transpose()?;
    let weight_idx = mapping
        .weight
        .as_deref()
        .map(|c| require_column(table, c))
        .transpose()?;
    let strata_idx: Vec<usize> = mapping
        .strata
        .iter()
        .map(|c| require_column(table, c))
        .collect::<Result<_>>()?;

    let mut reserved: HashSet<usize> = HashSet::new();
    reserved.insert(t1_idx);
    reserved.extend(t2_idx);
    reserved.extend(censor_idx);
    reserved.extend(weight_idx);
    reserved.extend(strata_idx.iter().copied());
    let covariate_cols: Vec<usize> = (0..table.columns.len())
        .filter(|i| !reserved.contains(i))
        .collect();
    let covariate_names: Vec<String> = covariate_cols
        .iter()
        .map(|&i| table.columns[i].clone())
        .collect();

    let censval_num: Option<f64> = mapping.censval.trim().parse().ok();

    let mut deletions = DeletionLog {
        input_rows: table.rows.len(),
        ..Default::default()
    };
    let mut observations = Vec::with_capacity(table.rows.len());
    for (row_no, row) in table.rows.iter().enumerate() {
        let bounds = if let Some(t2_idx) = t2_idx {
            let t1 = numeric_cell(&row[t1_idx], &table.columns[t1_idx], row_no)?;
            let t2 = numeric_cell(&row[t2_idx], &table.columns[t2_idx], row_no)?;
            match (t1, t2) {
                (None, None) => {
                    deletions.record(DeletionReason::BothBoundsMissing);
                    continue;
                }
                (a, b) => {
                    if a.map_or(false, |v| v < 0.0) || b.map_or(false, |v| v < 0.0) {
                        deletions.record(DeletionReason::NegativeTime);
                        continue;
                    }
                    if let (Some(a), Some(b)) = (a, b) {
                        if a > b {
                            deletions.record(DeletionReason::BoundsReversed);
                            continue;
                        }
                    }
                    ResponseBounds { t1: a, t2: b }
                }
            }
        } else {
            // observed time + censoring status, right censoring only
            let censor_idx = censor_idx.expect("validated above");
            let obs_time = numeric_cell(&row[t1_idx], &table.columns[t1_idx], row_no)?;
            let Some(obs_time) = obs_time else {
                deletions.record(DeletionReason::BothBoundsMissing);
                continue;
            };
            if obs_time < 0.0 {
                deletions.record(DeletionReason::NegativeTime);
                continue;
            }
            let is_censored = match &row[censor_idx] {
                Value::Missing => {
                    deletions.record(DeletionReason::MissingCensorStatus);
                    continue;
                }
                Value::Num(v) => match censval_num {
                    Some(c) => *v == c,
                    None => false,
                },
                Value::Text(s) => s == mapping.censval.trim(),
            };
            if is_censored {
                ResponseBounds {
                    t1: Some(obs_time),
                    t2: None,
                }
            } else {
                ResponseBounds {
                    t1: Some(obs_time),
                    t2: Some(obs_time),
                }
            }
        };

        let Some(kind) = bounds.censor_kind() else {
            deletions.record(DeletionReason::NonPositiveTime);
            continue;
        };

        let weight = match weight_idx {
            None => 1.0,
            Some(w_idx) => match &row[w_idx] {
                Value::Num(v) if *v > 0.0 => *v,
                Value::Num(v) => {
                    return Err(Error::Data(format!(
                        "non-positive weight {v} at row {}",
                        row_no + 1
                    )))
                }
                other => {
                    return Err(Error::Data(format!(
                        "weight column '{}' has non-numeric value '{}' at row {}",
                        table.columns[w_idx],
                        other.display(),
                        row_no + 1
                    )))
                }
            },
        };

        let stratum = if strata_idx.is_empty() {
            None
        } else {
            let mut parts = Vec::with_capacity(strata_idx.len());
            for &s_idx in &strata_idx {
                match &row[s_idx] {
                    Value::Missing => {
                        return Err(Error::Data(format!(
                            "missing stratum value in column '{}' at row {}",
                            table.columns[s_idx],
                            row_no + 1
                        )))
                    }
                    v => parts.push(v.display()),
                }
            }
            Some(parts.join("/"))
        };

        observations.push(Observation {
            bounds,
            kind,
            weight,
            stratum,
            covariates: covariate_cols.iter().map(|&i| row[i].clone()).collect(),
        });
    }
    deletions.retained = observations.len();
    Ok(ObservationSet {
        covariate_names,
        observations,
        deletions,
        strata_columns: mapping.strata.clone(),
    })
}

fn require_column(table: &RawTable, name: &str) -> Result<usize> {
    table
        .column_index(name)
        .ok_or_else(|| Error::Data(format!("column '{name}' not found")))
}

fn numeric_cell(value: &Value, column: &str, row_no: usize) -> Result<Option<f64>> {
    match value {
        Value::Missing => Ok(None),
        Value::Num(v) => Ok(Some(*v)),
        Value::Text(s) => Err(Error::Data(format!(
            "non-numeric value '{s}' in time column '{column}' at row {}",
            row_no + 1
        ))),
    }
}

/// The observed time tau used by initialization: the event or censoring
/// time, or the interval midpoint.
pub fn observed_time(obs: &Observation) -> f64 {
    match obs.kind {
        CensorKind::Event | CensorKind::RightCensored => obs.bounds.t1.expect("valid bounds"),
        CensorKind::LeftCensored => obs.bounds.t2.expect("valid bounds"),
        CensorKind::IntervalCensored => {
            (obs.bounds.t1.expect("valid") + obs.bounds.t2.expect("valid")) / 2.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn default_tokens() -> Vec<String> {
        DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn loads_numeric_cells() {
        let f = write_csv("time,delta\n0.50007,1\n");
        let t = load_table(f.path(), &default_tokens()).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0][0], Value::Num(0.50007));
        assert_eq!(t.rows[0][1], Value::Num(1.0));
    }

    #[test]
    fn empty_cell_and_dot_are_missing() {
        let f = write_csv("t1,t2\n2.92097,\n1.0,.\n");
        let t = load_table(f.path(), &default_tokens()).unwrap();
        assert_eq!(t.rows[0][1], Value::Missing);
        assert_eq!(t.rows[1][1], Value::Missing);
    }

    #[test]
    fn ragged_rows_rejected() {
        let f = write_csv("a,b\n1,2\n3\n");
        assert!(load_table(f.path(), &default_tokens()).is_err());
    }

    #[test]
    fn duplicate_columns_rejected_case_insensitively() {
        let f = write_csv("Time,tIME\n1,2\n");
        let err = load_table(f.path(), &default_tokens()).unwrap_err();
        assert!(err.to_string().contains("duplicate column"));
    }

    fn table(columns: &[&str], rows: &[&[Value]]) -> RawTable {
        RawTable {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: rows.iter().map(|r| r.to_vec()).collect(),
        }
    }

    fn fmt1(t1: &str, t2: &str) -> ResponseMapping {
        ResponseMapping {
            t1: t1.to_string(),
            t2: Some(t2.to_string()),
            censval: "0".to_string(),
            ..Default::default()
        }
    }

    const M: Value = Value::Missing;
    fn n(v: f64) -> Value {
        Value::Num(v)
    }

    #[test]
    fn format1_classification() {
        let t = table(
            &["t1", "t2"],
            &[
                &[n(5.0), M],          // right censored
                &[M, n(3.0)],          // left censored
                &[n(1.0), n(3.0)],     // interval
                &[n(0.5), n(0.5)],     // event
                &[n(3.0), n(1.0)],     // reversed -> deleted
                &[M, M],               // both missing -> deleted
                &[n(-1.0), n(2.0)],    // negative -> deleted
                &[n(0.0), M],          // zero right-censor time -> deleted
            ],
        );
        let set = normalize_response(&t, &fmt1("t1", "t2")).unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.observations[0].kind, CensorKind::RightCensored);
        assert_eq!(set.observations[1].kind, CensorKind::LeftCensored);
        assert_eq!(set.observations[2].kind, CensorKind::IntervalCensored);
        assert_eq!(set.observations[3].kind, CensorKind::Event);
        assert_eq!(set.deletions.total_deleted(), 4);
        assert_eq!(set.deletions.input_rows, 8);
        assert_eq!(set.deletions.retained, 4);
        let reasons: Vec<DeletionReason> = set.deletions.counts.iter().map(|(r, _)| *r).collect();
        assert!(reasons.contains(&DeletionReason::BoundsReversed));
        assert!(reasons.contains(&DeletionReason::BothBoundsMissing));
        assert!(reasons.contains(&DeletionReason::NegativeTime));
        assert!(reasons.contains(&DeletionReason::NonPositiveTime));
    }

    #[test]
    fn format2_conversion() {
        let t = table(
            &["time", "delta"],
            &[
                &[n(4.0), n(0.0)], // censored at 4
                &[n(2.0), n(1.0)], // event at 2
                &[n(2.0), M],      // missing status -> deleted
                &[n(-3.0), n(1.0)], // negative time -> deleted
            ],
        );
        let mapping = ResponseMapping {
            t1: "time".to_string(),
            censor: Some("delta".to_string()),
            censval: "0".to_string(),
            ..Default::default()
        };
        let set = normalize_response(&t, &mapping).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.observations[0].kind, CensorKind::RightCensored);
        assert_eq!(set.observations[0].bounds, ResponseBounds { t1: Some(4.0), t2: None });
        assert_eq!(set.observations[1].kind, CensorKind::Event);
        assert_eq!(
            set.observations[1].bounds,
            ResponseBounds { t1: Some(2.0), t2: Some(2.0) }
        );
        assert_eq!(set.deletions.total_deleted(), 2);
    }

    #[test]
    fn text_censor_column_compares_as_text() {
        let t = table(
            &["time", "status"],
            &[
                &[n(1.0), Value::Text("cens".to_string())],
                &[n(2.0), Value::Text("event".to_string())],
            ],
        );
        let mapping = ResponseMapping {
            t1: "time".to_string(),
            censor: Some("status".to_string()),
            censval: "cens".to_string(),
            ..Default::default()
        };
        let set = normalize_response(&t, &mapping).unwrap();
        assert_eq!(set.observations[0].kind, CensorKind::RightCensored);
        assert_eq!(set.observations[1].kind, CensorKind::Event);
    }

    #[test]
    fn formats_agree_on_right_censored_data() {
        // the same data in both layouts yields identical observation sets
        let times = [0.5, 1.2, 3.4, 0.9, 2.2];
        let censored = [false, true, false, true, false];
        let rows1: Vec<Vec<Value>> = times
            .iter()
            .zip(censored.iter())
            .map(|(&t, &c)| vec![n(t), if c { M } else { n(t) }])
            .collect();
        let rows2: Vec<Vec<Value>> = times
            .iter()
            .zip(censored.iter())
            .map(|(&t, &c)| vec![n(t), n(if c { 0.0 } else { 1.0 })])
            .collect();
        let t1 = RawTable {
            columns: vec!["t1".to_string(), "t2".to_string()],
            rows: rows1,
        };
        let t2 = RawTable {
            columns: vec!["time".to_string(), "delta".to_string()],
            rows: rows2,
        };
        let set1 = normalize_response(&t1, &fmt1("t1", "t2")).unwrap();
        let set2 = normalize_response(
            &t2,
            &ResponseMapping {
                t1: "time".to_string(),
                censor: Some("delta".to_string()),
                censval: "0".to_string(),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(set1.len(), set2.len());
        for (a, b) in set1.observations.iter().zip(set2.observations.iter()) {
            assert_eq!(a.bounds, b.bounds);
            assert_eq!(a.kind, b.kind);
        }
    }

    #[test]
    fn normalization_is_idempotent_on_canonical_data() {
        let t = table(
            &["t1", "t2", "x"],
            &[
                &[n(5.0), M, n(1.0)],
                &[n(1.0), n(3.0), n(2.0)],
                &[n(0.5), n(0.5), n(3.0)],
            ],
        );
        let set1 = normalize_response(&t, &fmt1("t1", "t2")).unwrap();
        // round-trip the canonical bounds through a new table
        let rows: Vec<Vec<Value>> = set1
            .observations
            .iter()
            .map(|o| {
                vec![
                    o.bounds.t1.map_or(M, n),
                    o.bounds.t2.map_or(M, n),
                    o.covariates[0].clone(),
                ]
            })
            .collect();
        let t2 = RawTable {
            columns: vec!["t1".to_string(), "t2".to_string(), "x".to_string()],
            rows,
        };
        let set2 = normalize_response(&t2, &fmt1("t1", "t2")).unwrap();
        assert_eq!(set1.len(), set2.len());
        assert_eq!(set2.deletions.total_deleted(), 0);
        for (a, b) in set1.observations.iter().zip(set2.observations.iter()) {
            assert_eq!(a.bounds, b.bounds);
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.covariates, b.covariates);
        }
    }

    #[test]
    fn every_retained_row_satisfies_exactly_one_kind() {
        let t = table(
            &["t1", "t2"],
            &[&[n(5.0), M], &[M, n(3.0)], &[n(1.0), n(3.0)], &[n(0.5), n(0.5)]],
        );
        let set = normalize_response(&t, &fmt1("t1", "t2")).unwrap();
        for o in &set.observations {
            let b = o.bounds;
            let mut matched = 0;
            if b.t1.map_or(false, |a| a > 0.0) && b.t2 == b.t1 {
                matched += 1; // event
            }
            if b.t1.map_or(false, |a| a > 0.0) && b.t2.is_none() {
                matched += 1; // right
            }
            if b.t1.is_none() && b.t2.map_or(false, |v| v > 0.0) {
                matched += 1; // left
            }
            if let (Some(a), Some(bb)) = (b.t1, b.t2) {
                if a > 0.0 && a < bb {
                    matched += 1; // interval
                }
            }
            assert_eq!(matched, 1, "{b:?}");
        }
    }

    #[test]
    fn nonpositive_weight_is_an_error() {
        let t = table(&["t1", "t2", "w"], &[&[n(1.0), M, n(0.0)]]);
        let mapping = ResponseMapping {
            weight: Some("w".to_string()),
            ..fmt1("t1", "t2")
        };
        let err = normalize_response(&t, &mapping).unwrap_err();
        assert!(err.to_string().contains("non-positive weight"));
    }

    #[test]
    fn both_or_neither_format_column_rejected() {
        let t = table(&["t1", "t2", "d"], &[&[n(1.0), M, n(0.0)]]);
        let both = ResponseMapping {
            censor: Some("d".to_string()),
            ..fmt1("t1", "t2")
        };
        assert!(normalize_response(&t, &both).is_err());
        let neither = ResponseMapping {
            t1: "t1".to_string(),
            censval: "0".to_string(),
            ..Default::default()
        };
        assert!(normalize_response(&t, &neither).is_err());
    }

    #[test]
    fn observed_time_per_kind() {
        let t = table(
            &["t1", "t2"],
            &[&[n(2.0), M], &[n(1.0), n(3.0)], &[n(0.5), n(0.5)], &[M, n(4.0)]],
        );
        let set = normalize_response(&t, &fmt1("t1", "t2")).unwrap();
        let taus: Vec<f64> = set.observations.iter().map(observed_time).collect();
        assert_eq!(taus, vec![2.0, 2.0, 0.5, 4.0]);
    }

    #[test]
    fn strata_labels_join_columns() {
        let t = table(
            &["t1", "t2", "site", "arm"],
            &[&[n(1.0), M, Value::Text("A".into()), n(1.0)]],
        );
        let mapping = ResponseMapping {
            strata: vec!["site".to_string(), "arm".to_string()],
            ..fmt1("t1", "t2")
        };
        let set = normalize_response(&t, &mapping).unwrap();
        assert_eq!(set.observations[0].stratum.as_deref(), Some("A/1"));
        assert!(set.covariate_names.is_empty());
    }
}
