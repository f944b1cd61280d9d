//! Model specification: distribution choice, per-parameter covariate
//! assignments, link functions, optimizer-scale transforms, and the flat
//! parameter layout the optimizer works on.
//!
//! Positive-constrained parameters get a log link, everything else identity.
//! The layout orders slots location-first, then ancillary parameters in
//! distribution order; within a parameter the intercept precedes the
//! covariates in declaration order. The slot count k is the model dimension
//! used by AIC/BIC.

use crate::design::DesignMatrix;
use crate::dist::{Constraint, Family};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Identity,
    Log,
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub family: Family,
    /// Covariates on the location parameter.
    pub covars: Vec<String>,
    /// Ancillary-parameter covariate assignments, e.g. sigma -> [age, sex].
    pub anc: Vec<(String, Vec<String>)>,
    pub class_cov: Vec<String>,
    pub refgrp: Option<Vec<String>>,
    /// User initial values on the original scale, keyed by parameter name or
    /// "parameter:column" for individual coefficient slots.
    pub init: Vec<(String, f64)>,
    /// Optional box bounds per parameter (applied to the intercept of
    /// covariate-free parameters only).
    pub bounds: Vec<(String, Option<f64>, Option<f64>)>,
    pub alpha: f64,
    pub robust: bool,
    pub strata: Vec<String>,
    pub weight: Option<String>,
    pub log_result: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            family: Family::BuiltIn(crate::dist::DistributionId::Exp),
            covars: Vec::new(),
            anc: Vec::new(),
            class_cov: Vec::new(),
            refgrp: None,
            init: Vec::new(),
            bounds: Vec::new(),
            alpha: 0.05,
            robust: false,
            strata: Vec::new(),
            weight: None,
            log_result: false,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Model(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        let specs = self.family.param_specs();
        let location = self.family.location();
        for (name, _) in &self.anc {
            if name.eq_ignore_ascii_case(&location) {
                return Err(Error::Model(format!(
                    "anc assigns covariates to the location parameter '{name}'; use covars"
                )));
            }
            if !specs.iter().any(|(p, _)| p.eq_ignore_ascii_case(name)) {
                return Err(Error::Model(format!(
                    "anc names unknown parameter '{name}' (parameters: {})",
                    specs.iter().map(|(p, _)| p.as_str()).collect::<Vec<_>>().join(", ")
                )));
            }
        }
        for (name, _, _) in &self.bounds {
            if !specs.iter().any(|(p, _)| p.eq_ignore_ascii_case(name)) {
                return Err(Error::Model(format!("bounds name unknown parameter '{name}'")));
            }
        }
        Ok(())
    }

    /// Ordered (parameter, covariates) pairs covering every distribution
    /// parameter; the location goes first with `covars`.
    pub fn param_covars(&self) -> Result<Vec<(String, Vec<String>)>> {
        self.validate()?;
        let location = self.family.location();
        let mut out = Vec::new();
        for (name, _) in self.family.param_specs() {
            if name.eq_ignore_ascii_case(&location) {
                out.push((name, self.covars.clone()));
            } else {
                let covs = self
                    .anc
                    .iter()
                    .find(|(p, _)| p.eq_ignore_ascii_case(&name))
                    .map(|(_, c)| c.clone())
                    .unwrap_or_default();
                out.push((name, covs));
            }
        }
        Ok(out)
    }

    /// Every covariate the model references, in first-appearance order.
    pub fn referenced_covariates(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |name: &String| {
            if !out.iter().any(|c| c.eq_ignore_ascii_case(name)) {
                out.push(name.clone());
            }
        };
        for c in &self.covars {
            push(c);
        }
        for (_, covs) in &self.anc {
            for c in covs {
                push(c);
            }
        }
        out
    }
}

/// Link assignment per distribution parameter: log for positive-constrained
/// parameters, identity otherwise.
pub fn default_links(family: &Family) -> Vec<(String, Link)> {
    family
        .param_specs()
        .into_iter()
        .map(|(name, constraint)| {
            let link = match constraint {
                Constraint::Positive => Link::Log,
                _ => Link::Identity,
            };
            (name, link)
        })
        .collect()
}

/// One coefficient slot of the flattened parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub parameter: String,
    pub column: String,
    pub label: String,
    pub link: Link,
    pub is_intercept: bool,
    /// Log-transformed on the optimizer scale (log-linked intercepts).
    pub transform: bool,
    /// Reported through exp with delta-method standard errors (log-linked
    /// parameters that carry no covariates).
    pub back_transform: bool,
    /// Optimizer-scale box bounds.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterLayout {
    pub slots: Vec<Slot>,
    /// Slot index range per parameter, in parameter order.
    pub ranges: Vec<(String, std::ops::Range<usize>)>,
}

impl ParameterLayout {
    pub fn k(&self) -> usize {
        self.slots.len()
    }

    pub fn range_of(&self, parameter: &str) -> Option<std::ops::Range<usize>> {
        self.ranges
            .iter()
            .find(|(p, _)| p.eq_ignore_ascii_case(parameter))
            .map(|(_, r)| r.clone())
    }

    pub fn labels(&self) -> Vec<String> {
        self.slots.iter().map(|s| s.label.clone()).collect()
    }
}

/// Build the flat layout from the model spec and the per-parameter designs.
pub fn build_layout(spec: &ModelSpec, designs: &[DesignMatrix]) -> Result<ParameterLayout> {
    let links = default_links(&spec.family);
    let location = spec.family.location();
    if designs.len() != links.len() {
        return Err(Error::Model(format!(
            "expected {} design matrices, got {}",
            links.len(),
            designs.len()
        )));
    }
    // Table-7 style "param: column" labels once any ancillary parameter
    // carries covariates; bare labels with uppercase ancillary names
    // otherwise.
    let anc_has_covars = designs
        .iter()
        .any(|d| !d.parameter.eq_ignore_ascii_case(&location) && d.ncols() > 1);

    let mut slots = Vec::new();
    let mut ranges = Vec::new();
    for ((param, link), design) in links.iter().zip(designs.iter()) {
        if !design.parameter.eq_ignore_ascii_case(param) {
            return Err(Error::Model(format!(
                "design matrix order mismatch: expected '{param}', got '{}'",
                design.parameter
            )));
        }
        let start = slots.len();
        let intercept_only = design.ncols() == 1;
        let bound = spec
            .bounds
            .iter()
            .find(|(name, _, _)| name.eq_ignore_ascii_case(param));
        if let Some((name, _, _)) = bound {
            if !intercept_only {
                return Err(Error::Model(format!(
                    "bounds on parameter '{name}' are not supported when it carries covariates; \
                     use the log transform instead"
                )));
            }
        }
        for (j, column) in design.columns.iter().enumerate() {
            let is_intercept = j == 0;
            let label = if anc_has_covars {
                format!("{param}: {column}")
            } else if param.eq_ignore_ascii_case(&location) {
                if is_intercept {
                    "Intercept".to_string()
                } else {
                    column.clone()
                }
            } else {
                param.to_uppercase()
            };
            let transform = *link == Link::Log && is_intercept;
            let (lower, upper) = if is_intercept {
                bound_on_optim_scale(bound, *link)?
            } else {
                (None, None)
            };
            slots.push(Slot {
                parameter: param.clone(),
                column: column.clone(),
                label,
                link: *link,
                is_intercept,
                transform,
                back_transform: *link == Link::Log && intercept_only,
                lower,
                upper,
            });
        }
        ranges.push((param.clone(), start..slots.len()));
    }
    Ok(ParameterLayout { slots, ranges })
}

fn bound_on_optim_scale(
    bound: Option<&(String, Option<f64>, Option<f64>)>,
    link: Link,
) -> Result<(Option<f64>, Option<f64>)> {
    let Some((name, lower, upper)) = bound else {
        return Ok((None, None));
    };
    if let (Some(l), Some(u)) = (lower, upper) {
        if l >= u {
            return Err(Error::Model(format!(
                "lower bound {l} is not below upper bound {u} for parameter '{name}'"
            )));
        }
    }
    match link {
        Link::Identity => Ok((*lower, *upper)),
        Link::Log => {
            let l = match lower {
                Some(l) if *l > 0.0 => Some(l.ln()),
                _ => None, // a log-linked parameter is already > 0
            };
            let u = match upper {
                Some(u) if *u > 0.0 => Some(u.ln()),
                Some(u) => {
                    return Err(Error::Model(format!(
                        "upper bound {u} is not positive for log-linked parameter '{name}'"
                    )))
                }
                None => None,
            };
            Ok((l, u))
        }
    }
}

/// Parse the ancillary-covariate syntax `sigma(age sex), lambda(sex)`.
pub fn parse_anc(src: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut entry = String::new();
    let mut entries = Vec::new();
    for c in src.chars() {
        match c {
            '(' => {
                depth += 1;
                entry.push(c);
            }
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(Error::Model(format!("unbalanced ')' in anc '{src}'")));
                }
                entry.push(c);
            }
            ',' if depth == 0 => {
                entries.push(std::mem::take(&mut entry));
            }
            _ => entry.push(c),
        }
    }
    if depth != 0 {
        return Err(Error::Model(format!("unbalanced '(' in anc '{src}'")));
    }
    if !entry.trim().is_empty() {
        entries.push(entry);
    }
    for e in entries {
        let e = e.trim();
        if e.is_empty() {
            continue;
        }
        let open = e.find('(').ok_or_else(|| {
            Error::Model(format!("anc entry '{e}' is missing '(covariates)'"))
        })?;
        if !e.ends_with(')') {
            return Err(Error::Model(format!("anc entry '{e}' is missing ')'")));
        }
        let name = e[..open].trim().to_lowercase();
        if name.is_empty() {
            return Err(Error::Model(format!("anc entry '{e}' has no parameter name")));
        }
        let covs: Vec<String> = e[open + 1..e.len() - 1]
            .split_whitespace()
            .map(|s| s.to_string())
            .collect();
        out.push((name, covs));
    }
    Ok(out)
}
