//! Survival, density, cdf, and hazard kernels for the built-in distribution
//! families, plus the `Family` wrapper that dispatches between built-ins and
//! user-defined kernels.
//!
//! All families carry a location parameter `beta`; ancillary parameters
//! control the hazard shape. The generalized gamma uses the (beta, sigma,
//! lambda) parameterization with gamma-cdf survival branches split on the
//! sign of lambda; the generalized F uses the Prentice (q, p) form, with the
//! original (m1, m2) form available as a separate family id. The log-logistic
//! exponent is sqrt(2)/sigma, consistent with the generalized F at q=0, p=1
//! (delta = sqrt(2)); note this differs from the 1/sigma convention some
//! other software uses.

use crate::error::{Error, Result};
use crate::expr::CustomKernel;
use crate::special::{
    inc_gamma_pair, ln_beta, ln_beta_density, ln_gamma, ln_gamma_density_core, normal_cdf,
    reg_inc_beta,
};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionId {
    Exp,
    Weibull,
    Gamma,
    Lnorm,
    Gompertz,
    Llogis,
    GenGamma,
    GenF,
    GenFOrig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Free,
    Positive,
    NonZero,
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub constraint: Constraint,
}

const fn p(name: &'static str, constraint: Constraint) -> ParamSpec {
    ParamSpec { name, constraint }
}

impl DistributionId {
    pub fn from_name(name: &str) -> Option<DistributionId> {
        match name.to_ascii_lowercase().as_str() {
            "exp" | "exponential" => Some(DistributionId::Exp),
            "weibull" => Some(DistributionId::Weibull),
            "gamma" => Some(DistributionId::Gamma),
            "lnorm" | "lognormal" | "log-normal" => Some(DistributionId::Lnorm),
            "gompertz" => Some(DistributionId::Gompertz),
            "llogis" | "loglogistic" | "log-logistic" => Some(DistributionId::Llogis),
            "gengamma" => Some(DistributionId::GenGamma),
            "genf" => Some(DistributionId::GenF),
            "genf_orig" | "genforig" => Some(DistributionId::GenFOrig),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistributionId::Exp => "exp",
            DistributionId::Weibull => "weibull",
            DistributionId::Gamma => "gamma",
            DistributionId::Lnorm => "lnorm",
            DistributionId::Gompertz => "gompertz",
            DistributionId::Llogis => "llogis",
            DistributionId::GenGamma => "gengamma",
            DistributionId::GenF => "genf",
            DistributionId::GenFOrig => "genf_orig",
        }
    }

    pub fn params(&self) -> &'static [ParamSpec] {
        use Constraint::*;
        const LOCATION_ONLY: [ParamSpec; 1] = [p("beta", Free)];
        const LOCATION_SCALE: [ParamSpec; 2] = [p("beta", Free), p("sigma", Positive)];
        const GOMPERTZ: [ParamSpec; 2] = [p("beta", Free), p("nu", NonZero)];
        const GENGAMMA: [ParamSpec; 3] =
            [p("beta", Free), p("sigma", Positive), p("lambda", NonZero)];
        const GENF: [ParamSpec; 4] = [
            p("beta", Free),
            p("sigma", Positive),
            p("q", Free),
            p("p", Positive),
        ];
        const GENF_ORIG: [ParamSpec; 4] = [
            p("beta", Free),
            p("sigma", Positive),
            p("m1", Positive),
            p("m2", Positive),
        ];
        match self {
            DistributionId::Exp => &LOCATION_ONLY,
            DistributionId::Weibull | DistributionId::Gamma | DistributionId::Lnorm
            | DistributionId::Llogis => &LOCATION_SCALE,
            DistributionId::Gompertz => &GOMPERTZ,
            DistributionId::GenGamma => &GENGAMMA,
            DistributionId::GenF => &GENF,
            DistributionId::GenFOrig => &GENF_ORIG,
        }
    }

    fn validate(&self, params: &[f64], t: f64) -> Result<()> {
        let specs = self.params();
        if params.len() != specs.len() {
            return Err(Error::Domain(format!(
                "{} takes {} parameters, got {}",
                self.name(),
                specs.len(),
                params.len()
            )));
        }
        for (spec, &v) in specs.iter().zip(params.iter()) {
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "{} parameter {} is not finite ({v})",
                    self.name(),
                    spec.name
                )));
            }
            match spec.constraint {
                Constraint::Free => {}
                Constraint::Positive => {
                    if v <= 0.0 {
                        return Err(Error::Domain(format!(
                            "{} parameter {} must be positive, got {v}",
                            self.name(),
                            spec.name
                        )));
                    }
                }
                Constraint::NonZero => {
                    if v == 0.0 {
                        return Err(Error::Domain(format!(
                            "{} parameter {} must be nonzero",
                            self.name(),
                            spec.name
                        )));
                    }
                }
            }
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!(
                "time must be positive and finite, got {t}"
            )));
        }
        Ok(())
    }

    /// log S(t).
    pub fn log_survival(&self, params: &[f64], t: f64) -> Result<f64> {
        self.validate(params, t)?;
        self.log_survival_unchecked(params, t)
    }

    fn log_survival_unchecked(&self, params: &[f64], t: f64) -> Result<f64> {
        match self {
            DistributionId::Exp => {
                let gamma = (-params[0]).exp();
                Ok(-gamma * t)
            }
            DistributionId::Weibull => {
                let u = (t.ln() - params[0]) / params[1];
                Ok(-u.exp())
            }
            DistributionId::Gamma => {
                let (a, x) = gamma_shape_x(params, t);
                Ok(inc_gamma_pair(a, x)?.1.ln())
            }
            DistributionId::Lnorm => {
                let w = (t.ln() - params[0]) / params[1];
                Ok(normal_cdf(-w).ln())
            }
            DistributionId::Gompertz => {
                let gamma = (-params[0]).exp();
                Ok(-gamma * gompertz_cumulative(params[1], t))
            }
            DistributionId::Llogis => {
                let u = std::f64::consts::SQRT_2 / params[1] * (t.ln() - params[0]);
                Ok(-softplus(u))
            }
            DistributionId::GenGamma => {
                let (a, u, _lnu, lambda) = gengamma_parts(params, t);
                let (pv, qv) = inc_gamma_pair(a, u)?;
                if lambda > 0.0 {
                    Ok(qv.ln())
                } else {
                    Ok(pv.ln())
                }
            }
            DistributionId::GenF | DistributionId::GenFOrig => {
                // S = I_x(m2, m1) at x = sigmoid(-r). Evaluate through
                // whichever sigmoid argument is small: near-1 arguments
                // quantize at the ulp of 1 and turn the smooth parameter
                // dependence into staircase plateaus.
                let gf = genf_parts(*self, params, t);
                if gf.r > 0.0 {
                    Ok(reg_inc_beta(sigmoid(-gf.r), gf.m2, gf.m1)?.ln())
                } else {
                    let cdf = reg_inc_beta(sigmoid(gf.r), gf.m1, gf.m2)?;
                    Ok(f64::ln_1p(-cdf))
                }
            }
        }
    }

    /// S(t).
    pub fn survival(&self, params: &[f64], t: f64) -> Result<f64> {
        Ok(self.log_survival(params, t)?.exp())
    }

    /// log f(t).
    pub fn log_density(&self, params: &[f64], t: f64) -> Result<f64> {
        self.validate(params, t)?;
        match self {
            DistributionId::Exp => {
                let gamma = (-params[0]).exp();
                Ok(-params[0] - gamma * t)
            }
            DistributionId::Weibull => {
                let sigma = params[1];
                let u = (t.ln() - params[0]) / sigma;
                Ok(-sigma.ln() - t.ln() + u - u.exp())
            }
            DistributionId::Gamma => {
                let (a, x) = gamma_shape_x(params, t);
                let ln_b = 2.0 * params[1].ln() + params[0];
                Ok((a - 1.0) * (t.ln() - ln_b) - x - ln_gamma(a) - ln_b)
            }
            DistributionId::Lnorm => {
                let sigma = params[1];
                let w = (t.ln() - params[0]) / sigma;
                Ok(-0.5 * w * w
                    - 0.5 * (2.0 * std::f64::consts::PI).ln()
                    - sigma.ln()
                    - t.ln())
            }
            DistributionId::Gompertz => {
                let gamma = (-params[0]).exp();
                let nu = params[1];
                Ok(-params[0] + nu * t - gamma * gompertz_cumulative(nu, t))
            }
            DistributionId::Llogis => {
                let sigma = params[1];
                let k = std::f64::consts::SQRT_2 / sigma;
                let u = k * (t.ln() - params[0]);
                Ok(k.ln() - t.ln() + u - 2.0 * softplus(u))
            }
            DistributionId::GenGamma => {
                let (a, u, lnu, lambda) = gengamma_parts(params, t);
                let sigma = params[1];
                let base = lambda.abs().ln() - sigma.ln() - t.ln();
                if a > 100.0 {
                    // direct a ln(u) - u - lnGamma(a) cancels catastrophically
                    // as lambda -> 0 (a = lambda^-2)
                    let z = lambda * (t.ln() - params[0]) / sigma;
                    Ok(base + ln_gamma_density_core(a, z))
                } else {
                    Ok(base + a * lnu - u - ln_gamma(a))
                }
            }
            DistributionId::GenF | DistributionId::GenFOrig => {
                let gf = genf_parts(*self, params, t);
                let sigma = params[1];
                let base = gf.delta.ln() - t.ln() - sigma.ln();
                if gf.m1.min(gf.m2) >= 150.0 {
                    // both shapes large (p -> 0): route through the stable
                    // beta log-density at x = sigmoid(-r)
                    let x = sigmoid(-gf.r);
                    let xc = sigmoid(gf.r);
                    Ok(base + ln_beta_density(gf.m2, gf.m1, x, xc)
                        - softplus(gf.r)
                        - softplus(-gf.r))
                } else if gf.r > 0.0 {
                    // m1 r - (m1+m2) softplus(r) rewritten to avoid the
                    // cancellation when m1 is huge and r moderate
                    Ok(base - ln_beta(gf.m1, gf.m2)
                        - gf.m2 * gf.r
                        - (gf.m1 + gf.m2) * softplus(-gf.r))
                } else {
                    Ok(base - ln_beta(gf.m1, gf.m2) + gf.m1 * gf.r
                        - (gf.m1 + gf.m2) * softplus(gf.r))
                }
            }
        }
    }

    /// f(t).
    pub fn density(&self, params: &[f64], t: f64) -> Result<f64> {
        Ok(self.log_density(params, t)?.exp())
    }

    /// F(t) = 1 - S(t), computed on the complementary path where one exists.
    pub fn cdf(&self, params: &[f64], t: f64) -> Result<f64> {
        self.validate(params, t)?;
        match self {
            DistributionId::Exp | DistributionId::Weibull | DistributionId::Gompertz => {
                Ok(-f64::exp_m1(self.log_survival_unchecked(params, t)?))
            }
            DistributionId::Gamma => {
                let (a, x) = gamma_shape_x(params, t);
                Ok(inc_gamma_pair(a, x)?.0)
            }
            DistributionId::Lnorm => {
                let w = (t.ln() - params[0]) / params[1];
                Ok(normal_cdf(w))
            }
            DistributionId::Llogis => {
                let u = std::f64::consts::SQRT_2 / params[1] * (t.ln() - params[0]);
                Ok(sigmoid(u))
            }
            DistributionId::GenGamma => {
                let (a, u, _lnu, lambda) = gengamma_parts(params, t);
                let (pv, qv) = inc_gamma_pair(a, u)?;
                if lambda > 0.0 {
                    Ok(pv)
                } else {
                    Ok(qv)
                }
            }
            DistributionId::GenF | DistributionId::GenFOrig => {
                let gf = genf_parts(*self, params, t);
                if gf.r > 0.0 {
                    Ok(1.0 - reg_inc_beta(sigmoid(-gf.r), gf.m2, gf.m1)?)
                } else {
                    reg_inc_beta(sigmoid(gf.r), gf.m1, gf.m2)
                }
            }
        }
    }

    /// h(t) = f(t)/S(t).
    pub fn hazard(&self, params: &[f64], t: f64) -> Result<f64> {
        let log_s = self.log_survival(params, t)?;
        if log_s < SURVIVAL_UNDERFLOW_LOG {
            return Err(Error::Domain(format!(
                "{} survival underflows to 0 at time {t}; hazard overflows",
                self.name()
            )));
        }
        let log_f = self.log_density(params, t)?;
        Ok((log_f - log_s).exp())
    }
}

/// ln(1e-300): survival below this is treated as an underflow to 0.
pub const SURVIVAL_UNDERFLOW_LOG: f64 = -690.77552789821371;

fn gamma_shape_x(params: &[f64], t: f64) -> (f64, f64) {
    let sigma = params[1];
    let a = 1.0 / (sigma * sigma);
    let ln_b = 2.0 * sigma.ln() + params[0];
    let x = (t.ln() - ln_b).exp();
    (a, x)
}

/// (e^{nu t} - 1)/nu without cancellation near nu = 0.
fn gompertz_cumulative(nu: f64, t: f64) -> f64 {
    f64::exp_m1(nu * t) / nu
}

fn gengamma_parts(params: &[f64], t: f64) -> (f64, f64, f64, f64) {
    let (beta, sigma, lambda) = (params[0], params[1], params[2]);
    let a = 1.0 / (lambda * lambda);
    let w = (t.ln() - beta) / sigma;
    let lnu = lambda * w - 2.0 * lambda.abs().ln();
    (a, lnu.exp(), lnu, lambda)
}

struct GenFParts {
    m1: f64,
    m2: f64,
    delta: f64,
    /// r = ln(m1/m2) + delta*(ln t - beta)/sigma; S = sigmoid(-r) fed to the
    /// incomplete beta.
    r: f64,
}

fn genf_parts(id: DistributionId, params: &[f64], t: f64) -> GenFParts {
    let (beta, sigma) = (params[0], params[1]);
    let (m1, m2, delta) = match id {
        DistributionId::GenF => {
            let (q, pp) = (params[2], params[3]);
            let delta = (q * q + 2.0 * pp).sqrt();
            // delta -/+ q without cancellation for |q| >> p
            let (dpq, dmq) = if q >= 0.0 {
                let dpq = delta + q;
                (dpq, 2.0 * pp / dpq)
            } else {
                let dmq = delta - q;
                (2.0 * pp / dmq, dmq)
            };
            (2.0 / (delta * dpq), 2.0 / (delta * dmq), delta)
        }
        DistributionId::GenFOrig => {
            let (m1, m2) = (params[2], params[3]);
            (m1, m2, (1.0 / m1 + 1.0 / m2).sqrt())
        }
        _ => unreachable!(),
    };
    let w = delta * (t.ln() - beta) / sigma;
    GenFParts {
        m1,
        m2,
        delta,
        r: m1.ln() - m2.ln() + w,
    }
}

/// ln(1 + e^x), overflow-safe.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + f64::ln_1p((-x).exp())
    } else {
        f64::ln_1p(x.exp())
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Prentice mapping from the original (m1, m2) generalized-F parameters to
/// (q, p).
pub fn genf_orig_to_qp(m1: f64, m2: f64) -> (f64, f64) {
    let q = (1.0 / m1 - 1.0 / m2) / (1.0 / m1 + 1.0 / m2).sqrt();
    let p = 2.0 / (m1 + m2);
    (q, p)
}

/// A distribution family: one of the built-ins or a user-defined kernel.
#[derive(Debug, Clone)]
pub enum Family {
    BuiltIn(DistributionId),
    Custom(Arc<CustomKernel>),
}

impl Family {
    pub fn name(&self) -> String {
        match self {
            Family::BuiltIn(id) => id.name().to_string(),
            Family::Custom(_) => "custom".to_string(),
        }
    }

    /// Ordered parameter names and constraint classes; the location comes
    /// first.
    pub fn param_specs(&self) -> Vec<(String, Constraint)> {
        match self {
            Family::BuiltIn(id) => id
                .params()
                .iter()
                .map(|s| (s.name.to_string(), s.constraint))
                .collect(),
            Family::Custom(k) => k.dist.parameters.clone(),
        }
    }

    pub fn location(&self) -> String {
        match self {
            Family::BuiltIn(_) => "beta".to_string(),
            Family::Custom(k) => k.dist.location.clone(),
        }
    }

    pub fn log_survival(&self, params: &[f64], t: f64) -> Result<f64> {
        match self {
            Family::BuiltIn(id) => id.log_survival(params, t),
            Family::Custom(k) => k.log_survival(params, t),
        }
    }

    pub fn survival(&self, params: &[f64], t: f64) -> Result<f64> {
        match self {
            Family::BuiltIn(id) => id.survival(params, t),
            Family::Custom(k) => k.survival(params, t),
        }
    }

    pub fn log_density(&self, params: &[f64], t: f64) -> Result<f64> {
        match self {
            Family::BuiltIn(id) => id.log_density(params, t),
            Family::Custom(k) => k.log_density(params, t),
        }
    }

    pub fn density(&self, params: &[f64], t: f64) -> Result<f64> {
        match self {
            Family::BuiltIn(id) => id.density(params, t),
            Family::Custom(k) => k.density(params, t),
        }
    }

    pub fn cdf(&self, params: &[f64], t: f64) -> Result<f64> {
        match self {
            Family::BuiltIn(id) => id.cdf(params, t),
            Family::Custom(k) => k.cdf(params, t),
        }
    }

    pub fn hazard(&self, params: &[f64], t: f64) -> Result<f64> {
        match self {
            Family::BuiltIn(id) => id.hazard(params, t),
            Family::Custom(k) => k.hazard(params, t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [DistributionId; 9] = [
        DistributionId::Exp,
        DistributionId::Weibull,
        DistributionId::Gamma,
        DistributionId::Lnorm,
        DistributionId::Gompertz,
        DistributionId::Llogis,
        DistributionId::GenGamma,
        DistributionId::GenF,
        DistributionId::GenFOrig,
    ];

    fn moderate_params(id: DistributionId) -> Vec<f64> {
        match id {
            DistributionId::Exp => vec![0.3],
            DistributionId::Weibull => vec![0.2, 0.8],
            DistributionId::Gamma => vec![0.1, 1.2],
            DistributionId::Lnorm => vec![0.0, 0.9],
            DistributionId::Gompertz => vec![0.5, 0.4],
            DistributionId::Llogis => vec![0.3, 1.1],
            DistributionId::GenGamma => vec![0.2, 0.9, 0.7],
            DistributionId::GenF => vec![0.1, 1.0, 0.4, 0.8],
            DistributionId::GenFOrig => vec![0.1, 1.0, 1.5, 2.5],
        }
    }

    #[test]
    fn exponential_closed_forms() {
        let s = DistributionId::Exp.survival(&[0.0], 1.0).unwrap();
        assert!((s - (-1.0_f64).exp()).abs() < 1e-14);
        let f = DistributionId::Exp.density(&[0.0], 1.0).unwrap();
        assert!((f - (-1.0_f64).exp()).abs() < 1e-14);
        for &t in &[0.1, 1.0, 7.0] {
            let h = DistributionId::Exp.hazard(&[0.0], t).unwrap();
            assert!((h - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weibull_closed_forms() {
        // (gamma t)^{1/sigma} = 1 at t = 1, beta = 0
        let s = DistributionId::Weibull.survival(&[0.0, 0.5], 1.0).unwrap();
        assert!((s - (-1.0_f64).exp()).abs() < 1e-14);
        // h(t) = (1/sigma) t^{1/sigma - 1} at beta = 0: sigma=0.5, t=2 -> 4
        let h = DistributionId::Weibull.hazard(&[0.0, 0.5], 2.0).unwrap();
        assert!((h - 4.0).abs() < 1e-10);
    }

    #[test]
    fn llogis_median_at_exp_beta() {
        for &beta in &[-0.4, 0.0, 1.3] {
            let s = DistributionId::Llogis
                .survival(&[beta, 0.7], beta.exp())
                .unwrap();
            assert!((s - 0.5).abs() < 1e-12, "beta={beta}");
        }
    }

    #[test]
    fn gompertz_closed_forms() {
        let s = DistributionId::Gompertz.survival(&[0.0, 1.0], 1.0).unwrap();
        let want = (-(std::f64::consts::E - 1.0)).exp();
        assert!((s - want).abs() < 1e-12);
        assert!((s - 0.17937407873401723).abs() < 1e-10);
        // h(t) = gamma e^{nu t}
        let h = DistributionId::Gompertz.hazard(&[0.0, 1.0], 0.5).unwrap();
        assert!((h - 0.5_f64.exp()).abs() < 1e-10);
        // negative nu is a legal (defective) Gompertz
        let s = DistributionId::Gompertz.survival(&[0.0, -0.5], 2.0).unwrap();
        assert!(s > 0.0 && s < 1.0);
    }

    #[test]
    fn gengamma_lambda_one_is_weibull() {
        for &t in &[0.05, 0.5, 1.0, 3.0, 20.0] {
            let gg = DistributionId::GenGamma
                .survival(&[0.2, 0.8, 1.0], t)
                .unwrap();
            let wb = DistributionId::Weibull.survival(&[0.2, 0.8], t).unwrap();
            assert!((gg - wb).abs() < 1e-12, "t={t}");
            let gg = DistributionId::GenGamma.density(&[0.2, 0.8, 1.0], t).unwrap();
            let wb = DistributionId::Weibull.density(&[0.2, 0.8], t).unwrap();
            assert!((gg - wb).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn gengamma_sigma_equal_lambda_is_gamma() {
        for &t in &[0.1, 0.9, 2.5, 8.0] {
            let gg = DistributionId::GenGamma
                .survival(&[0.3, 0.6, 0.6], t)
                .unwrap();
            let gm = DistributionId::Gamma.survival(&[0.3, 0.6], t).unwrap();
            assert!((gg - gm).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn genf_q0_p1_is_llogis() {
        for &t in &[0.2, 1.0, 2.0, 10.0] {
            let gf = DistributionId::GenF
                .survival(&[0.3, 1.2, 0.0, 1.0], t)
                .unwrap();
            let ll = DistributionId::Llogis.survival(&[0.3, 1.2], t).unwrap();
            assert!((gf - ll).abs() < 1e-12, "t={t}");
            let gf = DistributionId::GenF.density(&[0.3, 1.2, 0.0, 1.0], t).unwrap();
            let ll = DistributionId::Llogis.density(&[0.3, 1.2], t).unwrap();
            assert!((gf - ll).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn genf_orig_matches_prentice_mapping() {
        let (m1, m2) = (1.7, 0.6);
        let (q, pp) = genf_orig_to_qp(m1, m2);
        for &t in &[0.3, 1.0, 4.0] {
            let orig = DistributionId::GenFOrig
                .survival(&[0.1, 0.9, m1, m2], t)
                .unwrap();
            let reparam = DistributionId::GenF
                .survival(&[0.1, 0.9, q, pp], t)
                .unwrap();
            assert!((orig - reparam).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn gengamma_is_continuous_at_lambda_zero() {
        // lambda -> 0 approaches the log-normal from both sides
        for &t in &[0.3, 1.0, 2.7] {
            let ln = DistributionId::Lnorm.survival(&[0.4, 1.1], t).unwrap();
            let up = DistributionId::GenGamma
                .survival(&[0.4, 1.1, 1e-4], t)
                .unwrap();
            let dn = DistributionId::GenGamma
                .survival(&[0.4, 1.1, -1e-4], t)
                .unwrap();
            assert!((up - ln).abs() < 1e-3, "t={t} up={up} ln={ln}");
            assert!((dn - ln).abs() < 1e-3, "t={t} dn={dn} ln={ln}");
        }
    }

    #[test]
    fn density_is_negative_survival_slope() {
        // central differences on a log-spaced grid
        for id in ALL {
            let params = moderate_params(id);
            for i in 0..13 {
                let t = 10f64.powf(-3.0 + 0.5 * i as f64);
                let h = 6e-6 * t;
                let s_plus = id.survival(&params, t + h).unwrap();
                let s_minus = id.survival(&params, t - h).unwrap();
                let slope = -(s_plus - s_minus) / (2.0 * h);
                let f = id.density(&params, t).unwrap();
                let tol = 1e-6 * f.max(1.0);
                assert!(
                    (f - slope).abs() < tol,
                    "{} t={t}: f={f} -dS/dt={slope}",
                    id.name()
                );
            }
        }
    }

    #[test]
    fn survival_bounds_and_monotonicity() {
        for id in ALL {
            let params = moderate_params(id);
            let mut prev = 1.0;
            for i in 0..60 {
                let t = 10f64.powf(-2.0 + i as f64 * 0.08);
                let s = id.survival(&params, t).unwrap();
                assert!((0.0..=1.0).contains(&s), "{} t={t} s={s}", id.name());
                assert!(s <= prev + 1e-12, "{} not monotone at t={t}", id.name());
                let f = id.density(&params, t).unwrap();
                assert!(f >= 0.0);
                let c = id.cdf(&params, t).unwrap();
                assert!((s + c - 1.0).abs() < 1e-9, "{} t={t}", id.name());
                prev = s;
            }
        }
    }

    #[test]
    fn constraint_violations_rejected() {
        assert!(DistributionId::Weibull.survival(&[0.0, -1.0], 1.0).is_err());
        assert!(DistributionId::Weibull.survival(&[0.0, 0.0], 1.0).is_err());
        assert!(DistributionId::GenGamma.survival(&[0.0, 1.0, 0.0], 1.0).is_err());
        assert!(DistributionId::Gompertz.survival(&[0.0, 0.0], 1.0).is_err());
        assert!(DistributionId::GenF.survival(&[0.0, 1.0, 0.0, -1.0], 1.0).is_err());
        assert!(DistributionId::Exp.survival(&[f64::NAN], 1.0).is_err());
        assert!(DistributionId::Exp.survival(&[0.0], 0.0).is_err());
        assert!(DistributionId::Exp.survival(&[0.0], -2.0).is_err());
    }

    #[test]
    fn hazard_overflow_reported() {
        // Weibull deep in the tail: S underflows to exactly 0
        let err = DistributionId::Weibull.hazard(&[0.0, 0.05], 50.0).unwrap_err();
        assert!(err.to_string().contains("underflows"));
    }
}
