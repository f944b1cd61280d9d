//! Central finite differences for gradients and Hessians.
//!
//! Gradient steps follow h = eps^(1/3) * max(1, |x|); Hessian steps use
//! eps^(1/4) * max(1, |x|), where the larger step keeps second-difference
//! roundoff (~4 eps |f| / h^2) below the 1e-6 accuracy the tests demand.
//! When an objective cannot be evaluated on one side of a point (a
//! constraint boundary), the gradient falls back to a one-sided difference.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// eps^(1/3)
const CBRT_EPS: f64 = 6.055454452393343e-6;
/// eps^(1/4)
const QRT_EPS: f64 = 1.220703125e-4;

pub fn grad_step(x: f64) -> f64 {
    CBRT_EPS * x.abs().max(1.0)
}

pub fn hess_step(x: f64) -> f64 {
    QRT_EPS * x.abs().max(1.0)
}

/// Central-difference gradient with one-sided fallback at evaluation
/// failures.
pub fn central_gradient<F>(mut f: F, x: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let k = x.len();
    let mut grad = vec![0.0; k];
    let mut work = x.to_vec();
    let mut f0: Option<f64> = None;
    for j in 0..k {
        let h = grad_step(x[j]);
        work[j] = x[j] + h;
        let plus = f(&work);
        work[j] = x[j] - h;
        let minus = f(&work);
        work[j] = x[j];
        grad[j] = match (plus, minus) {
            (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
            (Ok(a), Err(_)) => {
                let base = cached_f0(&mut f, x, &mut f0)?;
                (a - base) / h
            }
            (Err(_), Ok(b)) => {
                let base = cached_f0(&mut f, x, &mut f0)?;
                (base - b) / h
            }
            (Err(e), Err(_)) => return Err(e),
        };
        if !grad[j].is_finite() {
            return Err(Error::Likelihood(format!(
                "non-finite finite-difference gradient in coordinate {j}"
            )));
        }
    }
    Ok(grad)
}

fn cached_f0<F>(f: &mut F, x: &[f64], cache: &mut Option<f64>) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if let Some(v) = cache {
        return Ok(*v);
    }
    let v = f(x)?;
    *cache = Some(v);
    Ok(v)
}

/// Central-difference Hessian (symmetric by construction).
pub fn central_hessian<F>(mut f: F, x: &[f64]) -> Result<Matrix>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let k = x.len();
    let mut hess = Matrix::zeros(k, k);
    let f0 = f(x)?;
    let mut work = x.to_vec();
    for i in 0..k {
        let hi = hess_step(x[i]);
        work[i] = x[i] + hi;
        let fp = f(&work)?;
        work[i] = x[i] - hi;
        let fm = f(&work)?;
        work[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in (i + 1)..k {
            let hj = hess_step(x[j]);
            work[i] = x[i] + hi;
            work[j] = x[j] + hj;
            let fpp = f(&work)?;
            work[j] = x[j] - hj;
            let fpm = f(&work)?;
            work[i] = x[i] - hi;
            let fmm = f(&work)?;
            work[j] = x[j] + hj;
            let fmp = f(&work)?;
            work[i] = x[i];
            work[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    if !hess.is_finite() {
        return Err(Error::Likelihood(
            "non-finite finite-difference Hessian".to_string(),
        ));
    }
    Ok(hess)
}
