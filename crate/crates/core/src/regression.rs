//! Ordinary least squares with heteroskedasticity-consistent covariance.
//!
//! `V = (X'X)⁻¹ X' diag(e²) X (X'X)⁻¹`, times `T/(T-k)` for HC1.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg::mean;

const SINGULAR_CONDITION: f64 = 1e15;
const WARN_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum HcType {
    HC0,
    #[default]
    HC1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub robust_cov: DMatrix<f64>,
    pub standard_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r2: f64,
    pub n_obs: usize,
    pub hc: HcType,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl OlsFit {
    pub fn df_resid(&self) -> usize {
        self.n_obs - self.coefficients.len()
    }
}

/// Stacks a column of ones followed by `regressors` into a design matrix.
pub fn design_with_intercept(regressors: &[&[f64]]) -> Result<DMatrix<f64>> {
    let n = regressors.first().map_or(0, |c| c.len());
    if regressors.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("regressors differ in length".into()));
    }
    Ok(DMatrix::from_fn(n, regressors.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            regressors[j - 1][i]
        }
    }))
}

/// Condition number of `X'X` after scaling its columns to unit diagonal.
fn equilibrated_condition(xtx: &DMatrix<f64>) -> f64 {
    let k = xtx.nrows();
    let d: Vec<f64> = (0..k).map(|i| xtx[(i, i)].sqrt()).collect();
    if d.iter().any(|v| !(*v > 0.0)) {
        return f64::INFINITY;
    }
    let scaled = DMatrix::from_fn(k, k, |i, j| xtx[(i, j)] / (d[i] * d[j]));
    let eig = scaled.symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn ols_hc(x: &DMatrix<f64>, y: &[f64], hc: HcType) -> Result<OlsFit> {
    let (t, k) = x.shape();
    if y.len() != t {
        return Err(Error::Dimension(format!(
            "design has {t} rows but y has {} entries",
            y.len()
        )));
    }
    if k == 0 {
        return Err(Error::Dimension("design has no columns".into()));
    }
    if t <= k {
        return Err(Error::InsufficientObservations { needed: k, have: t });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "non-finite entry in regression data".into(),
        ));
    }

    let xtx = x.transpose() * x;
    let cond = equilibrated_condition(&xtx);
    if cond > SINGULAR_CONDITION {
        return Err(Error::SingularDesign(format!(
            "design is rank deficient (condition number {cond:.3e})"
        )));
    }
    if cond > WARN_CONDITION {
        log::warn!("ill-conditioned design: condition number {cond:.3e}");
    }

    let qr = x.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let yv = DVector::from_column_slice(y);
    let qty = q.transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign("triangular solve failed".into()))?;
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::SingularDesign("R factor not invertible".into()))?;
    let bread = &r_inv * r_inv.transpose();

    let fitted_v = x * &beta;
    let fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();

    let mut meat = DMatrix::<f64>::zeros(k, k);
    for (i, e) in residuals.iter().enumerate() {
        let w = e * e;
        if w == 0.0 {
            continue;
        }
        for a in 0..k {
            let xa = x[(i, a)] * w;
            for b in 0..k {
                meat[(a, b)] += xa * x[(i, b)];
            }
        }
    }
    let mut cov = &bread * meat * &bread;
    if hc == HcType::HC1 {
        cov *= t as f64 / (t - k) as f64;
    }
    let cov = (&cov + cov.transpose()) * 0.5;

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let standard_errors: Vec<f64> = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let t_stats: Vec<f64> = coefficients
        .iter()
        .zip(&standard_errors)
        .map(|(b, s)| b / s)
        .collect();
    let dist = StudentsT::new(0.0, 1.0, (t - k) as f64)
        .map_err(|e| Error::InvalidParameter(format!("t distribution: {e}")))?;
    let p_values = t_stats
        .iter()
        .map(|ts| {
            if ts.is_nan() {
                f64::NAN
            } else {
                (2.0 * (1.0 - dist.cdf(ts.abs()))).clamp(0.0, 1.0)
            }
        })
        .collect();

    let ybar = mean(y);
    let tss: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };

    Ok(OlsFit {
        coefficients,
        robust_cov: cov,
        standard_errors,
        t_stats,
        p_values,
        r2,
        n_obs: t,
        hc,
        fitted,
        residuals,
    })
}
