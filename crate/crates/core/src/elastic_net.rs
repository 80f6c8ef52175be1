//! Elastic-net least squares by cyclical coordinate descent.
//!
//! Minimizes, over an intercept `α` and coefficients `β`,
//!
//! ```text
//! ||y - α - Xβ||² + λη ||β||₁ + λ(1-η) ||β||²
//! ```
//!
//! with the residual sum of squares left unscaled (no `1/(2T)` factor). The
//! intercept is unpenalized unless [`FitOptions::penalize_intercept`] is set,
//! in which case `λη|α| + λ(1-η)α²` is added as well.
//!
//! With `standardize` the columns are centered (when an intercept is fitted)
//! and scaled to unit standard deviation before solving; the penalty then
//! acts on the standardized coefficients and the reported coefficients are
//! mapped back to the original column scale.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, mean};

/// Overall penalty `λ` and L1 share `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda: f64,
    pub eta: f64,
}

impl PenaltySpec {
    pub fn new(lambda: f64, eta: f64) -> Result<Self> {
        let p = PenaltySpec { lambda, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!(
                "eta must lie in [0, 1], got {}",
                self.eta
            )));
        }
        Ok(())
    }

    #[inline]
    fn l1(&self) -> f64 {
        self.lambda * self.eta
    }

    #[inline]
    fn l2(&self) -> f64 {
        self.lambda * (1.0 - self.eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub fit_intercept: bool,
    pub standardize: bool,
    /// Apply the penalty to the intercept too.
    pub penalize_intercept: bool,
    /// Stop once the largest coefficient update of a full sweep falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            fit_intercept: true,
            standardize: true,
            penalize_intercept: false,
            tol: 1e-8,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub penalty: PenaltySpec,
    pub in_sample_r2: f64,
    pub n_iter: usize,
    pub converged: bool,
}

impl ElasticNetFit {
    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn n_nonzero(&self) -> usize {
        self.coefficients.iter().filter(|b| **b != 0.0).count()
    }
}

/// `sign(z) * max(|z| - gamma, 0)`
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

const EXTRAPOLATION_DEPTH: usize = 10;

/// Columns and target transformed onto the scale the solver works on.
///
/// Built once per `(X, y, options)` and shared by every penalty on a path.
pub(crate) struct Prepared {
    n_rows: usize,
    n_features: usize,
    /// Column-major working columns; a trailing column of ones when the
    /// intercept is a penalized coordinate.
    cols: Vec<f64>,
    norms: Vec<f64>,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y: Vec<f64>,
    y_mean: f64,
    intercept_coord: bool,
    centered: bool,
}

impl Prepared {
    pub(crate) fn new(x: &DMatrix<f64>, y: &[f64], opts: &FitOptions) -> Result<Self> {
        let (n_rows, n_features) = x.shape();
        if y.len() != n_rows {
            return Err(Error::Dimension(format!(
                "X has {n_rows} rows but y has {} entries",
                y.len()
            )));
        }
        if n_rows < 2 {
            return Err(Error::InsufficientObservations {
                needed: 1,
                have: n_rows,
            });
        }
        if n_features == 0 {
            return Err(Error::Dimension("X has no columns".into()));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite entry in X or y".into()));
        }
        if !(opts.tol > 0.0) || opts.max_sweeps == 0 {
            return Err(Error::InvalidParameter(
                "tolerance must be > 0 and max_sweeps >= 1".into(),
            ));
        }

        let centered = opts.fit_intercept && !opts.penalize_intercept;
        let intercept_coord = opts.fit_intercept && opts.penalize_intercept;
        let n = n_rows as f64;

        let mut cols = Vec::with_capacity(n_rows * (n_features + intercept_coord as usize));
        let mut x_mean = vec![0.0; n_features];
        let mut x_scale = vec![1.0; n_features];
        for j in 0..n_features {
            let col = x.column(j);
            let m = if centered {
                col.iter().sum::<f64>() / n
            } else {
                0.0
            };
            x_mean[j] = m;
            if opts.standardize {
                // centred: standard deviation; uncentred: root mean square
                let ss = if opts.fit_intercept {
                    let mu = col.iter().sum::<f64>() / n;
                    col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>()
                } else {
                    col.iter().map(|v| v * v).sum::<f64>()
                };
                let s = (ss / n).sqrt();
                x_scale[j] = if s > 0.0 { s } else { 0.0 };
            }
            let s = x_scale[j];
            if s == 0.0 {
                cols.extend(std::iter::repeat_n(0.0, n_rows));
            } else {
                cols.extend(col.iter().map(|v| (v - m) / s));
            }
        }
        if intercept_coord {
            cols.extend(std::iter::repeat_n(1.0, n_rows));
        }

        let y_mean = if centered { mean(y) } else { 0.0 };
        let y_work: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let n_coords = n_features + intercept_coord as usize;
        let norms = (0..n_coords)
            .map(|j| {
                let c = &cols[j * n_rows..(j + 1) * n_rows];
                dot(c, c)
            })
            .collect();

        Ok(Prepared {
            n_rows,
            n_features,
            cols,
            norms,
            x_mean,
            x_scale,
            y: y_work,
            y_mean,
            intercept_coord,
            centered,
        })
    }

    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n_rows..(j + 1) * self.n_rows]
    }

    fn n_coords(&self) -> usize {
        self.norms.len()
    }

    /// Internal coordinates of an original-scale fit.
    fn to_internal(&self, fit: &ElasticNetFit) -> Vec<f64> {
        let mut b: Vec<f64> = fit
            .coefficients
            .iter()
            .zip(&self.x_scale)
            .map(|(beta, s)| beta * s)
            .collect();
        if self.intercept_coord {
            b.push(fit.intercept);
        }
        b
    }

    fn residual(&self, b: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        for (j, bj) in b.iter().enumerate() {
            if *bj != 0.0 {
                axpy(-bj, self.col(j), &mut r);
            }
        }
        r
    }

    fn objective(&self, r: &[f64], b: &[f64], penalty: &PenaltySpec) -> f64 {
        let rss = dot(r, r);
        let (mut l1, mut l2) = (0.0, 0.0);
        // every working coordinate is penalized; an unpenalized intercept
        // has already been profiled out by centering
        for bj in b {
            l1 += bj.abs();
            l2 += bj * bj;
        }
        rss + penalty.l1() * l1 + penalty.l2() * l2
    }

    /// One coordinate update; returns the absolute change.
    #[inline]
    fn update(&self, j: usize, b: &mut [f64], r: &mut [f64], half_l1: f64, l2: f64) -> f64 {
        let nj = self.norms[j];
        if nj == 0.0 {
            return 0.0;
        }
        let col = self.col(j);
        let old = b[j];
        let rho = dot(col, r) + nj * old;
        let new = soft_threshold(rho, half_l1) / (nj + l2);
        let delta = new - old;
        if delta != 0.0 {
            axpy(-delta, col, r);
            b[j] = new;
        }
        delta.abs()
    }

    /// Cyclic coordinate descent from `b`, alternating full sweeps with
    /// sweeps restricted to the current nonzero set. Converged means a full
    /// sweep moved no coordinate by `tol` or more.
    fn solve(
        &self,
        penalty: &PenaltySpec,
        b: &mut [f64],
        opts: &FitOptions,
        mut trace: Option<&mut Vec<f64>>,
    ) -> (usize, bool) {
        let half_l1 = 0.5 * penalty.l1();
        let l2 = penalty.l2();
        let mut r = self.residual(b);
        let mut sweeps = 0usize;
        let mut active: Vec<usize> = Vec::with_capacity(self.n_coords());
        if let Some(t) = trace.as_deref_mut() {
            t.push(self.objective(&r, b, penalty));
        }
        loop {
            let mut max_delta = 0.0f64;
            for j in 0..self.n_coords() {
                max_delta = max_delta.max(self.update(j, b, &mut r, half_l1, l2));
            }
            sweeps += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.objective(&r, b, penalty));
            }
            if max_delta < opts.tol {
                return (sweeps, true);
            }
            if sweeps >= opts.max_sweeps {
                return (sweeps, false);
            }
            active.clear();
            active.extend((0..self.n_coords()).filter(|&j| b[j] != 0.0));
            let mut history: Vec<Vec<f64>> = Vec::with_capacity(EXTRAPOLATION_DEPTH + 1);
            loop {
                let mut max_delta = 0.0f64;
                for &j in &active {
                    max_delta = max_delta.max(self.update(j, b, &mut r, half_l1, l2));
                }
                sweeps += 1;
                if max_delta >= opts.tol {
                    history.push(active.iter().map(|&j| b[j]).collect());
                    if history.len() == EXTRAPOLATION_DEPTH + 1 {
                        self.try_extrapolate(&active, &history, b, &mut r, penalty);
                        history.clear();
                    }
                }
                if let Some(t) = trace.as_deref_mut() {
                    t.push(self.objective(&r, b, penalty));
                }
                if max_delta < opts.tol {
                    break;
                }
                if sweeps >= opts.max_sweeps {
                    return (sweeps, false);
                }
            }
        }
    }

    /// Anderson extrapolation over the last few active-set iterates. The
    /// extrapolated point replaces `b` only if it lowers the objective.
    fn try_extrapolate(
        &self,
        active: &[usize],
        history: &[Vec<f64>],
        b: &mut [f64],
        r: &mut Vec<f64>,
        penalty: &PenaltySpec,
    ) {
        let k = history.len() - 1;
        let diffs: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                history[i + 1]
                    .iter()
                    .zip(&history[i])
                    .map(|(a, c)| a - c)
                    .collect()
            })
            .collect();
        let mut gram = DMatrix::<f64>::from_fn(k, k, |i, j| dot(&diffs[i], &diffs[j]));
        let scale = gram.trace();
        if !(scale > 0.0) || !scale.is_finite() {
            return;
        }
        for i in 0..k {
            gram[(i, i)] += 1e-10 * scale;
        }
        let Some(z) = gram.lu().solve(&nalgebra::DVector::from_element(k, 1.0)) else {
            return;
        };
        let total: f64 = z.iter().sum();
        if !(total.abs() > 0.0) || !total.is_finite() {
            return;
        }
        let mut cand = b.to_vec();
        for (pos, &j) in active.iter().enumerate() {
            cand[j] = (0..k).map(|i| z[i] / total * history[i + 1][pos]).sum();
        }
        let cand_r = self.residual(&cand);
        if self.objective(&cand_r, &cand, penalty) < self.objective(r, b, penalty) {
            b.copy_from_slice(&cand);
            *r = cand_r;
        }
    }

    fn finish(
        &self,
        x: &DMatrix<f64>,
        y: &[f64],
        b: &[f64],
        penalty: PenaltySpec,
        sweeps: usize,
        converged: bool,
    ) -> ElasticNetFit {
        let coefficients: Vec<f64> = (0..self.n_features)
            .map(|j| {
                let s = self.x_scale[j];
                if s == 0.0 {
                    0.0
                } else {
                    b[j] / s
                }
            })
            .collect();
        let intercept = if self.centered {
            self.y_mean
                - coefficients
                    .iter()
                    .zip(&self.x_mean)
                    .map(|(c, m)| c * m)
                    .sum::<f64>()
        } else if self.intercept_coord {
            b[self.n_features]
        } else {
            0.0
        };
        let mut fit = ElasticNetFit {
            intercept,
            coefficients,
            penalty,
            in_sample_r2: 0.0,
            n_iter: sweeps,
            converged,
        };
        let fitted = predict_unchecked(&fit, x);
        fit.in_sample_r2 = r_squared(y, &fitted);
        fit
    }
}

/// `1 - RSS/TSS` around the sample mean; zero when `y` has no variation.
pub fn r_squared(y: &[f64], fitted: &[f64]) -> f64 {
    let m = mean(y);
    let tss: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if tss == 0.0 {
        return 0.0;
    }
    let rss: f64 = y.iter().zip(fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - rss / tss
}

fn check_degenerate(y: &[f64], penalty: &PenaltySpec, opts: &FitOptions) -> Result<()> {
    if !opts.fit_intercept && penalty.lambda == 0.0 {
        let m = mean(y);
        if y.iter().all(|v| *v == m) {
            return Err(Error::DegenerateFit(
                "target has zero variance with lambda = 0 and no intercept".into(),
            ));
        }
    }
    Ok(())
}

/// Fits one elastic net from a cold start.
pub fn fit(
    x: &DMatrix<f64>,
    y: &[f64],
    penalty: PenaltySpec,
    opts: &FitOptions,
) -> Result<ElasticNetFit> {
    penalty.validate()?;
    check_degenerate(y, &penalty, opts)?;
    let prep = Prepared::new(x, y, opts)?;
    let mut b = vec![0.0; prep.n_coords()];
    let (sweeps, converged) = prep.solve(&penalty, &mut b, opts, None);
    Ok(prep.finish(x, y, &b, penalty, sweeps, converged))
}

/// Like [`fit`], also returning the objective after every sweep (the first
/// entry is the objective at the starting point).
pub fn fit_traced(
    x: &DMatrix<f64>,
    y: &[f64],
    penalty: PenaltySpec,
    opts: &FitOptions,
) -> Result<(ElasticNetFit, Vec<f64>)> {
    penalty.validate()?;
    check_degenerate(y, &penalty, opts)?;
    let prep = Prepared::new(x, y, opts)?;
    let mut b = vec![0.0; prep.n_coords()];
    let mut trace = Vec::new();
    let (sweeps, converged) = prep.solve(&penalty, &mut b, opts, Some(&mut trace));
    Ok((prep.finish(x, y, &b, penalty, sweeps, converged), trace))
}

/// Fits a sequence of penalties sharing one `η`, each warm-started from the
/// previous solution. Pass `lambdas` in descending order.
pub fn fit_path(
    x: &DMatrix<f64>,
    y: &[f64],
    eta: f64,
    lambdas: &[f64],
    opts: &FitOptions,
) -> Result<Vec<ElasticNetFit>> {
    let penalties = lambdas
        .iter()
        .map(|&lambda| PenaltySpec::new(lambda, eta))
        .collect::<Result<Vec<_>>>()?;
    for p in &penalties {
        check_degenerate(y, p, opts)?;
    }
    let prep = Prepared::new(x, y, opts)?;
    let mut b = vec![0.0; prep.n_coords()];
    let mut out = Vec::with_capacity(penalties.len());
    for p in penalties {
        let (sweeps, converged) = prep.solve(&p, &mut b, opts, None);
        if !converged {
            log::warn!(
                "elastic net did not converge after {sweeps} sweeps (lambda={}, eta={})",
                p.lambda,
                p.eta
            );
        }
        out.push(prep.finish(x, y, &b, p, sweeps, converged));
    }
    Ok(out)
}

fn predict_unchecked(fit: &ElasticNetFit, x: &DMatrix<f64>) -> Vec<f64> {
    let mut out = vec![fit.intercept; x.nrows()];
    for (j, bj) in fit.coefficients.iter().enumerate() {
        if *bj != 0.0 {
            let col = x.column(j);
            axpy(*bj, col.as_slice(), &mut out);
        }
    }
    out
}

/// `α + Xβ`.
pub fn predict(fit: &ElasticNetFit, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != fit.dim() {
        return Err(Error::Dimension(format!(
            "fit has {} coefficients but X has {} columns",
            fit.dim(),
            x.ncols()
        )));
    }
    Ok(predict_unchecked(fit, x))
}

/// Smallest `λ` at which every coefficient is exactly zero for L1 share `eta`:
/// `2 max_j |x_j'(y - ȳ)| / η` on the solver's working scale.
///
/// The returned value is nudged up by a few ulps so that fitting at exactly
/// this `λ` zeroes every coefficient despite rounding. Assumes an
/// unpenalized intercept.
pub fn lambda_max(x: &DMatrix<f64>, y: &[f64], eta: f64, opts: &FitOptions) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda_max needs eta in (0, 1], got {eta}"
        )));
    }
    let prep = Prepared::new(x, y, opts)?;
    let max = (0..prep.n_features)
        .map(|j| dot(prep.col(j), &prep.y).abs())
        .fold(0.0f64, f64::max);
    Ok(max * 2.0 / eta * (1.0 + 4.0 * f64::EPSILON))
}

/// Value of the penalized objective at `fit`, on the solver's working scale
/// (identical to the original-scale objective when `standardize` is off).
pub fn objective(
    x: &DMatrix<f64>,
    y: &[f64],
    fit: &ElasticNetFit,
    opts: &FitOptions,
) -> Result<f64> {
    let prep = Prepared::new(x, y, opts)?;
    let b = prep.to_internal(fit);
    let r = prep.residual(&b);
    Ok(prep.objective(&r, &b, &fit.penalty))
}

/// Largest violation of the stationarity conditions (halved gradient) on the
/// working scale: `|z'r - (λη/2) sign(b) - λ(1-η) b|` for nonzero
/// coordinates and `max(0, |z'r| - λη/2)` for zero ones.
pub fn kkt_violation(
    x: &DMatrix<f64>,
    y: &[f64],
    fit: &ElasticNetFit,
    opts: &FitOptions,
) -> Result<f64> {
    let prep = Prepared::new(x, y, opts)?;
    let b = prep.to_internal(fit);
    let r = prep.residual(&b);
    let half_l1 = 0.5 * fit.penalty.l1();
    let l2 = fit.penalty.l2();
    let mut worst = 0.0f64;
    for (j, bj) in b.iter().enumerate() {
        if prep.norms[j] == 0.0 {
            continue;
        }
        let g = dot(prep.col(j), &r);
        let v = if *bj != 0.0 {
            (g - half_l1 * bj.signum() - l2 * bj).abs()
        } else {
            (g.abs() - half_l1).max(0.0)
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw() -> FitOptions {
        FitOptions {
            fit_intercept: false,
            standardize: false,
            ..FitOptions::default()
        }
    }

    #[test]
    fn ols_limit_with_intercept() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let y = [2.0, 4.0, 6.0];
        let f = fit(
            &x,
            &y,
            PenaltySpec::new(0.0, 0.5).unwrap(),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(f.intercept.abs() < 1e-9);
        assert!((f.coefficients[0] - 2.0).abs() < 1e-9);
        assert!(f.converged);
        let p = predict(&f, &DMatrix::from_column_slice(1, 1, &[4.0])).unwrap();
        assert!((p[0] - 8.0).abs() < 1e-8);
    }

    #[test]
    fn orthonormal_lasso_and_ridge() {
        let x = DMatrix::<f64>::identity(2, 2);
        let y = [2.0, 0.5];
        let lasso = fit(&x, &y, PenaltySpec::new(1.0, 1.0).unwrap(), &raw()).unwrap();
        assert_eq!(lasso.coefficients, vec![1.5, 0.0]);
        let ridge = fit(&x, &y, PenaltySpec::new(1.0, 0.0).unwrap(), &raw()).unwrap();
        assert!((ridge.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((ridge.coefficients[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn lambda_max_examples() {
        let zeros = DMatrix::<f64>::zeros(4, 1);
        assert_eq!(
            lambda_max(&zeros, &[1.0, 2.0, 3.0, 5.0], 1.0, &raw()).unwrap(),
            0.0
        );
        let x = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let lm = lambda_max(&x, &[1.0, -1.0], 1.0, &raw()).unwrap();
        assert!((lm - 4.0).abs() < 1e-12);
        assert!(lambda_max(&x, &[1.0, -1.0], 0.0, &raw()).is_err());
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let e = fit(
            &x,
            &[1.0, 1.0, 1.0],
            PenaltySpec {
                lambda: 0.0,
                eta: 0.5,
            },
            &raw(),
        );
        assert!(matches!(e, Err(Error::DegenerateFit(_))));
        assert!(PenaltySpec::new(-1.0, 0.5).is_err());
        assert!(PenaltySpec::new(1.0, 1.5).is_err());
        let e = fit(
            &x,
            &[1.0, 2.0],
            PenaltySpec {
                lambda: 1.0,
                eta: 0.5,
            },
            &raw(),
        );
        assert!(matches!(e, Err(Error::Dimension(_))));
        let e = fit(
            &x,
            &[1.0, f64::NAN, 2.0],
            PenaltySpec {
                lambda: 1.0,
                eta: 0.5,
            },
            &raw(),
        );
        assert!(matches!(e, Err(Error::Validation(_))));
        let f = fit(
            &x,
            &[1.0, 2.0, 4.0],
            PenaltySpec {
                lambda: 1.0,
                eta: 0.5,
            },
            &FitOptions::default(),
        )
        .unwrap();
        assert!(predict(&f, &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn constant_target_gives_intercept_only() {
        let x = DMatrix::from_fn(6, 3, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let y = [4.0; 6];
        let f = fit(
            &x,
            &y,
            PenaltySpec::new(0.3, 0.5).unwrap(),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(f.coefficients.iter().all(|b| *b == 0.0));
        assert_eq!(f.intercept, 4.0);
        assert_eq!(f.in_sample_r2, 0.0);
    }

    #[test]
    fn max_sweeps_reports_nonconvergence() {
        let x = DMatrix::from_fn(8, 3, |i, j| ((i + 1) as f64).powi(j as i32 + 1));
        let y: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let opts = FitOptions {
            max_sweeps: 1,
            ..FitOptions::default()
        };
        let f = fit(&x, &y, PenaltySpec::new(1e-4, 0.5).unwrap(), &opts).unwrap();
        assert!(!f.converged);
        assert_eq!(f.n_iter, 1);
    }

    #[test]
    fn penalized_intercept_shrinks_alpha() {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 0.0, 1.0]);
        let y = [5.0, 5.0, 5.0, 5.0];
        let free = fit(
            &x,
            &y,
            PenaltySpec::new(2.0, 0.0).unwrap(),
            &FitOptions::default(),
        )
        .unwrap();
        assert!((free.intercept - 5.0).abs() < 1e-12);
        let opts = FitOptions {
            penalize_intercept: true,
            standardize: false,
            ..FitOptions::default()
        };
        let pen = fit(&x, &y, PenaltySpec::new(2.0, 0.0).unwrap(), &opts).unwrap();
        assert!(pen.intercept < 5.0);
    }
}
