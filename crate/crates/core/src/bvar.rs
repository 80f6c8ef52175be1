//! Bayesian VAR with exogenous regressors under a Minnesota prior.
//!
//! `y_t = c + A_1 y_{t-1} + … + A_p y_{t-p} + C_0 x_t + … + C_q x_{t-q} + ε_t`,
//! `ε_t ~ N(0, Σ)`.
//!
//! The prior is imposed with dummy observations, which keeps the posterior in
//! the conjugate normal-inverse-Wishart family, so draws are taken directly.
//! Stacked coefficient rows are ordered as: all variables at lag 1, …, all
//! variables at lag p, then each exogenous series at lags 0..=q, then the
//! intercept.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{month_of, MeetingKey};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};

pub const SPECTRAL_TOLERANCE: f64 = 1e-6;

/// Calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Validation(format!("month {month} out of range")));
        }
        Ok(Month { year, month })
    }

    pub fn of(key: MeetingKey) -> Self {
        let (year, month) = month_of(key);
        Month { year, month }
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            Month {
                year: self.year + 1,
                month: 1,
            }
        } else {
            Month {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    /// Months from `first` to `last` inclusive.
    pub fn range(first: Month, last: Month) -> Vec<Month> {
        let mut out = Vec::new();
        let mut m = first;
        while m <= last {
            out.push(m);
            m = m.next();
        }
        out
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| format!("invalid month '{s}'"))?;
        let year = y.parse().map_err(|_| format!("invalid month '{s}'"))?;
        let month: u32 = m
            .get(..2)
            .unwrap_or(m)
            .parse()
            .map_err(|_| format!("invalid month '{s}'"))?;
        Month::new(year, month).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    pub months: Vec<Month>,
    pub values: Vec<f64>,
}

/// Sums meeting-dated values within each calendar month over
/// `first..=last`; months without a meeting get 0.
pub fn aggregate_to_monthly(
    keys: &[MeetingKey],
    values: &[f64],
    span: Option<(Month, Month)>,
) -> Result<MonthlySeries> {
    if keys.len() != values.len() {
        return Err(Error::Dimension(format!(
            "{} meeting dates but {} values",
            keys.len(),
            values.len()
        )));
    }
    let mut sums: BTreeMap<Month, f64> = BTreeMap::new();
    for (k, v) in keys.iter().zip(values) {
        *sums.entry(Month::of(*k)).or_insert(0.0) += v;
    }
    let (first, last) = match span {
        Some(s) => s,
        None => match (sums.keys().next(), sums.keys().next_back()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => {
                return Ok(MonthlySeries {
                    months: Vec::new(),
                    values: Vec::new(),
                })
            }
        },
    };
    let months = Month::range(first, last);
    let values = months
        .iter()
        .map(|m| sums.get(m).copied().unwrap_or(0.0))
        .collect();
    Ok(MonthlySeries { months, values })
}

/// Monthly panel of endogenous variables (`T × n`, one column per name).
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyPanel {
    pub months: Vec<Month>,
    pub names: Vec<String>,
    pub data: DMatrix<f64>,
}

impl MonthlyPanel {
    pub fn new(months: Vec<Month>, names: Vec<String>, data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != months.len() || data.ncols() != names.len() {
            return Err(Error::Dimension(format!(
                "panel data is {}×{}, expected {}×{}",
                data.nrows(),
                data.ncols(),
                months.len(),
                names.len()
            )));
        }
        if months.windows(2).any(|w| w[1] != w[0].next()) {
            return Err(Error::Validation(
                "monthly panel must cover consecutive months".into(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(
                "non-finite value in monthly panel".into(),
            ));
        }
        Ok(MonthlyPanel {
            months,
            names,
            data,
        })
    }

    /// Rows for `first..=last`.
    pub fn slice(&self, first: Month, last: Month) -> Result<Self> {
        let a = self.months.iter().position(|m| *m == first);
        let b = self.months.iter().position(|m| *m == last);
        match (a, b) {
            (Some(a), Some(b)) if a <= b => Ok(MonthlyPanel {
                months: self.months[a..=b].to_vec(),
                names: self.names.clone(),
                data: self.data.rows(a, b - a + 1).into_owned(),
            }),
            _ => Err(Error::Alignment(format!(
                "monthly panel does not cover {first}..{last}"
            ))),
        }
    }
}

pub const MACRO_COLUMNS: [&str; 3] = ["ip_growth", "cpi_inflation", "ebp"];

/// Reads `month,<var>...` with `YYYY-MM` months and no missing cells.
pub fn load_monthly_panel(path: impl AsRef<Path>) -> Result<MonthlyPanel> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Validation(format!("{display}: {other:?}")),
        })?;
    let perr = |line: usize, message: String| Error::Parse {
        path: display.clone(),
        line,
        message,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| perr(1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.first().map(|h| h.as_str()) != Some("month") || header.len() < 2 {
        return Err(perr(
            1,
            format!("expected header 'month,<variables>', found {header:?}"),
        ));
    }
    let names = header[1..].to_vec();
    let mut months = Vec::new();
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec =
            rec.map_err(|e| perr(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(perr(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        months.push(rec[0].parse::<Month>().map_err(|m| perr(line, m))?);
        for (j, cell) in rec.iter().skip(1).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                perr(
                    line,
                    format!("column '{}': '{}' is not a number", names[j], cell),
                )
            })?;
            values.push(v);
        }
    }
    let data = DMatrix::from_row_slice(months.len(), names.len(), &values);
    MonthlyPanel::new(months, names, data)
}

pub fn write_monthly_panel(path: impl AsRef<Path>, panel: &MonthlyPanel) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    writeln!(w, "month,{}", panel.names.join(",")).map_err(io)?;
    for (i, m) in panel.months.iter().enumerate() {
        write!(w, "{m}").map_err(io)?;
        for j in 0..panel.names.len() {
            write!(w, ",{}", panel.data[(i, j)]).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarxSpec {
    pub endogenous: Vec<String>,
    pub exogenous: Vec<String>,
    pub lags: usize,
    /// Lags of the exogenous series beyond the contemporaneous term.
    #[serde(default)]
    pub exog_lags: usize,
    pub intercept: bool,
}

impl VarxSpec {
    pub fn n(&self) -> usize {
        self.endogenous.len()
    }

    pub fn m(&self) -> usize {
        self.exogenous.len()
    }

    /// Regressors per equation.
    pub fn k(&self) -> usize {
        self.n() * self.lags + self.m() * (self.exog_lags + 1) + self.intercept as usize
    }

    fn exog_row(&self, series: usize, lag: usize) -> usize {
        self.n() * self.lags + series * (self.exog_lags + 1) + lag
    }

    pub fn validate(&self) -> Result<()> {
        if self.lags == 0 {
            return Err(Error::InvalidParameter("VAR lag order must be >= 1".into()));
        }
        if self.endogenous.is_empty() {
            return Err(Error::InvalidParameter(
                "VAR needs at least one endogenous series".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinnesotaPrior {
    /// Prior mean of each variable's own first lag.
    pub own_lag_mean: f64,
    /// Overall tightness.
    pub lambda1: f64,
    /// Cross-variable tightness. Not expressible in the conjugate form, so it
    /// is recorded but does not enter the posterior.
    pub lambda2: f64,
    /// Lag decay.
    pub lambda3: f64,
    /// Looseness on exogenous terms and the intercept.
    pub lambda4: f64,
}

impl Default for MinnesotaPrior {
    fn default() -> Self {
        MinnesotaPrior {
            own_lag_mean: 0.0,
            lambda1: 0.2,
            lambda2: 0.5,
            lambda3: 1.0,
            lambda4: 1e5,
        }
    }
}

impl MinnesotaPrior {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("lambda4", self.lambda4),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if !self.own_lag_mean.is_finite() {
            return Err(Error::InvalidParameter(
                "own_lag_mean must be finite".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraw {
    /// `k × n` stacked coefficients.
    pub coefficients: DMatrix<f64>,
    /// `n × n` innovation covariance.
    pub sigma: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvarPosterior {
    pub spec: VarxSpec,
    pub prior: MinnesotaPrior,
    /// Residual scales of univariate autoregressions used to size the prior.
    pub scales: Vec<f64>,
    /// Posterior mean of the coefficients.
    pub mean: DMatrix<f64>,
    pub scale_matrix: DMatrix<f64>,
    pub dof: f64,
    pub draws: Vec<PosteriorDraw>,
    pub n_draws: usize,
    /// Covariance draws that failed a positive-definiteness check and were redrawn.
    pub redraws: usize,
    pub n_obs: usize,
    /// Sample SD of each exogenous series over the estimation rows.
    pub exog_sd: Vec<f64>,
}

impl BvarPosterior {
    /// A posterior concentrated on one coefficient matrix.
    pub fn degenerate(
        spec: VarxSpec,
        coefficients: DMatrix<f64>,
        sigma: DMatrix<f64>,
    ) -> Result<Self> {
        spec.validate()?;
        if coefficients.shape() != (spec.k(), spec.n()) || sigma.shape() != (spec.n(), spec.n()) {
            return Err(Error::Dimension(
                "coefficient or covariance shape does not match the spec".into(),
            ));
        }
        let m = spec.m();
        Ok(BvarPosterior {
            prior: MinnesotaPrior::default(),
            scales: vec![1.0; spec.n()],
            mean: coefficients.clone(),
            scale_matrix: sigma.clone(),
            dof: f64::INFINITY,
            draws: vec![PosteriorDraw {
                coefficients,
                sigma,
            }],
            n_draws: 1,
            redraws: 0,
            n_obs: 0,
            exog_sd: vec![1.0; m],
            spec,
        })
    }
}

/// Design rows for observations `start..T`.
fn build_design(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    spec: &VarxSpec,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (t, n) = y.shape();
    let start = spec.lags.max(spec.exog_lags);
    let rows = t - start;
    let k = spec.k();
    let mut z = DMatrix::zeros(rows, k);
    for r in 0..rows {
        let tt = r + start;
        for l in 1..=spec.lags {
            for j in 0..n {
                z[(r, (l - 1) * n + j)] = y[(tt - l, j)];
            }
        }
        for s in 0..spec.m() {
            for l in 0..=spec.exog_lags {
                z[(r, spec.exog_row(s, l))] = x[(tt - l, s)];
            }
        }
        if spec.intercept {
            z[(r, k - 1)] = 1.0;
        }
    }
    (y.rows(start, rows).into_owned(), z)
}

/// Least squares through QR; returns the solution and the `R` factor.
fn qr_solve(z: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let qr = z.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let b = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign("VAR design is rank deficient".into()))?;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularDesign("VAR design is rank deficient".into()));
    }
    Ok((b, r))
}

/// Residual SD of an AR(p) with intercept fitted to one series.
fn ar_scale(series: &[f64], p: usize) -> Result<f64> {
    let t = series.len();
    let p = if t > 2 * p + 2 { p } else { 1 };
    if t <= p + 2 {
        return Err(Error::InsufficientObservations {
            needed: p + 2,
            have: t,
        });
    }
    let rows = t - p;
    let z = DMatrix::from_fn(rows, p + 1, |r, c| {
        if c == p {
            1.0
        } else {
            series[r + p - 1 - c]
        }
    });
    let y = DMatrix::from_fn(rows, 1, |r, _| series[r + p]);
    let (b, _) = qr_solve(&z, &y)?;
    let e = &y - &z * &b;
    let s2 = e.iter().map(|v| v * v).sum::<f64>() / (rows - p - 1) as f64;
    Ok(if s2 > 0.0 { s2.sqrt() } else { 1.0 })
}

/// Minnesota dummy observations `(Y_d, Z_d)`.
fn dummies(
    spec: &VarxSpec,
    prior: &MinnesotaPrior,
    scales: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = spec.n();
    let k = spec.k();
    let n_exog_rows = k - n * spec.lags;
    let rows = n * spec.lags + n_exog_rows + n;
    let mut yd = DMatrix::zeros(rows, n);
    let mut zd = DMatrix::zeros(rows, k);
    let mut r = 0;
    for l in 1..=spec.lags {
        let decay = (l as f64).powf(prior.lambda3);
        for j in 0..n {
            let w = scales[j] * decay / prior.lambda1;
            zd[(r, (l - 1) * n + j)] = w;
            if l == 1 {
                yd[(r, j)] = prior.own_lag_mean * scales[j] / prior.lambda1;
            }
            r += 1;
        }
    }
    let loose = 1.0 / (prior.lambda1 * prior.lambda4);
    for c in n * spec.lags..k {
        zd[(r, c)] = loose;
        r += 1;
    }
    for j in 0..n {
        yd[(r, j)] = scales[j];
        r += 1;
    }
    (yd, zd)
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

fn draw_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `Σ ~ IW(S, ν)` via the Bartlett decomposition of `Σ⁻¹ ~ W(S⁻¹, ν)`.
fn draw_inverse_wishart(
    chol_s_inv: &DMatrix<f64>,
    dof: f64,
    rng: &mut ChaCha8Rng,
) -> Option<DMatrix<f64>> {
    let n = chol_s_inv.nrows();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let chi = ChiSquared::new(dof - i as f64).ok()?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let la = chol_s_inv * a;
    let precision = &la * la.transpose();
    let sigma = precision.try_inverse()?;
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    sigma.clone().cholesky().map(|_| sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvarOptions {
    pub n_draws: usize,
    pub seed: u64,
    pub execution: Execution,
}

/// Posterior of the VARX given endogenous data `y` and exogenous series
/// (one column per series, same rows as `y`).
pub fn fit_bvarx(
    y: &MonthlyPanel,
    exog: &DMatrix<f64>,
    spec: &VarxSpec,
    prior: &MinnesotaPrior,
    opts: &BvarOptions,
) -> Result<BvarPosterior> {
    spec.validate()?;
    prior.validate()?;
    if y.data.ncols() != spec.n() {
        return Err(Error::Dimension(format!(
            "panel has {} variables, spec lists {}",
            y.data.ncols(),
            spec.n()
        )));
    }
    if exog.nrows() != y.data.nrows() || exog.ncols() != spec.m() {
        return Err(Error::Dimension(format!(
            "exogenous data is {}×{}, expected {}×{}",
            exog.nrows(),
            exog.ncols(),
            y.data.nrows(),
            spec.m()
        )));
    }
    if exog.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite exogenous value".into()));
    }
    if opts.n_draws == 0 {
        return Err(Error::InvalidParameter("n_draws must be >= 1".into()));
    }
    let t = y.data.nrows();
    let needed = spec.n() * spec.lags + spec.m() + 1;
    if t <= needed + spec.lags.max(spec.exog_lags) {
        return Err(Error::InsufficientObservations {
            needed: needed + spec.lags.max(spec.exog_lags),
            have: t,
        });
    }
    if (prior.lambda2 - 1.0).abs() > 0.0 {
        log::info!(
            "cross-variable tightness lambda2={} is not used by the conjugate prior",
            prior.lambda2
        );
    }

    let scales = (0..spec.n())
        .map(|j| ar_scale(y.data.column(j).as_slice(), spec.lags))
        .collect::<Result<Vec<_>>>()?;
    let (yy, z) = build_design(&y.data, exog, spec);
    let n_obs = yy.nrows();
    let (yd, zd) = dummies(spec, prior, &scales);
    let ys = stack(&yy, &yd);
    let zs = stack(&z, &zd);
    let (mean, r) = qr_solve(&zs, &ys)?;
    let resid = &ys - &zs * &mean;
    let scale_matrix = resid.transpose() * &resid;
    let scale_matrix = (&scale_matrix + scale_matrix.transpose()) * 0.5;
    let dof = (ys.nrows() - spec.k()) as f64;
    if dof <= (spec.n() - 1) as f64 {
        return Err(Error::InsufficientObservations {
            needed: spec.k() + spec.n(),
            have: ys.nrows(),
        });
    }
    let s_inv = scale_matrix
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularDesign("posterior scale matrix is singular".into()))?;
    let chol_s_inv = s_inv
        .cholesky()
        .ok_or_else(|| {
            Error::SingularDesign("posterior scale matrix is not positive definite".into())
        })?
        .l();
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::SingularDesign("VAR design is rank deficient".into()))?;

    let (k, n) = (spec.k(), spec.n());
    let results = map_indexed(opts.n_draws, opts.execution, |d| {
        let mut rng = draw_rng(opts.seed, d);
        let mut redraws = 0usize;
        let sigma = loop {
            match draw_inverse_wishart(&chol_s_inv, dof, &mut rng) {
                Some(s) => break s,
                None => {
                    redraws += 1;
                    if redraws > 1000 {
                        return Err(Error::SingularDesign(
                            "covariance draws are never positive definite".into(),
                        ));
                    }
                }
            }
        };
        let chol = sigma
            .clone()
            .cholesky()
            .expect("checked positive definite")
            .l();
        let w = DMatrix::from_fn(k, n, |_, _| StandardNormal.sample(&mut rng));
        let coefficients = &mean + &r_inv * w * chol.transpose();
        Ok((
            PosteriorDraw {
                coefficients,
                sigma,
            },
            redraws,
        ))
    });
    let mut draws = Vec::with_capacity(opts.n_draws);
    let mut redraws = 0;
    for r in results {
        let (d, c) = r?;
        redraws += c;
        draws.push(d);
    }
    if redraws > 0 {
        log::warn!("{redraws} covariance draws were not positive definite and were redrawn");
    }
    let start = spec.lags.max(spec.exog_lags);
    let exog_sd = (0..spec.m())
        .map(|s| {
            let col: Vec<f64> = exog.column(s).iter().skip(start).copied().collect();
            let m = col.iter().sum::<f64>() / col.len() as f64;
            (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (col.len() - 1) as f64).sqrt()
        })
        .collect();

    Ok(BvarPosterior {
        spec: spec.clone(),
        prior: *prior,
        scales,
        mean,
        scale_matrix,
        dof,
        draws,
        n_draws: opts.n_draws,
        redraws,
        n_obs,
        exog_sd,
    })
}

/// Equation-by-equation least squares on the same design, for comparison.
pub fn ols_coefficients(
    y: &MonthlyPanel,
    exog: &DMatrix<f64>,
    spec: &VarxSpec,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let (yy, z) = build_design(&y.data, exog, spec);
    Ok(qr_solve(&z, &yy)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Impulse {
    /// One sample standard deviation of the exogenous series.
    #[default]
    OneSd,
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrfOptions {
    pub horizon: usize,
    /// Which exogenous series receives the impulse.
    pub exog_index: usize,
    pub impulse: Impulse,
    /// Drop draws whose companion matrix has spectral radius above 1.
    pub truncate_explosive: bool,
    pub execution: Execution,
}

impl Default for IrfOptions {
    fn default() -> Self {
        IrfOptions {
            horizon: 48,
            exog_index: 0,
            impulse: Impulse::OneSd,
            truncate_explosive: false,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrfBand {
    pub median: f64,
    pub lo66: f64,
    pub hi66: f64,
    pub lo90: f64,
    pub hi90: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrfResult {
    pub variables: Vec<String>,
    /// `bands[variable][horizon]` for horizons `0..=H`.
    pub bands: Vec<Vec<IrfBand>>,
    pub impulse_size: f64,
    pub n_draws: usize,
    pub n_explosive: usize,
}

/// Response path `Ψ_0..Ψ_H` (each an n-vector) for one coefficient draw.
pub fn impulse_response(
    b: &DMatrix<f64>,
    spec: &VarxSpec,
    exog_index: usize,
    size: f64,
    horizon: usize,
) -> Vec<DVector<f64>> {
    let n = spec.n();
    let mut psi: Vec<DVector<f64>> = Vec::with_capacity(horizon + 1);
    for h in 0..=horizon {
        let mut v = DVector::zeros(n);
        if h <= spec.exog_lags {
            let row = spec.exog_row(exog_index, h);
            for i in 0..n {
                v[i] = b[(row, i)] * size;
            }
        }
        for l in 1..=spec.lags.min(h) {
            let prev = &psi[h - l];
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += b[((l - 1) * n + j, i)] * prev[j];
                }
                v[i] += acc;
            }
        }
        psi.push(v);
    }
    psi
}

/// Largest eigenvalue modulus of the lag polynomial's companion matrix.
pub fn spectral_radius(b: &DMatrix<f64>, spec: &VarxSpec) -> f64 {
    let n = spec.n();
    let np = n * spec.lags;
    let mut c = DMatrix::zeros(np, np);
    for l in 0..spec.lags {
        for i in 0..n {
            for j in 0..n {
                c[(i, l * n + j)] = b[(l * n + j, i)];
            }
        }
    }
    for r in n..np {
        c[(r, r - n)] = 1.0;
    }
    c.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise posterior quantiles of the responses to an exogenous impulse.
pub fn irf_exogenous(post: &BvarPosterior, opts: &IrfOptions) -> Result<IrfResult> {
    if opts.horizon == 0 {
        return Err(Error::InvalidParameter("IRF horizon must be >= 1".into()));
    }
    if opts.exog_index >= post.spec.m() {
        return Err(Error::InvalidParameter(format!(
            "exogenous index {} out of range ({} series)",
            opts.exog_index,
            post.spec.m()
        )));
    }
    let size = match opts.impulse {
        Impulse::Unit => 1.0,
        Impulse::OneSd => post.exog_sd[opts.exog_index],
    };
    let spec = &post.spec;
    let per_draw = map_indexed(post.draws.len(), opts.execution, |d| {
        let b = &post.draws[d].coefficients;
        let explosive = spectral_radius(b, spec) > 1.0 + SPECTRAL_TOLERANCE;
        (
            impulse_response(b, spec, opts.exog_index, size, opts.horizon),
            explosive,
        )
    });
    let n_explosive = per_draw.iter().filter(|(_, e)| *e).count();
    if n_explosive > 0 {
        log::warn!(
            "{n_explosive} of {} posterior draws are explosive{}",
            per_draw.len(),
            if opts.truncate_explosive {
                " and were dropped"
            } else {
                ""
            }
        );
    }
    let kept: Vec<&Vec<DVector<f64>>> = per_draw
        .iter()
        .filter(|(_, e)| !(opts.truncate_explosive && *e))
        .map(|(p, _)| p)
        .collect();
    if kept.is_empty() {
        return Err(Error::DegenerateFit(
            "every posterior draw is explosive".into(),
        ));
    }
    let mut bands = Vec::with_capacity(spec.n());
    for i in 0..spec.n() {
        let mut row = Vec::with_capacity(opts.horizon + 1);
        for h in 0..=opts.horizon {
            let mut v: Vec<f64> = kept.iter().map(|p| p[h][i]).collect();
            v.sort_by(f64::total_cmp);
            row.push(IrfBand {
                median: quantile_sorted(&v, 0.5),
                lo66: quantile_sorted(&v, 0.17),
                hi66: quantile_sorted(&v, 0.83),
                lo90: quantile_sorted(&v, 0.05),
                hi90: quantile_sorted(&v, 0.95),
            });
        }
        bands.push(row);
    }
    Ok(IrfResult {
        variables: spec.endogenous.clone(),
        bands,
        impulse_size: size,
        n_draws: kept.len(),
        n_explosive,
    })
}

pub const IRF_COLUMNS: [&str; 7] = [
    "variable", "horizon", "median", "lo66", "hi66", "lo90", "hi90",
];

pub fn write_irf_csv(path: impl AsRef<Path>, irf: &IrfResult) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    writeln!(w, "{}", IRF_COLUMNS.join(",")).map_err(io)?;
    for (name, row) in irf.variables.iter().zip(&irf.bands) {
        for (h, b) in row.iter().enumerate() {
            writeln!(
                w,
                "{name},{h},{},{},{},{},{}",
                b.median, b.lo66, b.hi66, b.lo90, b.hi90
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
