//! Expectation models, the FOMC/NYT expectation gap, and the projection of a
//! high-frequency shock onto that gap.
//!
//! Each source's embeddings predict a target (normally the funds rate) with an
//! elastic net. The gap between the two fitted expectations is the regressor
//! in `shock = ζ + θ·gap + ν`; the fitted part is the news component and the
//! residual the monetary component. Penalties are tuned by the R² of that
//! final regression.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{AnalysisSample, MeetingKey, Source, TargetName};
use crate::elastic_net::{self, ElasticNetFit, FitOptions, PenaltySpec};
use crate::error::{Error, Result};
use crate::linalg::mean;
use crate::par::{map_indexed, Execution};
use crate::regression::{design_with_intercept, ols_hc, HcType, OlsFit};

/// Gaps with (population) variance below this are treated as constant.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

const MAX_ASCENT_ROUNDS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationModel {
    pub source: Source,
    pub target: TargetName,
    pub fit: ElasticNetFit,
    pub stage2_r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapSeries {
    pub target: TargetName,
    pub keys: Vec<MeetingKey>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage3Fit {
    pub ols: OlsFit,
    pub r2: f64,
}

impl Stage3Fit {
    pub fn zeta(&self) -> f64 {
        self.ols.coefficients[0]
    }

    pub fn theta(&self) -> f64 {
        self.ols.coefficients[1]
    }

    pub fn theta_se(&self) -> f64 {
        self.ols.standard_errors[1]
    }

    pub fn theta_t(&self) -> f64 {
        self.ols.t_stats[1]
    }

    pub fn theta_p(&self) -> f64 {
        self.ols.p_values[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub nyt: PenaltySpec,
    pub fomc: PenaltySpec,
}

/// Penalty grid shared by both sources.
///
/// Unless `lambdas` is given, each source gets `n_lambdas` geometric values
/// from `lambda_max` (computed at `η = 1` on that source) down to
/// `lambda_min_ratio · lambda_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub etas: Vec<f64>,
    pub n_lambdas: usize,
    pub lambda_min_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            etas: (1..=20).map(|i| i as f64 / 20.0).collect(),
            n_lambdas: 25,
            lambda_min_ratio: 1e-3,
            lambdas: None,
        }
    }
}

impl GridSpec {
    pub fn single(penalty: PenaltySpec) -> Self {
        GridSpec {
            etas: vec![penalty.eta],
            n_lambdas: 1,
            lambda_min_ratio: 1.0,
            lambdas: Some(vec![penalty.lambda]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.etas.is_empty() {
            return Err(Error::InvalidParameter("grid has no eta values".into()));
        }
        for &eta in &self.etas {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidParameter(format!(
                    "grid eta {eta} outside [0, 1]"
                )));
            }
        }
        match &self.lambdas {
            Some(l) => {
                if l.is_empty() {
                    return Err(Error::InvalidParameter("grid has no lambda values".into()));
                }
                if l.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::InvalidParameter(
                        "grid lambdas must be finite and >= 0".into(),
                    ));
                }
            }
            None => {
                if self.n_lambdas == 0 {
                    return Err(Error::InvalidParameter("n_lambdas must be >= 1".into()));
                }
                if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "lambda_min_ratio must lie in (0, 1], got {}",
                        self.lambda_min_ratio
                    )));
                }
            }
        }
        Ok(())
    }

    /// Descending lambda values for one source.
    pub fn lambdas_for(&self, x: &DMatrix<f64>, y: &[f64], opts: &FitOptions) -> Result<Vec<f64>> {
        self.validate()?;
        let mut out = match &self.lambdas {
            Some(l) => l.clone(),
            None => {
                let top = elastic_net::lambda_max(x, y, 1.0, opts)?;
                let n = self.n_lambdas;
                (0..n)
                    .map(|i| {
                        if n == 1 {
                            top
                        } else {
                            top * self.lambda_min_ratio.powf(i as f64 / (n - 1) as f64)
                        }
                    })
                    .collect()
            }
        };
        out.sort_by(|a, b| b.total_cmp(a));
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Every (NYT cell, FOMC cell) pair.
    #[default]
    Joint,
    /// Alternate between the two sources, each time choosing the best cell for
    /// one source with the other held fixed, until neither changes.
    Coordinate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionOptions {
    pub grid: GridSpec,
    pub mode: SearchMode,
    /// Fit each (source, η, λ) once and reuse it across cells.
    pub cache: bool,
    pub fit: FitOptions,
    pub hc: HcType,
    /// Report `θ̂·(gap - mean gap)` as news instead of `ζ̂ + θ̂·gap`.
    pub demeaned_news: bool,
    pub execution: Execution,
}

impl Default for DecompositionOptions {
    fn default() -> Self {
        DecompositionOptions {
            grid: GridSpec::default(),
            mode: SearchMode::Joint,
            cache: true,
            fit: FitOptions::default(),
            hc: HcType::HC1,
            demeaned_news: false,
            execution: Execution::Parallel,
        }
    }
}

/// Stage-3 R² over the grid, indexed `[nyt cell][fomc cell]`. `NaN` marks a
/// cell that was not evaluated or whose gap is constant.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSurface {
    pub nyt: Vec<PenaltySpec>,
    pub fomc: Vec<PenaltySpec>,
    pub r2: Vec<f64>,
}

impl GridSurface {
    fn empty(nyt: Vec<PenaltySpec>, fomc: Vec<PenaltySpec>) -> Self {
        let n = nyt.len() * fomc.len();
        GridSurface {
            nyt,
            fomc,
            r2: vec![f64::NAN; n],
        }
    }

    pub fn get(&self, i_nyt: usize, i_fomc: usize) -> f64 {
        self.r2[i_nyt * self.fomc.len() + i_fomc]
    }

    /// Largest finite value; ties go to the first cell in row-major order.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (k, v) in self.r2.iter().enumerate() {
            if v.is_finite() && best.is_none_or(|(_, b)| *v > b) {
                best = Some((k, *v));
            }
        }
        best.map(|(k, _)| (k / self.fomc.len(), k % self.fomc.len()))
    }

    pub fn max(&self) -> Option<f64> {
        self.argmax().map(|(i, j)| self.get(i, j))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub keys: Vec<MeetingKey>,
    pub selected: Selection,
    pub nyt: ExpectationModel,
    pub fomc: ExpectationModel,
    pub gap: GapSeries,
    pub stage3: Stage3Fit,
    pub shock: Vec<f64>,
    pub news: Vec<f64>,
    pub monetary: Vec<f64>,
    pub surface: GridSurface,
}

// ---------------------------------------------------------------------------
// Single-model building blocks

pub fn fit_expectation(
    sample: &AnalysisSample,
    source: Source,
    target: TargetName,
    penalty: PenaltySpec,
    opts: &FitOptions,
) -> Result<ExpectationModel> {
    let y = target_values(sample, target)?;
    let fit = elastic_net::fit(sample.x(source), y, penalty, opts)?;
    Ok(ExpectationModel {
        source,
        target,
        stage2_r2: fit.in_sample_r2,
        fit,
    })
}

fn target_values(sample: &AnalysisSample, target: TargetName) -> Result<&[f64]> {
    if sample.is_empty() {
        return Err(Error::InsufficientObservations { needed: 1, have: 0 });
    }
    sample.target(target).ok_or_else(|| {
        Error::Validation(format!(
            "target '{}' is missing for some sample rows",
            target.as_str()
        ))
    })
}

/// `fitted(FOMC) - fitted(NYT)`.
pub fn expectation_gap(
    fomc: &ExpectationModel,
    nyt: &ExpectationModel,
    sample: &AnalysisSample,
) -> Result<GapSeries> {
    if fomc.target != nyt.target {
        return Err(Error::Dimension(format!(
            "models predict different targets ({} and {})",
            fomc.target.as_str(),
            nyt.target.as_str()
        )));
    }
    let f = elastic_net::predict(&fomc.fit, &sample.x_fomc)?;
    let n = elastic_net::predict(&nyt.fit, &sample.x_nyt)?;
    Ok(GapSeries {
        target: fomc.target,
        keys: sample.keys.clone(),
        values: f.iter().zip(&n).map(|(a, b)| a - b).collect(),
    })
}

fn population_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

fn ensure_varies(v: &[f64], what: &str) -> Result<()> {
    let var = population_variance(v);
    if !(var >= DEGENERATE_VARIANCE) {
        return Err(Error::DegenerateRegressor(format!(
            "{what} has variance {var:.3e}; stage 2 is under- or overfitted"
        )));
    }
    Ok(())
}

/// OLS of the shock on `[1, gap]`.
pub fn stage3_project(gap: &[f64], shock: &[f64], hc: HcType) -> Result<Stage3Fit> {
    if gap.len() != shock.len() {
        return Err(Error::Dimension(format!(
            "gap has {} entries, shock {}",
            gap.len(),
            shock.len()
        )));
    }
    ensure_varies(gap, "expectation gap")?;
    let x = design_with_intercept(&[gap])?;
    let ols = ols_hc(&x, shock, hc)?;
    Ok(Stage3Fit { r2: ols.r2, ols })
}

/// News `ζ̂ + θ̂·gap` and monetary `shock - news`.
pub fn decompose(stage3: &Stage3Fit, gap: &[f64], shock: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if gap.len() != shock.len() {
        return Err(Error::Dimension(format!(
            "gap has {} entries, shock {}",
            gap.len(),
            shock.len()
        )));
    }
    let (zeta, theta) = (stage3.zeta(), stage3.theta());
    let news: Vec<f64> = gap.iter().map(|g| zeta + theta * g).collect();
    let monetary = shock.iter().zip(&news).map(|(s, n)| s - n).collect();
    Ok((news, monetary))
}

/// Zero-mean news `θ̂·(gap - mean gap)`.
pub fn demeaned_news(stage3: &Stage3Fit, gap: &[f64]) -> Vec<f64> {
    let m = mean(gap);
    gap.iter().map(|g| stage3.theta() * (g - m)).collect()
}

/// Regresses the shock on the FOMC expectation alone, omitting the NYT term.
pub fn short_regression_diagnostic(
    sample: &AnalysisSample,
    shock: &[f64],
    penalty_fomc: PenaltySpec,
    opts: &FitOptions,
    hc: HcType,
) -> Result<OlsFit> {
    if shock.len() != sample.len() {
        return Err(Error::Dimension(format!(
            "shock has {} entries, sample {}",
            shock.len(),
            sample.len()
        )));
    }
    let model = fit_expectation(sample, Source::Fomc, TargetName::Ffr, penalty_fomc, opts)?;
    let fitted = elastic_net::predict(&model.fit, &sample.x_fomc)?;
    ensure_varies(&fitted, "FOMC expectation")?;
    let x = design_with_intercept(&[&fitted])?;
    ols_hc(&x, shock, hc)
}

// ---------------------------------------------------------------------------
// Stage-2 grids

/// Every grid cell for one source and target, in `(η, λ)` order with λ
/// descending within each η.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceGrid {
    pub source: Source,
    pub target: TargetName,
    pub etas: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl SourceGrid {
    pub fn new(
        sample: &AnalysisSample,
        source: Source,
        target: TargetName,
        grid: &GridSpec,
        opts: &FitOptions,
    ) -> Result<Self> {
        let y = target_values(sample, target)?;
        let lambdas = grid.lambdas_for(sample.x(source), y, opts)?;
        Ok(SourceGrid {
            source,
            target,
            etas: grid.etas.clone(),
            lambdas,
        })
    }

    pub fn len(&self) -> usize {
        self.etas.len() * self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn penalty(&self, cell: usize) -> PenaltySpec {
        PenaltySpec {
            eta: self.etas[cell / self.lambdas.len()],
            lambda: self.lambdas[cell % self.lambdas.len()],
        }
    }

    pub fn penalties(&self) -> Vec<PenaltySpec> {
        (0..self.len()).map(|c| self.penalty(c)).collect()
    }

    /// Fit for one cell, recomputed along the warm-started path prefix so it
    /// is bit-identical to the cached fit.
    pub fn fit_cell(
        &self,
        sample: &AnalysisSample,
        cell: usize,
        opts: &FitOptions,
    ) -> Result<ElasticNetFit> {
        let y = target_values(sample, self.target)?;
        let e = cell / self.lambdas.len();
        let l = cell % self.lambdas.len();
        let mut path = elastic_net::fit_path(
            sample.x(self.source),
            y,
            self.etas[e],
            &self.lambdas[..=l],
            opts,
        )?;
        Ok(path.pop().expect("nonempty path"))
    }
}

/// All fits of a [`SourceGrid`] with their in-sample predictions.
#[derive(Debug, Clone)]
pub struct Stage2Fits {
    pub grid: SourceGrid,
    pub fits: Vec<ElasticNetFit>,
    pub fitted: Vec<Vec<f64>>,
}

impl Stage2Fits {
    pub fn compute(
        sample: &AnalysisSample,
        grid: SourceGrid,
        opts: &FitOptions,
        exec: Execution,
    ) -> Result<Self> {
        let y = target_values(sample, grid.target)?;
        let x = sample.x(grid.source);
        let paths = map_indexed(grid.etas.len(), exec, |e| {
            elastic_net::fit_path(x, y, grid.etas[e], &grid.lambdas, opts)
        });
        let fits: Vec<ElasticNetFit> = paths.into_iter().collect::<Result<Vec<_>>>()?.concat();
        let fitted = map_indexed(fits.len(), exec, |c| {
            elastic_net::predict(&fits[c], x).expect("dimensions checked")
        });
        Ok(Stage2Fits { grid, fits, fitted })
    }

    pub fn model(&self, cell: usize) -> ExpectationModel {
        ExpectationModel {
            source: self.grid.source,
            target: self.grid.target,
            stage2_r2: self.fits[cell].in_sample_r2,
            fit: self.fits[cell].clone(),
        }
    }
}

/// Shock centred once for repeated R² evaluation.
struct CenteredShock {
    values: Vec<f64>,
    ss: f64,
}

impl CenteredShock {
    fn new(shock: &[f64]) -> Self {
        let m = mean(shock);
        let values: Vec<f64> = shock.iter().map(|s| s - m).collect();
        let ss = values.iter().map(|v| v * v).sum();
        CenteredShock { values, ss }
    }
}

/// R² of the shock on `[1, fomc - nyt]`, or `NaN` for a constant gap.
fn cell_r2(fomc: &[f64], nyt: &[f64], shock: &CenteredShock) -> f64 {
    let n = fomc.len() as f64;
    let gbar = fomc.iter().zip(nyt).map(|(a, b)| a - b).sum::<f64>() / n;
    let (mut sgg, mut sgs) = (0.0, 0.0);
    for ((a, b), s) in fomc.iter().zip(nyt).zip(&shock.values) {
        let g = a - b - gbar;
        sgg += g * g;
        sgs += g * s;
    }
    if !(sgg / n >= DEGENERATE_VARIANCE) {
        return f64::NAN;
    }
    if shock.ss == 0.0 {
        return 0.0;
    }
    (sgs * sgs / (sgg * shock.ss)).min(1.0)
}

/// Index of the largest finite value, keeping `current` on ties.
fn argmax_keep(values: &[f64], current: Option<usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| *v > values[b]) {
            best = Some(k);
        }
    }
    match (best, current) {
        (Some(b), Some(c)) if values[c].is_finite() && values[c] >= values[b] => Some(c),
        _ => best,
    }
}

/// Fitted values for a grid, either precomputed or produced on demand.
enum FittedSource<'a> {
    Cached(&'a Stage2Fits),
    Lazy {
        sample: &'a AnalysisSample,
        grid: &'a SourceGrid,
        opts: &'a FitOptions,
    },
}

impl FittedSource<'_> {
    fn len(&self) -> usize {
        match self {
            FittedSource::Cached(f) => f.fits.len(),
            FittedSource::Lazy { grid, .. } => grid.len(),
        }
    }

    fn fitted(&self, cell: usize) -> Result<std::borrow::Cow<'_, [f64]>> {
        match self {
            FittedSource::Cached(f) => Ok(std::borrow::Cow::Borrowed(&f.fitted[cell])),
            FittedSource::Lazy { sample, grid, opts } => {
                let fit = grid.fit_cell(sample, cell, opts)?;
                Ok(std::borrow::Cow::Owned(elastic_net::predict(
                    &fit,
                    sample.x(grid.source),
                )?))
            }
        }
    }
}

fn search_surface(
    nyt: &FittedSource<'_>,
    fomc: &FittedSource<'_>,
    nyt_penalties: Vec<PenaltySpec>,
    fomc_penalties: Vec<PenaltySpec>,
    shock: &[f64],
    mode: SearchMode,
    start_fomc: usize,
    exec: Execution,
) -> Result<GridSurface> {
    let cs = CenteredShock::new(shock);
    let (n_nyt, n_fomc) = (nyt.len(), fomc.len());
    let mut surface = GridSurface::empty(nyt_penalties, fomc_penalties);
    match mode {
        SearchMode::Joint => {
            let rows = map_indexed(n_nyt, exec, |i| -> Result<Vec<f64>> {
                let fn_i = nyt.fitted(i)?;
                (0..n_fomc)
                    .map(|j| Ok(cell_r2(&fomc.fitted(j)?, &fn_i, &cs)))
                    .collect()
            });
            for (i, row) in rows.into_iter().enumerate() {
                surface.r2[i * n_fomc..(i + 1) * n_fomc].copy_from_slice(&row?);
            }
        }
        SearchMode::Coordinate => {
            let mut j = start_fomc;
            let mut i: Option<usize> = None;
            for _ in 0..MAX_ASCENT_ROUNDS {
                let ff = fomc.fitted(j)?;
                let col = map_indexed(n_nyt, exec, |k| {
                    nyt.fitted(k).map(|f| cell_r2(&ff, &f, &cs))
                })
                .into_iter()
                .collect::<Result<Vec<f64>>>()?;
                for (k, v) in col.iter().enumerate() {
                    surface.r2[k * n_fomc + j] = *v;
                }
                let Some(i_new) = argmax_keep(&col, i) else {
                    break;
                };
                let fn_i = nyt.fitted(i_new)?;
                let row = map_indexed(n_fomc, exec, |k| {
                    fomc.fitted(k).map(|f| cell_r2(&f, &fn_i, &cs))
                })
                .into_iter()
                .collect::<Result<Vec<f64>>>()?;
                surface.r2[i_new * n_fomc..(i_new + 1) * n_fomc].copy_from_slice(&row);
                let j_new = argmax_keep(&row, Some(j)).unwrap_or(j);
                let done = i == Some(i_new) && j == j_new;
                i = Some(i_new);
                j = j_new;
                if done {
                    break;
                }
            }
        }
    }
    Ok(surface)
}

fn first_max_index(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, v) in values.enumerate() {
        if v > best.1 {
            best = (k, v);
        }
    }
    best.0
}

/// Searches the penalty grid for the pair maximizing stage-3 R², then
/// projects and decomposes the sample's shock.
pub fn grid_search(
    sample: &AnalysisSample,
    opts: &DecompositionOptions,
) -> Result<DecompositionResult> {
    opts.grid.validate()?;
    let nyt_grid = SourceGrid::new(sample, Source::Nyt, TargetName::Ffr, &opts.grid, &opts.fit)?;
    let fomc_grid = SourceGrid::new(sample, Source::Fomc, TargetName::Ffr, &opts.grid, &opts.fit)?;
    if opts.cache {
        let nyt = Stage2Fits::compute(sample, nyt_grid, &opts.fit, opts.execution)?;
        let fomc = Stage2Fits::compute(sample, fomc_grid, &opts.fit, opts.execution)?;
        search_with_fits(sample, &nyt, &fomc, opts)
    } else {
        let nyt = FittedSource::Lazy {
            sample,
            grid: &nyt_grid,
            opts: &opts.fit,
        };
        let fomc = FittedSource::Lazy {
            sample,
            grid: &fomc_grid,
            opts: &opts.fit,
        };
        let start = match opts.mode {
            SearchMode::Joint => 0,
            SearchMode::Coordinate => {
                let r2 = (0..fomc_grid.len())
                    .map(|c| {
                        fomc_grid
                            .fit_cell(sample, c, &opts.fit)
                            .map(|f| f.in_sample_r2)
                    })
                    .collect::<Result<Vec<_>>>()?;
                first_max_index(r2.into_iter())
            }
        };
        let surface = search_surface(
            &nyt,
            &fomc,
            nyt_grid.penalties(),
            fomc_grid.penalties(),
            &sample.shock,
            opts.mode,
            start,
            opts.execution,
        )?;
        let (i, j) = surface.argmax().ok_or_else(no_valid_cell)?;
        let nyt_model = model_from_fit(Source::Nyt, nyt_grid.fit_cell(sample, i, &opts.fit)?);
        let fomc_model = model_from_fit(Source::Fomc, fomc_grid.fit_cell(sample, j, &opts.fit)?);
        finish(sample, nyt_model, fomc_model, surface, opts)
    }
}

fn model_from_fit(source: Source, fit: ElasticNetFit) -> ExpectationModel {
    ExpectationModel {
        source,
        target: TargetName::Ffr,
        stage2_r2: fit.in_sample_r2,
        fit,
    }
}

fn no_valid_cell() -> Error {
    Error::NoValidCell("every grid cell yields a constant expectation gap".into())
}

/// Like [`grid_search`] with stage-2 fits computed beforehand, so one set of
/// fits can serve several shocks on the same rows.
pub fn search_with_fits(
    sample: &AnalysisSample,
    nyt: &Stage2Fits,
    fomc: &Stage2Fits,
    opts: &DecompositionOptions,
) -> Result<DecompositionResult> {
    if nyt.grid.source != Source::Nyt || fomc.grid.source != Source::Fomc {
        return Err(Error::InvalidParameter(
            "stage-2 fits passed for the wrong sources".into(),
        ));
    }
    if nyt.fitted.first().is_some_and(|f| f.len() != sample.len())
        || fomc.fitted.first().is_some_and(|f| f.len() != sample.len())
    {
        return Err(Error::Dimension(
            "stage-2 fits were computed on different rows".into(),
        ));
    }
    let start = first_max_index(fomc.fits.iter().map(|f| f.in_sample_r2));
    let surface = search_surface(
        &FittedSource::Cached(nyt),
        &FittedSource::Cached(fomc),
        nyt.grid.penalties(),
        fomc.grid.penalties(),
        &sample.shock,
        opts.mode,
        start,
        opts.execution,
    )?;
    let (i, j) = surface.argmax().ok_or_else(no_valid_cell)?;
    finish(sample, nyt.model(i), fomc.model(j), surface, opts)
}

fn finish(
    sample: &AnalysisSample,
    nyt: ExpectationModel,
    fomc: ExpectationModel,
    surface: GridSurface,
    opts: &DecompositionOptions,
) -> Result<DecompositionResult> {
    let gap = expectation_gap(&fomc, &nyt, sample)?;
    let stage3 = stage3_project(&gap.values, &sample.shock, opts.hc)?;
    let (mut news, mut monetary) = decompose(&stage3, &gap.values, &sample.shock)?;
    if opts.demeaned_news {
        news = demeaned_news(&stage3, &gap.values);
        monetary = sample.shock.iter().zip(&news).map(|(s, n)| s - n).collect();
    }
    Ok(DecompositionResult {
        keys: sample.keys.clone(),
        selected: Selection {
            nyt: nyt.fit.penalty,
            fomc: fomc.fit.penalty,
        },
        nyt,
        fomc,
        gap,
        stage3,
        shock: sample.shock.clone(),
        news,
        monetary,
        surface,
    })
}

// ---------------------------------------------------------------------------
// Channel regression

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTerm {
    pub target: TargetName,
    pub selected: Selection,
    pub nyt: ExpectationModel,
    pub fomc: ExpectationModel,
    pub gap: GapSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelResult {
    pub terms: Vec<ChannelTerm>,
    /// Intercept followed by one slope per term.
    pub ols: OlsFit,
    pub r2: f64,
}

impl ChannelResult {
    pub fn theta(&self, target: TargetName) -> Option<(f64, f64, f64)> {
        let k = self.terms.iter().position(|t| t.target == target)? + 1;
        Some((
            self.ols.coefficients[k],
            self.ols.standard_errors[k],
            self.ols.p_values[k],
        ))
    }
}

/// R² of `y` on an intercept and several regressors; `NaN` when the centred
/// regressors are (numerically) collinear or one is constant.
fn multi_r2(cols: &[&[f64]], shock: &CenteredShock) -> f64 {
    let n = shock.values.len();
    let k = cols.len();
    let centred: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let m = mean(c);
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    for c in &centred {
        if c.iter().map(|v| v * v).sum::<f64>() / (n as f64) < DEGENERATE_VARIANCE {
            return f64::NAN;
        }
    }
    if shock.ss == 0.0 {
        return 0.0;
    }
    let g = DMatrix::from_fn(k, k, |a, b| {
        centred[a]
            .iter()
            .zip(&centred[b])
            .map(|(x, y)| x * y)
            .sum::<f64>()
    });
    let s = nalgebra::DVector::from_fn(k, |a, _| {
        centred[a]
            .iter()
            .zip(&shock.values)
            .map(|(x, y)| x * y)
            .sum::<f64>()
    });
    let d: Vec<f64> = (0..k).map(|a| g[(a, a)].sqrt()).collect();
    let scaled = DMatrix::from_fn(k, k, |a, b| g[(a, b)] / (d[a] * d[b]));
    let eig = scaled.clone().symmetric_eigenvalues();
    let (lo, hi) = eig
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(*v), h.max(*v)));
    if !(lo > 0.0) || hi / lo > 1e12 {
        return f64::NAN;
    }
    match g.cholesky() {
        Some(ch) => (s.dot(&ch.solve(&s)) / shock.ss).clamp(0.0, 1.0),
        None => f64::NAN,
    }
}

/// Multivariate projection of the shock on one expectation gap per target.
///
/// Each target's pair of penalties starts at its own best single-gap cell;
/// the pairs are then revised one model at a time to maximize the joint R²
/// until no single change improves it.
pub fn channel_regression(
    sample: &AnalysisSample,
    targets: &[TargetName],
    opts: &DecompositionOptions,
) -> Result<ChannelResult> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("no channel targets given".into()));
    }
    for t in targets {
        target_values(sample, *t)?;
    }
    let mut fits: Vec<[Stage2Fits; 2]> = Vec::with_capacity(targets.len());
    for &t in targets {
        let grid = |s| SourceGrid::new(sample, s, t, &opts.grid, &opts.fit);
        fits.push([
            Stage2Fits::compute(sample, grid(Source::Nyt)?, &opts.fit, opts.execution)?,
            Stage2Fits::compute(sample, grid(Source::Fomc)?, &opts.fit, opts.execution)?,
        ]);
    }
    let cs = CenteredShock::new(&sample.shock);

    // cells[t] = [nyt cell, fomc cell]
    let mut cells: Vec<[usize; 2]> = Vec::with_capacity(targets.len());
    for (t, pair) in fits.iter().enumerate() {
        let start = first_max_index(pair[1].fits.iter().map(|f| f.in_sample_r2));
        let surface = search_surface(
            &FittedSource::Cached(&pair[0]),
            &FittedSource::Cached(&pair[1]),
            pair[0].grid.penalties(),
            pair[1].grid.penalties(),
            &sample.shock,
            opts.mode,
            start,
            opts.execution,
        )?;
        let (i, j) = surface.argmax().ok_or_else(|| {
            Error::DegenerateRegressor(format!(
                "every {} expectation gap is constant",
                targets[t].as_str()
            ))
        })?;
        cells.push([i, j]);
    }

    let gap_of = |t: usize, c: [usize; 2]| -> Vec<f64> {
        fits[t][1].fitted[c[1]]
            .iter()
            .zip(&fits[t][0].fitted[c[0]])
            .map(|(f, n)| f - n)
            .collect()
    };
    if targets.len() > 1 {
        let mut gaps: Vec<Vec<f64>> = (0..targets.len()).map(|t| gap_of(t, cells[t])).collect();
        let mut best = {
            let refs: Vec<&[f64]> = gaps.iter().map(Vec::as_slice).collect();
            multi_r2(&refs, &cs)
        };
        for _ in 0..MAX_ASCENT_ROUNDS {
            let mut improved = false;
            for t in 0..targets.len() {
                for side in 0..2 {
                    let n_cells = fits[t][side].fits.len();
                    let scores = map_indexed(n_cells, opts.execution, |c| {
                        let mut cand = cells[t];
                        cand[side] = c;
                        let g = gap_of(t, cand);
                        let refs: Vec<&[f64]> = gaps
                            .iter()
                            .enumerate()
                            .map(|(u, v)| if u == t { g.as_slice() } else { v.as_slice() })
                            .collect();
                        multi_r2(&refs, &cs)
                    });
                    if let Some(c) = argmax_keep(&scores, Some(cells[t][side])) {
                        if c != cells[t][side] && (!best.is_finite() || scores[c] > best) {
                            cells[t][side] = c;
                            best = scores[c];
                            gaps[t] = gap_of(t, cells[t]);
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }

    let mut terms = Vec::with_capacity(targets.len());
    for (t, &target) in targets.iter().enumerate() {
        let nyt = fits[t][0].model(cells[t][0]);
        let fomc = fits[t][1].model(cells[t][1]);
        let gap = expectation_gap(&fomc, &nyt, sample)?;
        ensure_varies(&gap.values, &format!("{} expectation gap", target.as_str()))?;
        terms.push(ChannelTerm {
            target,
            selected: Selection {
                nyt: nyt.fit.penalty,
                fomc: fomc.fit.penalty,
            },
            nyt,
            fomc,
            gap,
        });
    }
    let regressors: Vec<&[f64]> = terms.iter().map(|t| t.gap.values.as_slice()).collect();
    let x = design_with_intercept(&regressors)?;
    let ols = ols_hc(&x, &sample.shock, opts.hc)?;
    Ok(ChannelResult {
        r2: ols.r2,
        terms,
        ols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ShockName;

    fn sample_from(
        xf: DMatrix<f64>,
        xn: DMatrix<f64>,
        ffr: Vec<f64>,
        shock: Vec<f64>,
    ) -> AnalysisSample {
        let t = ffr.len();
        AnalysisSample {
            keys: (0..t)
                .map(|i| {
                    MeetingKey::from_ymd(2000 + (i / 8) as i32, 1 + (i % 8) as u32, 15).unwrap()
                })
                .collect(),
            x_fomc: xf,
            x_nyt: xn,
            rgdp: Some(ffr.iter().map(|v| 2.0 * v + 1.0).collect()),
            cpi: None,
            ffr,
            shock_name: ShockName::Pns,
            shock,
        }
    }

    fn toy() -> AnalysisSample {
        let t = 24;
        let xf = DMatrix::from_fn(t, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let xn = DMatrix::from_fn(t, 3, |i, j| ((i * 5 + j * 2) % 13) as f64 / 6.0 - 1.0);
        let ffr: Vec<f64> = (0..t)
            .map(|i| 3.0 + xf[(i, 0)] - 0.5 * xf[(i, 2)] + 0.1 * ((i % 3) as f64))
            .collect();
        let shock: Vec<f64> = (0..t)
            .map(|i| 0.2 * xf[(i, 0)] - 0.1 * xn[(i, 1)] + 0.05 * ((i % 4) as f64 - 1.5))
            .collect();
        sample_from(xf, xn, ffr, shock)
    }

    fn small_opts() -> DecompositionOptions {
        DecompositionOptions {
            grid: GridSpec {
                etas: vec![0.5, 1.0],
                n_lambdas: 4,
                lambda_min_ratio: 1e-2,
                lambdas: None,
            },
            ..DecompositionOptions::default()
        }
    }

    #[test]
    fn identical_models_give_zero_gap() {
        let s = toy();
        let same = AnalysisSample {
            x_nyt: s.x_fomc.clone(),
            ..s.clone()
        };
        let p = PenaltySpec::new(0.5, 0.5).unwrap();
        let f = fit_expectation(
            &same,
            Source::Fomc,
            TargetName::Ffr,
            p,
            &FitOptions::default(),
        )
        .unwrap();
        let n = fit_expectation(
            &same,
            Source::Nyt,
            TargetName::Ffr,
            p,
            &FitOptions::default(),
        )
        .unwrap();
        let g = expectation_gap(&f, &n, &same).unwrap();
        assert!(g.values.iter().all(|v| *v == 0.0));
        assert!(matches!(
            stage3_project(&g.values, &same.shock, HcType::HC1),
            Err(Error::DegenerateRegressor(_))
        ));
    }

    #[test]
    fn gap_equal_to_shock() {
        let shock = [0.1, -0.3, 0.25, 0.0, 0.4, -0.1];
        let f = stage3_project(&shock, &shock, HcType::HC1).unwrap();
        assert!(f.zeta().abs() < 1e-12);
        assert!((f.theta() - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_target_fits_intercept_only() {
        let mut s = toy();
        s.ffr = vec![2.5; s.len()];
        let m = fit_expectation(
            &s,
            Source::Nyt,
            TargetName::Ffr,
            PenaltySpec::new(0.1, 0.5).unwrap(),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(m.fit.coefficients.iter().all(|b| *b == 0.0));
        assert!((m.fit.intercept - 2.5).abs() < 1e-12);
        assert_eq!(m.stage2_r2, 0.0);
    }

    #[test]
    fn grid_argmax_and_identities() {
        let s = toy();
        let r = grid_search(&s, &small_opts()).unwrap();
        let max = r.surface.max().unwrap();
        let (i, j) = r.surface.argmax().unwrap();
        assert_eq!(r.selected.nyt, r.surface.nyt[i]);
        assert_eq!(r.selected.fomc, r.surface.fomc[j]);
        assert!((r.stage3.r2 - max).abs() < 1e-10);
        for t in 0..s.len() {
            assert!(
                (r.news[t] + r.monetary[t] - s.shock[t]).abs() <= 1e-10 * s.shock[t].abs().max(1.0)
            );
        }
        let cov = crate::linalg::covariance(&r.news, &r.monetary);
        assert!(cov.abs() < 1e-10);
    }

    #[test]
    fn caching_and_execution_do_not_change_results() {
        let s = toy();
        let a = grid_search(&s, &small_opts()).unwrap();
        let b = grid_search(
            &s,
            &DecompositionOptions {
                cache: false,
                ..small_opts()
            },
        )
        .unwrap();
        let c = grid_search(
            &s,
            &DecompositionOptions {
                execution: Execution::Sequential,
                ..small_opts()
            },
        )
        .unwrap();
        let same = |x: &GridSurface, y: &GridSurface| {
            x.r2.iter()
                .zip(&y.r2)
                .all(|(p, q)| p.to_bits() == q.to_bits())
        };
        assert!(same(&a.surface, &b.surface));
        assert!(same(&a.surface, &c.surface));
        assert_eq!(a.news, b.news);
    }

    #[test]
    fn coordinate_search_selects_max_of_visited_cells() {
        let s = toy();
        let opts = DecompositionOptions {
            mode: SearchMode::Coordinate,
            ..small_opts()
        };
        let r = grid_search(&s, &opts).unwrap();
        let (i, j) = r.surface.argmax().unwrap();
        assert_eq!(r.surface.get(i, j), r.surface.max().unwrap());
        assert_eq!(r.selected.nyt, r.surface.nyt[i]);
        let lazy = grid_search(
            &s,
            &DecompositionOptions {
                cache: false,
                ..opts
            },
        )
        .unwrap();
        assert_eq!(lazy.selected, r.selected);
    }

    #[test]
    fn single_cell_and_all_degenerate() {
        let s = toy();
        let p = PenaltySpec::new(0.05, 1.0).unwrap();
        let opts = DecompositionOptions {
            grid: GridSpec::single(p),
            ..DecompositionOptions::default()
        };
        let r = grid_search(&s, &opts).unwrap();
        assert_eq!(r.selected, Selection { nyt: p, fomc: p });

        let flat = AnalysisSample {
            ffr: vec![1.0; s.len()],
            ..s
        };
        let res = grid_search(&flat, &small_opts());
        assert!(matches!(res, Err(Error::NoValidCell(_))), "{res:?}");
    }

    #[test]
    fn demeaned_news_is_zero_mean() {
        let s = toy();
        let r = grid_search(
            &s,
            &DecompositionOptions {
                demeaned_news: true,
                ..small_opts()
            },
        )
        .unwrap();
        assert!(mean(&r.news).abs() < 1e-12);
        assert!((mean(&r.monetary) - mean(&r.shock)).abs() < 1e-12);
        for i in 0..r.shock.len() {
            assert!((r.news[i] + r.monetary[i] - r.shock[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn multi_r2_matches_ols() {
        let s = toy();
        let a: Vec<f64> = s.x_fomc.column(0).iter().copied().collect();
        let b: Vec<f64> = s.x_nyt.column(1).iter().copied().collect();
        let ols = ols_hc(
            &design_with_intercept(&[&a, &b]).unwrap(),
            &s.shock,
            HcType::HC1,
        )
        .unwrap();
        let r = multi_r2(&[&a, &b], &CenteredShock::new(&s.shock));
        assert!((r - ols.r2).abs() < 1e-12);
        assert!(multi_r2(&[&a, &a], &CenteredShock::new(&s.shock)).is_nan());
        let single = cell_r2(&a, &vec![0.0; a.len()], &CenteredShock::new(&s.shock));
        let ols1 = ols_hc(
            &design_with_intercept(&[&a]).unwrap(),
            &s.shock,
            HcType::HC1,
        )
        .unwrap();
        assert!((single - ols1.r2).abs() < 1e-12);
    }

    #[test]
    fn channel_missing_target_is_rejected() {
        let s = toy();
        assert!(matches!(
            channel_regression(&s, &[TargetName::Rgdp, TargetName::Cpi], &small_opts()),
            Err(Error::Validation(_))
        ));
        let r = channel_regression(&s, &[TargetName::Rgdp], &small_opts()).unwrap();
        assert_eq!(r.ols.coefficients.len(), 2);
    }
}
