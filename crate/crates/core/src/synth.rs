//! Synthetic data with known ground truth.
//!
//! Embeddings share a common factor across sources:
//!
//! ```text
//! X_F = √ρ·F + √(1-ρ)·U_F      X_N = √ρ·F + √(1-ρ)·U_N
//! ```
//!
//! with independent standard normal `F, U_F, U_N`, so each source's columns
//! have unit variance and `ρ` is the cross-source correlation. The FOMC
//! expectation is `f_F = α* + X_F β*` with sparse `β*`, the funds rate is
//! `f_F + ε`, and the best NYT predictor is `α* + ρ X_N β*`. The true gap
//! is therefore `(X_F - ρ X_N) β*`, and the shock is `ζ* + θ*·gap + ν`.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bvar::{aggregate_to_monthly, write_monthly_panel, Month, MonthlyPanel, MACRO_COLUMNS};
use crate::dataset::{
    self, AnalysisSample, EmbeddingPanel, MeetingKey, OutcomePanel, ShockName, ShockPanel,
    ShockSeries, Source, TargetName, TargetPanel, TargetSeries, Units, KNOWN_OUTCOMES,
};
use crate::elastic_net::PenaltySpec;
use crate::error::{Error, Result};

/// Month and day of the eight scheduled meetings in every synthetic year.
pub const MEETING_DAYS: [(u32, u32); 8] = [
    (1, 31),
    (3, 21),
    (5, 16),
    (6, 28),
    (8, 22),
    (10, 3),
    (11, 15),
    (12, 19),
];

/// Share of meetings (from the end of the sample) with TIPS data, per TIPS
/// outcome, as `(present, of)`.
const TIPS_COVERAGE: [(&str, usize); 4] = [
    ("TIPS Real 2 years", 74),
    ("TIPS Real 5 years", 82),
    ("TIPS Real 10 years", 82),
    ("TIPS Real 20 years", 70),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Number of meetings.
    pub t: usize,
    /// Embedding dimension.
    pub d: usize,
    /// Nonzero entries of each true coefficient vector.
    pub sparsity: usize,
    /// Magnitude of each nonzero true coefficient.
    pub beta_scale: f64,
    /// Cross-source correlation of the embeddings.
    pub overlap: f64,
    pub alpha: f64,
    /// SD of the funds-rate noise around the FOMC expectation. The NYT
    /// residual is this noise plus the true gap.
    pub sigma_fomc: f64,
    /// SD of the stage-3 error ν.
    pub sigma_nu: f64,
    pub zeta: f64,
    pub theta: f64,
    /// Loadings of the channel shock (FF4 column) on the RGDP and CPI gaps.
    pub channel_theta: [f64; 2],
    pub sigma_macro_target: f64,
    pub sigma_outcome: f64,
    pub first_year: i32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            t: 106,
            d: dataset::EMBEDDING_DIM,
            sparsity: 5,
            beta_scale: 0.5,
            overlap: 0.6,
            alpha: 8.0,
            sigma_fomc: 0.25,
            sigma_nu: 0.8,
            zeta: 0.0,
            theta: 0.5,
            channel_theta: [0.4, 0.3],
            sigma_macro_target: 0.25,
            sigma_outcome: 0.05,
            first_year: 2000,
            seed: 1,
        }
    }
}

impl SynthConfig {
    /// Named configurations: `recovery`, `null`, `noiseless`, `small`.
    pub fn preset(name: &str) -> Result<Self> {
        let base = SynthConfig::default();
        Ok(match name {
            // One informative coordinate that the NYT sees almost fully,
            // with a precisely measured funds rate.
            "recovery" => SynthConfig {
                sparsity: 1,
                beta_scale: 1.0,
                overlap: 0.99,
                sigma_fomc: 0.05,
                sigma_nu: 0.126,
                ..base
            },
            "null" => SynthConfig {
                theta: 0.0,
                channel_theta: [0.0, 0.0],
                ..base
            },
            "noiseless" => SynthConfig {
                d: 5,
                sigma_fomc: 0.0,
                sigma_nu: 0.0,
                sigma_macro_target: 0.0,
                sigma_outcome: 0.0,
                ..base
            },
            "small" => SynthConfig { d: 40, ..base },
            other => {
                return Err(Error::Config(format!(
                    "unknown preset '{other}' (expected recovery, null, noiseless, small)"
                )))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.t < 8 {
            return bad(format!("t must be >= 8, got {}", self.t));
        }
        if self.d == 0 {
            return bad("d must be >= 1".into());
        }
        if self.sparsity == 0 || self.sparsity > self.d {
            return bad(format!(
                "sparsity must lie in 1..={}, got {}",
                self.d, self.sparsity
            ));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return bad(format!("overlap must lie in [0, 1], got {}", self.overlap));
        }
        for (name, v) in [
            ("sigma_fomc", self.sigma_fomc),
            ("sigma_nu", self.sigma_nu),
            ("sigma_macro_target", self.sigma_macro_target),
            ("sigma_outcome", self.sigma_outcome),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// Known quantities behind one generated dataset. Vectors are aligned with
/// the meeting calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub alpha: f64,
    pub beta_fomc: Vec<f64>,
    /// Coefficients of the best NYT predictor, `ρ β*`.
    pub beta_nyt: Vec<f64>,
    pub zeta: f64,
    pub theta: f64,
    pub fomc_expectation: Vec<f64>,
    pub nyt_expectation: Vec<f64>,
    pub gap: Vec<f64>,
    pub news: Vec<f64>,
    pub monetary: Vec<f64>,
    /// RGDP and CPI gaps behind the FF4 column.
    pub channel_gaps: [Vec<f64>; 2],
    pub channel_theta: [f64; 2],
    /// Per outcome: (monetary response, news response).
    pub outcome_loadings: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub config: SynthConfig,
    pub keys: Vec<MeetingKey>,
    pub fomc: EmbeddingPanel,
    pub nyt: EmbeddingPanel,
    pub targets: TargetPanel,
    pub shocks: ShockPanel,
    pub outcomes: OutcomePanel,
    pub macro_panel: MonthlyPanel,
    pub truth: GroundTruth,
}

pub fn meeting_calendar(first_year: i32, t: usize) -> Vec<MeetingKey> {
    (0..t)
        .map(|i| {
            let (m, d) = MEETING_DAYS[i % 8];
            MeetingKey(
                NaiveDate::from_ymd_opt(first_year + (i / 8) as i32, m, d)
                    .expect("valid calendar date"),
            )
        })
        .collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn sparse_vector(rng: &mut ChaCha8Rng, d: usize, s: usize, scale: f64) -> Vec<f64> {
    let mut b = vec![0.0; d];
    for j in sample_indices(rng, d, s).into_iter() {
        b[j] = if rng.random::<bool>() { scale } else { -scale };
    }
    b
}

fn mat_vec(x: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.nrows()];
    for (j, bj) in b.iter().enumerate() {
        if *bj != 0.0 {
            for (o, v) in out.iter_mut().zip(x.column(j).iter()) {
                *o += bj * v;
            }
        }
    }
    out
}

fn to_map(keys: &[MeetingKey], v: &[f64]) -> BTreeMap<MeetingKey, f64> {
    keys.iter().copied().zip(v.iter().copied()).collect()
}

pub fn generate(config: &SynthConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let c = config;
    let (t, d) = (c.t, c.d);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let keys = meeting_calendar(c.first_year, t);

    let (a, b) = (c.overlap.sqrt(), (1.0 - c.overlap).sqrt());
    let mut xf = DMatrix::zeros(t, d);
    let mut xn = DMatrix::zeros(t, d);
    for j in 0..d {
        for i in 0..t {
            let f = normal(&mut rng);
            xf[(i, j)] = a * f + b * normal(&mut rng);
            xn[(i, j)] = a * f + b * normal(&mut rng);
        }
    }

    let beta = sparse_vector(&mut rng, d, c.sparsity, c.beta_scale);
    let beta_rgdp = sparse_vector(&mut rng, d, c.sparsity, c.beta_scale);
    let beta_cpi = sparse_vector(&mut rng, d, c.sparsity, c.beta_scale);

    let rho = c.overlap;
    let scaled = |bv: &[f64]| -> Vec<f64> { bv.iter().map(|v| rho * v).collect() };
    let xf_b = mat_vec(&xf, &beta);
    let xn_b = mat_vec(&xn, &scaled(&beta));
    let fomc_exp: Vec<f64> = xf_b.iter().map(|v| c.alpha + v).collect();
    let nyt_exp: Vec<f64> = xn_b.iter().map(|v| c.alpha + v).collect();
    let gap: Vec<f64> = xf_b.iter().zip(&xn_b).map(|(f, n)| f - n).collect();

    let ffr: Vec<f64> = fomc_exp
        .iter()
        .map(|f| f + c.sigma_fomc * normal(&mut rng))
        .collect();
    if let Some(v) = ffr.iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "generated funds rate {v} is negative; raise alpha"
        )));
    }

    let channel = |bv: &[f64]| -> Vec<f64> {
        mat_vec(&xf, bv)
            .iter()
            .zip(mat_vec(&xn, &scaled(bv)))
            .map(|(f, n)| f - n)
            .collect()
    };
    let gap_rgdp = channel(&beta_rgdp);
    let gap_cpi = channel(&beta_cpi);
    let rgdp: Vec<f64> = mat_vec(&xf, &beta_rgdp)
        .iter()
        .map(|v| 2.0 + v + c.sigma_macro_target * normal(&mut rng))
        .collect();
    let cpi: Vec<f64> = mat_vec(&xf, &beta_cpi)
        .iter()
        .map(|v| 2.5 + v + c.sigma_macro_target * normal(&mut rng))
        .collect();

    let news: Vec<f64> = gap.iter().map(|g| c.zeta + c.theta * g).collect();
    let monetary: Vec<f64> = (0..t).map(|_| c.sigma_nu * normal(&mut rng)).collect();
    let pns: Vec<f64> = news.iter().zip(&monetary).map(|(n, m)| n + m).collect();
    let ffr_surprise: Vec<f64> = news
        .iter()
        .map(|n| n + c.sigma_nu * normal(&mut rng))
        .collect();
    let ff4: Vec<f64> = (0..t)
        .map(|i| {
            c.zeta
                + c.channel_theta[0] * gap_rgdp[i]
                + c.channel_theta[1] * gap_cpi[i]
                + c.sigma_nu * normal(&mut rng)
        })
        .collect();

    let mut fomc = EmbeddingPanel::new(Source::Fomc, d);
    let mut nyt = EmbeddingPanel::new(Source::Nyt, d);
    for (i, k) in keys.iter().enumerate() {
        fomc.insert(*k, xf.row(i).iter().copied().collect())?;
        nyt.insert(*k, xn.row(i).iter().copied().collect())?;
    }
    let targets = TargetPanel {
        ffr: TargetSeries {
            name: TargetName::Ffr,
            values: to_map(&keys, &ffr),
        },
        rgdp: TargetSeries {
            name: TargetName::Rgdp,
            values: to_map(&keys, &rgdp),
        },
        cpi: TargetSeries {
            name: TargetName::Cpi,
            values: to_map(&keys, &cpi),
        },
    };
    let shocks = ShockPanel {
        declared_units: Units::Percent,
        series: [
            (ShockName::Pns, pns),
            (ShockName::FfrSurprise, ffr_surprise),
            (ShockName::Ff4, ff4),
        ]
        .into_iter()
        .map(|(name, v)| {
            (
                name,
                ShockSeries {
                    name,
                    declared_units: Units::Percent,
                    values: to_map(&keys, &v),
                },
            )
        })
        .collect(),
    };

    // Daily yield changes: larger monetary pass-through at the short end,
    // news loadings rising with maturity.
    let mut loadings = Vec::with_capacity(KNOWN_OUTCOMES.len());
    let mut series = Vec::with_capacity(KNOWN_OUTCOMES.len());
    let ref_t = 106usize;
    for (o, name) in KNOWN_OUTCOMES.iter().enumerate() {
        let gamma = 0.6 - 0.04 * o as f64;
        let mu = 0.8 + 0.05 * o as f64;
        loadings.push((gamma, mu));
        let present = TIPS_COVERAGE
            .iter()
            .find(|(n, _)| n == name)
            .map_or(t, |(_, p)| (t * p + ref_t / 2) / ref_t);
        let mut m = BTreeMap::new();
        for i in 0..t {
            let e = c.sigma_outcome * normal(&mut rng);
            if i >= t - present {
                m.insert(keys[i], gamma * monetary[i] + mu * news[i] + e);
            }
        }
        series.push(m);
    }
    let outcomes = OutcomePanel {
        names: KNOWN_OUTCOMES.iter().map(|s| s.to_string()).collect(),
        series,
    };

    let monthly = aggregate_to_monthly(&keys, &monetary, None)?;
    let macro_panel = simulate_macro(
        &monthly.months,
        &monthly.values,
        c.sigma_macro_target,
        &mut rng,
    )?;

    Ok(SyntheticDataset {
        config: c.clone(),
        keys,
        fomc,
        nyt,
        targets,
        shocks,
        outcomes,
        macro_panel,
        truth: GroundTruth {
            alpha: c.alpha,
            beta_fomc: beta.clone(),
            beta_nyt: scaled(&beta),
            zeta: c.zeta,
            theta: c.theta,
            fomc_expectation: fomc_exp,
            nyt_expectation: nyt_exp,
            gap,
            news,
            monetary,
            channel_gaps: [gap_rgdp, gap_cpi],
            channel_theta: c.channel_theta,
            outcome_loadings: loadings,
        },
    })
}

/// Stable VARX(1) driven by the monthly monetary shock.
fn simulate_macro(
    months: &[Month],
    shock: &[f64],
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<MonthlyPanel> {
    let a = [[0.5, 0.0, -0.1], [0.05, 0.6, 0.0], [0.0, 0.0, 0.8]];
    let cvec = [-0.5, -0.2, 0.3];
    let t = months.len();
    let mut data = DMatrix::zeros(t, 3);
    let mut prev = [0.0; 3];
    for i in 0..t {
        let mut y = [0.0; 3];
        for r in 0..3 {
            y[r] = (0..3).map(|j| a[r][j] * prev[j]).sum::<f64>()
                + cvec[r] * shock[i]
                + 0.3 * sigma.max(0.05) * normal(rng);
            data[(i, r)] = y[r];
        }
        prev = y;
    }
    MonthlyPanel::new(
        months.to_vec(),
        MACRO_COLUMNS.iter().map(|s| s.to_string()).collect(),
        data,
    )
}

impl SyntheticDataset {
    /// Aligned sample for one shock, no filters.
    pub fn sample(&self, shock: ShockName) -> Result<AnalysisSample> {
        let (s, _) = dataset::build_sample(
            &self.fomc,
            &self.nyt,
            &self.targets,
            self.shocks.get(shock),
            &dataset::SampleFilter::none(),
        )?;
        Ok(s)
    }

    /// Writes the input files the pipeline reads: `embeddings.csv`,
    /// `targets.csv`, `shocks.csv`, `outcomes.csv`, `macro.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        dataset::write_embeddings(dir.join("embeddings.csv"), &[&self.fomc, &self.nyt])?;
        dataset::write_targets(dir.join("targets.csv"), &self.targets)?;
        dataset::write_shocks(dir.join("shocks.csv"), &self.shocks)?;
        dataset::write_outcomes(dir.join("outcomes.csv"), &self.outcomes)?;
        write_monthly_panel(dir.join("macro.csv"), &self.macro_panel)
    }
}

/// Coefficients minimizing the elastic-net objective found by lattice search.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceSolution {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub objective: f64,
}

pub const BRUTE_FORCE_STEP: f64 = 1e-3;
const BRUTE_MAX_DIM: usize = 3;
const BRUTE_MAX_ROWS: usize = 10;
const WINDOW: i64 = 10;

/// Objective with an unpenalized intercept profiled out (or absent).
fn profiled_objective(
    x: &DMatrix<f64>,
    y: &[f64],
    b: &[f64],
    p: &PenaltySpec,
    fit_intercept: bool,
) -> (f64, f64) {
    let t = y.len();
    let mut r: Vec<f64> = (0..t)
        .map(|i| y[i] - (0..b.len()).map(|j| x[(i, j)] * b[j]).sum::<f64>())
        .collect();
    let alpha = if fit_intercept {
        r.iter().sum::<f64>() / t as f64
    } else {
        0.0
    };
    r.iter_mut().for_each(|v| *v -= alpha);
    let rss: f64 = r.iter().map(|v| v * v).sum();
    let l1: f64 = b.iter().map(|v| v.abs()).sum();
    let l2: f64 = b.iter().map(|v| v * v).sum();
    (
        rss + p.lambda * p.eta * l1 + p.lambda * (1.0 - p.eta) * l2,
        alpha,
    )
}

/// Lattice search over coefficients for the elastic-net objective with an
/// unpenalized intercept, on the raw column scale.
///
/// The lattice is made of multiples of the step, so exact zeros are always
/// candidates. The search starts on a coarse lattice covering a box around
/// the least-squares solution, re-centres each window until its best point
/// is interior, and refines by factors of ten down to [`BRUTE_FORCE_STEP`].
pub fn brute_force_elastic_net(
    x: &DMatrix<f64>,
    y: &[f64],
    penalty: PenaltySpec,
    fit_intercept: bool,
) -> Result<BruteForceSolution> {
    penalty.validate()?;
    let (t, d) = x.shape();
    if d > BRUTE_MAX_DIM || t > BRUTE_MAX_ROWS {
        return Err(Error::InvalidParameter(format!(
            "brute-force oracle limited to d <= {BRUTE_MAX_DIM} and T <= {BRUTE_MAX_ROWS}, got d={d}, T={t}"
        )));
    }
    if y.len() != t || d == 0 {
        return Err(Error::Dimension("X and y do not conform".into()));
    }

    // least-squares anchor for the search box
    let (xc, yc) = if fit_intercept {
        let ym = y.iter().sum::<f64>() / t as f64;
        let mut xc = x.clone();
        for j in 0..d {
            let m = x.column(j).sum() / t as f64;
            xc.column_mut(j).add_scalar_mut(-m);
        }
        (xc, y.iter().map(|v| v - ym).collect::<Vec<_>>())
    } else {
        (x.clone(), y.to_vec())
    };
    let ls = xc
        .clone()
        .svd(true, true)
        .solve(&nalgebra::DVector::from_vec(yc), 1e-12)
        .map_err(|e| Error::SingularDesign(e.to_string()))?;
    let half_width = ls.iter().map(|v| v.abs()).fold(0.0, f64::max) + 1.0;

    let mut step = 10f64
        .powf((2.0 * half_width / 40.0).log10().ceil())
        .max(BRUTE_FORCE_STEP);
    let mut centre: Vec<i64> = ls.iter().map(|v| (v / step).round() as i64).collect();
    let eval = |idx: &[i64], h: f64| -> f64 {
        let b: Vec<f64> = idx.iter().map(|i| *i as f64 * h).collect();
        profiled_objective(x, y, &b, &penalty, fit_intercept).0
    };
    let mut radius = ((half_width / step).ceil() as i64).max(WINDOW);
    loop {
        // pattern search on the current lattice
        loop {
            let (best, interior) = window_min(&centre, radius, step, &eval);
            let moved = best != centre;
            centre = best;
            radius = WINDOW;
            if interior || !moved {
                break;
            }
        }
        if step <= BRUTE_FORCE_STEP * 1.000001 {
            break;
        }
        step /= 10.0;
        centre.iter_mut().for_each(|c| *c *= 10);
    }
    let coefficients: Vec<f64> = centre.iter().map(|i| *i as f64 * step).collect();
    let (objective, intercept) = profiled_objective(x, y, &coefficients, &penalty, fit_intercept);
    Ok(BruteForceSolution {
        intercept,
        coefficients,
        objective,
    })
}

/// Best lattice point within `radius` steps of `centre` (ties: first in
/// lexicographic order) and whether it lies strictly inside the window.
fn window_min(
    centre: &[i64],
    radius: i64,
    step: f64,
    eval: &dyn Fn(&[i64], f64) -> f64,
) -> (Vec<i64>, bool) {
    let d = centre.len();
    let width = 2 * radius + 1;
    let total = (width as u64).pow(d as u32);
    let mut best = (f64::INFINITY, centre.to_vec());
    let mut idx = vec![0i64; d];
    for n in 0..total {
        let mut rem = n;
        for k in 0..d {
            idx[k] = centre[k] - radius + (rem % width as u64) as i64;
            rem /= width as u64;
        }
        let v = eval(&idx, step);
        if v < best.0 {
            best = (v, idx.clone());
        }
    }
    let interior = best
        .1
        .iter()
        .zip(centre)
        .all(|(b, c)| (b - c).abs() < radius);
    (best.1, interior)
}
