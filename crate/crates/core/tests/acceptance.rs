//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Pass a substring as the first non-flag argument to run a subset, e.g.
//! `cargo test --test acceptance -- bvar`.

use std::cell::RefCell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use infoshock::bvar::{
    fit_bvarx, irf_exogenous, ols_coefficients, BvarOptions, BvarPosterior, Impulse, IrfOptions,
    MinnesotaPrior, Month, MonthlyPanel, VarxSpec,
};
use infoshock::dataset::{ShockName, Source, TargetName};
use infoshock::decomposition::{
    expectation_gap, fit_expectation, grid_search, short_regression_diagnostic, stage3_project,
    DecompositionOptions, DecompositionResult, GridSpec,
};
use infoshock::elastic_net::{self, FitOptions, PenaltySpec};
use infoshock::event_study::{run_event_study, Components};
use infoshock::par::Execution;
use infoshock::pipeline::{self, PipelineConfig};
use infoshock::regression::{design_with_intercept, ols_hc, HcType};
use infoshock::synth::{brute_force_elastic_net, generate, SynthConfig};
use infoshock::Error;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_matrix(rng: &mut ChaCha8Rng, t: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(t, d, |_, _| normal(rng))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_cov(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (a.len() - 1) as f64
}

/// Least squares with an intercept column through the SVD.
fn lstsq_with_intercept(x: &DMatrix<f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let (t, d) = x.shape();
    let z = DMatrix::from_fn(t, d + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let b = z
        .svd(true, true)
        .solve(&DVector::from_column_slice(y), 1e-14)
        .unwrap();
    (b[0], b.iter().skip(1).copied().collect())
}

// ---------------------------------------------------------------------------
// Decomposition identities, accumulated over every decomposition in the suite

#[derive(Default)]
struct IdentityLog {
    runs: usize,
    worst_additivity: f64,
    worst_cov: f64,
}

thread_local! {
    static IDENTITIES: RefCell<IdentityLog> = RefCell::new(IdentityLog::default());
}

fn record_identities(shock: &[f64], news: &[f64], monetary: &[f64]) {
    let scale = shock.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let add = shock
        .iter()
        .zip(news.iter().zip(monetary))
        .map(|(s, (n, m))| (n + m - s).abs())
        .fold(0.0, f64::max)
        / scale;
    let cov = sample_cov(news, monetary).abs();
    IDENTITIES.with(|l| {
        let mut l = l.borrow_mut();
        l.runs += 1;
        l.worst_additivity = l.worst_additivity.max(add);
        l.worst_cov = l.worst_cov.max(cov);
    });
}

fn record_result(r: &DecompositionResult) {
    record_identities(&r.shock, &r.news, &r.monetary);
}

// ---------------------------------------------------------------------------
// Elastic net

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let opts = FitOptions {
        standardize: false,
        ..FitOptions::default()
    };
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = rng.random_range(1..=3);
        let t = rng.random_range(d + 2..=10);
        let x = random_matrix(&mut rng, t, d);
        let beta: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let y: Vec<f64> = (0..t)
            .map(|i| {
                1.0 + (0..d).map(|j| x[(i, j)] * beta[j]).sum::<f64>() + 0.5 * normal(&mut rng)
            })
            .collect();
        let eta = if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(0.05..=1.0)
        };
        let lambda = if eta > 0.0 {
            elastic_net::lambda_max(&x, &y, eta, &opts).unwrap() * rng.random_range(0.01..1.1)
        } else {
            rng.random_range(0.0..5.0)
        };
        let p = PenaltySpec::new(lambda, eta).unwrap();
        let cd = elastic_net::fit(&x, &y, p, &opts).map_err(|e| e.to_string())?;
        let bf = brute_force_elastic_net(&x, &y, p, true).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&cd.coefficients, &bf.coefficients));
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("max coefficient gap {worst:.2e} over 50 problems in {secs:.2}s");
    ensure(worst <= 2e-3 && secs < 10.0, msg.clone())?;
    Ok(msg)
}

fn closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let raw = FitOptions {
        standardize: false,
        ..FitOptions::default()
    };

    // Orthonormal columns orthogonal to the intercept: centre, then QR.
    let (t, d) = (12, 4);
    let mut a = random_matrix(&mut rng, t, d);
    for j in 0..d {
        let m = a.column(j).mean();
        a.column_mut(j).add_scalar_mut(-m);
    }
    let q = a.qr().q();
    let y: Vec<f64> = (0..t).map(|_| 2.0 + normal(&mut rng)).collect();
    let z: Vec<f64> = (0..d)
        .map(|j| (0..t).map(|i| q[(i, j)] * y[i]).sum())
        .collect();
    let mut worst_ortho = 0.0f64;
    for &(lambda, eta) in &[
        (0.0, 1.0),
        (0.3, 1.0),
        (1.5, 1.0),
        (0.4, 0.0),
        (3.0, 0.0),
        (0.7, 0.5),
        (2.0, 0.25),
        (1.0, 0.9),
    ] {
        let p = PenaltySpec::new(lambda, eta).unwrap();
        let fit = elastic_net::fit(&q, &y, p, &raw).map_err(|e| e.to_string())?;
        for j in 0..d {
            let shrunk = z[j].signum() * (z[j].abs() - lambda * eta / 2.0).max(0.0);
            let expect = shrunk / (1.0 + lambda * (1.0 - eta));
            worst_ortho = worst_ortho.max((fit.coefficients[j] - expect).abs());
        }
    }
    ensure(
        worst_ortho < 1e-6,
        format!("orthonormal design off by {worst_ortho:.2e}"),
    )?;

    // λ at or above λ_max zeroes every coefficient exactly.
    let mut nonzero = 0;
    for seed in 0..20u64 {
        let mut r = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = random_matrix(&mut r, 30, 8);
        let y: Vec<f64> = (0..30)
            .map(|i| x[(i, 0)] - 0.5 * x[(i, 3)] + normal(&mut r))
            .collect();
        for standardize in [true, false] {
            let opts = FitOptions {
                standardize,
                ..FitOptions::default()
            };
            for eta in [0.05, 0.5, 1.0] {
                let top = elastic_net::lambda_max(&x, &y, eta, &opts).unwrap();
                for lambda in [top, 1.5 * top] {
                    let p = PenaltySpec::new(lambda, eta).unwrap();
                    let fit = elastic_net::fit(&x, &y, p, &opts).unwrap();
                    nonzero += fit.n_nonzero();
                }
            }
        }
    }
    ensure(
        nonzero == 0,
        format!("{nonzero} nonzero coefficients at lambda_max"),
    )?;

    // λ = 0 is least squares.
    let mut worst_ols = 0.0f64;
    for seed in 0..10u64 {
        let mut r = ChaCha8Rng::seed_from_u64(200 + seed);
        let x = random_matrix(&mut r, 40, 6);
        let y: Vec<f64> = (0..40)
            .map(|i| 0.3 + (0..6).map(|j| x[(i, j)] / (j + 1) as f64).sum::<f64>() + normal(&mut r))
            .collect();
        let (a0, b) = lstsq_with_intercept(&x, &y);
        for standardize in [true, false] {
            let opts = FitOptions {
                standardize,
                ..FitOptions::default()
            };
            let fit = elastic_net::fit(&x, &y, PenaltySpec::new(0.0, 1.0).unwrap(), &opts).unwrap();
            worst_ols = worst_ols
                .max(max_abs_diff(&fit.coefficients, &b))
                .max((fit.intercept - a0).abs());
        }
    }
    ensure(
        worst_ols < 1e-6,
        format!("lambda = 0 differs from OLS by {worst_ols:.2e}"),
    )?;
    Ok(format!(
        "orthonormal {worst_ortho:.1e}, zero above lambda_max, OLS at lambda = 0 within {worst_ols:.1e}"
    ))
}

// ---------------------------------------------------------------------------
// Decomposition

const RECOVERY_REPS: u64 = 200;

fn stage3_recovery() -> Outcome {
    let mut covered = 0;
    let mut slowest = Duration::ZERO;
    let mut thetas = Vec::new();
    for seed in 1..=RECOVERY_REPS {
        let cfg = SynthConfig {
            seed,
            ..SynthConfig::preset("recovery").unwrap()
        };
        let ds = generate(&cfg).map_err(|e| e.to_string())?;
        let sample = ds.sample(ShockName::Pns).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let r =
            grid_search(&sample, &DecompositionOptions::default()).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        record_result(&r);
        let (theta, se) = (r.stage3.theta(), r.stage3.theta_se());
        if (theta - cfg.theta).abs() <= 2.0 * se {
            covered += 1;
        }
        thetas.push(theta);
        if seed % 20 == 0 {
            eprintln!("  recovery: {seed}/{RECOVERY_REPS} replications, {covered} covered");
        }
    }
    thetas.sort_by(f64::total_cmp);
    let share = covered as f64 / RECOVERY_REPS as f64;
    let msg = format!(
        "{covered}/{RECOVERY_REPS} within 2 SE ({:.1}%, need 90%); median theta {:.3}; slowest replication {:.1}s",
        100.0 * share,
        thetas[thetas.len() / 2],
        slowest.as_secs_f64()
    );
    ensure(share >= 0.9 && slowest.as_secs_f64() < 60.0, msg.clone())?;
    Ok(msg)
}

fn extremes() -> Outcome {
    let cfg = SynthConfig {
        t: 30,
        d: 40,
        seed: 5,
        ..SynthConfig::default()
    };
    let ds = generate(&cfg).map_err(|e| e.to_string())?;
    let sample = ds.sample(ShockName::Pns).map_err(|e| e.to_string())?;
    let opts = FitOptions::default();
    let y = sample.target(TargetName::Ffr).unwrap();
    let top = [Source::Nyt, Source::Fomc]
        .iter()
        .map(|s| elastic_net::lambda_max(sample.x(*s), y, 1.0, &opts).unwrap())
        .fold(0.0, f64::max);

    let mut notes = Vec::new();
    for (label, p) in [
        ("interpolating", PenaltySpec::new(0.0, 1.0).unwrap()),
        ("null", PenaltySpec::new(top, 1.0).unwrap()),
    ] {
        let nyt = fit_expectation(&sample, Source::Nyt, TargetName::Ffr, p, &opts)
            .map_err(|e| e.to_string())?;
        let fomc = fit_expectation(&sample, Source::Fomc, TargetName::Ffr, p, &opts)
            .map_err(|e| e.to_string())?;
        let gap = expectation_gap(&fomc, &nyt, &sample).map_err(|e| e.to_string())?;
        let spread = gap.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        match stage3_project(&gap.values, &sample.shock, HcType::HC1) {
            Err(Error::DegenerateRegressor(_)) => {}
            Ok(fit) if fit.r2 == 0.0 => {}
            other => return Err(format!("{label}: stage 3 gave {other:?}")),
        }
        let searched = grid_search(
            &sample,
            &DecompositionOptions {
                grid: GridSpec::single(p),
                ..DecompositionOptions::default()
            },
        );
        ensure(
            matches!(searched, Err(Error::NoValidCell(_))),
            format!("{label}: grid search gave {searched:?}"),
        )?;
        notes.push(format!("{label} max |gap| {spread:.1e}"));
    }
    Ok(format!(
        "both extremes degenerate at stage 3 ({})",
        notes.join(", ")
    ))
}

fn identities() -> Outcome {
    for (seed, demeaned) in [(11, false), (12, true), (13, false)] {
        let cfg = SynthConfig {
            d: 40,
            seed,
            ..SynthConfig::default()
        };
        let ds = generate(&cfg).map_err(|e| e.to_string())?;
        for shock in ShockName::ALL {
            let s = ds.sample(shock).map_err(|e| e.to_string())?;
            let r = grid_search(
                &s,
                &DecompositionOptions {
                    demeaned_news: demeaned,
                    ..DecompositionOptions::default()
                },
            )
            .map_err(|e| e.to_string())?;
            record_result(&r);
        }
    }
    let (runs, add, cov) = IDENTITIES.with(|l| {
        let l = l.borrow();
        (l.runs, l.worst_additivity, l.worst_cov)
    });
    let msg = format!(
        "{runs} decompositions: worst relative additivity error {add:.1e}, worst |cov| {cov:.1e}"
    );
    ensure(add < 1e-10 && cov < 1e-10, msg.clone())?;
    Ok(msg)
}

fn omitted_variable() -> Outcome {
    let reps = 200;
    let mut slopes = Vec::with_capacity(reps);
    let mut expected = Vec::with_capacity(reps);
    let tiny = PenaltySpec::new(1e-6, 1.0).unwrap();
    for seed in 0..reps as u64 {
        let cfg = SynthConfig {
            d: 5,
            sparsity: 5,
            sigma_fomc: 0.01,
            seed: 1000 + seed,
            ..SynthConfig::default()
        };
        let ds = generate(&cfg).map_err(|e| e.to_string())?;
        let s = ds.sample(ShockName::Pns).map_err(|e| e.to_string())?;
        let fit =
            short_regression_diagnostic(&s, &s.shock, tiny, &FitOptions::default(), HcType::HC1)
                .map_err(|e| e.to_string())?;
        slopes.push(fit.coefficients[1]);

        // θ·cov(f_F, f_N)/var(f_F) with the embeddings' cross-correlation ρ.
        let g = &ds.truth;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let bias = g.theta * cfg.overlap * dot(&g.beta_fomc, &g.beta_nyt)
            / dot(&g.beta_fomc, &g.beta_fomc);
        expected.push(g.theta - bias);
    }
    let m = mean(&slopes);
    let sd = sample_cov(&slopes, &slopes).sqrt();
    let se = sd / (reps as f64).sqrt();
    let target = mean(&expected);
    let z = (m - target) / se;
    let msg = format!(
        "mean short slope {m:.4} vs theta - bias {target:.4} (true theta 0.5), {z:+.2} SE over {reps} reps"
    );
    ensure(z.abs() <= 3.0, msg.clone())?;
    Ok(msg)
}

// ---------------------------------------------------------------------------
// Robust standard errors and the event study

fn robust_se_and_separability() -> Outcome {
    let x = design_with_intercept(&[&[1.0, 2.0, 4.0]]).unwrap();
    let y = [1.0, 3.0, 2.0];
    // (X'X)⁻¹ X' diag(e²) X (X'X)⁻¹ worked out in exact fractions.
    let hc0 = [
        [325.0 / 392.0, -575.0 / 2744.0],
        [-575.0 / 2744.0, 25.0 / 392.0],
    ];
    let mut worst = 0.0f64;
    for (hc, scale) in [(HcType::HC0, 1.0), (HcType::HC1, 3.0)] {
        let f = ols_hc(&x, &y, hc).map_err(|e| e.to_string())?;
        worst = worst
            .max((f.coefficients[0] - 1.5).abs())
            .max((f.coefficients[1] - 3.0 / 14.0).abs());
        for (r, row) in hc0.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                worst = worst.max((f.robust_cov[(r, c)] - scale * v).abs());
            }
        }
        worst = worst.max((f.standard_errors[1] - (scale * hc0[1][1]).sqrt()).abs());
    }
    ensure(worst < 1e-12, format!("sandwich off by {worst:.2e}"))?;

    let cfg = SynthConfig {
        d: 40,
        seed: 3,
        ..SynthConfig::default()
    };
    let ds = generate(&cfg).map_err(|e| e.to_string())?;
    let s = ds.sample(ShockName::Pns).map_err(|e| e.to_string())?;
    let r = grid_search(&s, &DecompositionOptions::default()).map_err(|e| e.to_string())?;
    record_result(&r);
    let c = Components {
        keys: &r.keys,
        shock: &r.shock,
        news: &r.news,
        monetary: &r.monetary,
    };
    let rows = run_event_study(&ds.outcomes, &c, HcType::HC1, Execution::Sequential)
        .map_err(|e| e.to_string())?;
    let mut complete = 0;
    let mut sep = 0.0f64;
    for row in &rows {
        if row.n_obs != r.keys.len() {
            continue;
        }
        complete += 1;
        let series = ds.outcomes.get(&row.outcome).unwrap();
        let dr: Vec<f64> = r.keys.iter().map(|k| series[k]).collect();
        let slope = |v: &[f64]| {
            let (_, b) = lstsq_with_intercept(&DMatrix::from_column_slice(v.len(), 1, v), &dr);
            b[0]
        };
        sep = sep
            .max((row.gamma.coef - slope(&r.monetary)).abs())
            .max((row.mu.coef - slope(&r.news)).abs());
    }
    ensure(complete > 0, "no complete outcome")?;
    ensure(sep < 1e-10, format!("separability off by {sep:.2e}"))?;
    Ok(format!(
        "HC0/HC1 within {worst:.1e}; separability within {sep:.1e} on {complete} complete outcomes"
    ))
}

// ---------------------------------------------------------------------------
// BVAR

fn simulated_var(seed: u64, t: usize) -> (MonthlyPanel, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a1 = [[0.5, 0.1], [-0.2, 0.3]];
    let a2 = [[0.2, 0.0], [0.1, 0.1]];
    let c = [0.8, -0.4];
    let icpt = [0.1, 0.05];
    let mut y = DMatrix::zeros(t, 2);
    let x = DMatrix::from_fn(t, 1, |_, _| 0.5 * normal(&mut rng));
    for i in 2..t {
        for r in 0..2 {
            let mut v = icpt[r] + c[r] * x[(i, 0)] + 0.3 * normal(&mut rng);
            for j in 0..2 {
                v += a1[r][j] * y[(i - 1, j)] + a2[r][j] * y[(i - 2, j)];
            }
            y[(i, r)] = v;
        }
    }
    let months = Month::range(
        Month::new(1990, 1).unwrap(),
        Month::new(1990 + (t as i32 - 1) / 12, ((t - 1) % 12) as u32 + 1).unwrap(),
    );
    let panel = MonthlyPanel::new(months, vec!["a".into(), "b".into()], y).unwrap();
    (panel, x)
}

fn var_spec() -> VarxSpec {
    VarxSpec {
        endogenous: vec!["a".into(), "b".into()],
        exogenous: vec!["x".into()],
        lags: 2,
        exog_lags: 0,
        intercept: true,
    }
}

/// Normal-equation least squares on the stacked design: lags first
/// (`(l-1)·n + j`), then the exogenous series, then the intercept.
fn var_ols_oracle(y: &DMatrix<f64>, x: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    let (t, n) = y.shape();
    let k = n * p + x.ncols() + 1;
    let rows = t - p;
    let mut z = DMatrix::zeros(rows, k);
    for r in 0..rows {
        for l in 1..=p {
            for j in 0..n {
                z[(r, (l - 1) * n + j)] = y[(r + p - l, j)];
            }
        }
        for s in 0..x.ncols() {
            z[(r, n * p + s)] = x[(r + p, s)];
        }
        z[(r, k - 1)] = 1.0;
    }
    let yy = y.rows(p, rows).into_owned();
    let ztz = z.transpose() * &z;
    ztz.cholesky().unwrap().solve(&(z.transpose() * yy))
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn bvar_checks() -> Outcome {
    let (panel, x) = simulated_var(31, 400);
    let spec = var_spec();
    let oracle = var_ols_oracle(&panel.data, &x, spec.lags);
    let opts = BvarOptions {
        n_draws: 1000,
        seed: 17,
        execution: Execution::Parallel,
    };

    let flat = MinnesotaPrior {
        lambda1: 1e6,
        ..MinnesotaPrior::default()
    };
    let post = fit_bvarx(&panel, &x, &spec, &flat, &opts).map_err(|e| e.to_string())?;
    let flat_gap = max_abs(&(&post.mean - &oracle));
    let lib_ols = ols_coefficients(&panel, &x, &spec).map_err(|e| e.to_string())?;
    let ols_gap = max_abs(&(&lib_ols - &oracle));
    ensure(
        flat_gap < 1e-4 && ols_gap < 1e-8,
        format!("flat prior {flat_gap:.2e} from OLS, library OLS {ols_gap:.2e}"),
    )?;

    let dogmatic = MinnesotaPrior {
        own_lag_mean: 0.9,
        lambda1: 1e-8,
        lambda4: 1.0,
        ..MinnesotaPrior::default()
    };
    let post_d = fit_bvarx(&panel, &x, &spec, &dogmatic, &opts).map_err(|e| e.to_string())?;
    let mut prior_mean = DMatrix::zeros(spec.k(), spec.n());
    for j in 0..spec.n() {
        prior_mean[(j, j)] = 0.9;
    }
    let dog_gap = max_abs(&(&post_d.mean - &prior_mean));
    ensure(
        dog_gap < 1e-6,
        format!("dogmatic prior {dog_gap:.2e} from prior mean"),
    )?;

    let ar1 = VarxSpec {
        endogenous: vec!["y".into()],
        exogenous: vec!["x".into()],
        lags: 1,
        exog_lags: 0,
        intercept: false,
    };
    let degenerate = BvarPosterior::degenerate(
        ar1,
        DMatrix::from_column_slice(2, 1, &[0.5, 1.0]),
        DMatrix::identity(1, 1),
    )
    .map_err(|e| e.to_string())?;
    let irf = irf_exogenous(
        &degenerate,
        &IrfOptions {
            horizon: 48,
            impulse: Impulse::Unit,
            ..IrfOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut power = 1.0;
    for b in &irf.bands[0] {
        ensure(
            [b.median, b.lo66, b.hi66, b.lo90, b.hi90]
                .iter()
                .all(|v| *v == power),
            format!("AR(1) response {} != {power}", b.median),
        )?;
        power *= 0.5;
    }

    let default_post = fit_bvarx(&panel, &x, &spec, &MinnesotaPrior::default(), &opts)
        .map_err(|e| e.to_string())?;
    let bands = irf_exogenous(
        &default_post,
        &IrfOptions {
            horizon: 24,
            ..IrfOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let nested =
        bands.bands.iter().flatten().all(|b| {
            b.lo90 <= b.lo66 && b.lo66 <= b.median && b.median <= b.hi66 && b.hi66 <= b.hi90
        });
    ensure(nested, "66% band not inside the 90% band")?;

    let seq = fit_bvarx(
        &panel,
        &x,
        &spec,
        &MinnesotaPrior::default(),
        &BvarOptions {
            execution: Execution::Sequential,
            ..opts
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(
        seq.draws == default_post.draws,
        "draws differ between runs with the same seed",
    )?;
    let other = fit_bvarx(
        &panel,
        &x,
        &spec,
        &MinnesotaPrior::default(),
        &BvarOptions { seed: 18, ..opts },
    )
    .map_err(|e| e.to_string())?;
    ensure(
        other.draws != default_post.draws,
        "seed has no effect on draws",
    )?;

    Ok(format!(
        "flat prior {flat_gap:.1e} from OLS, dogmatic {dog_gap:.1e} from prior mean, AR(1) exact to h=48, bands nested, draws reproducible"
    ))
}

// ---------------------------------------------------------------------------
// Pipeline

fn pipeline_config(dir: &Path, out: &str, jobs: usize, sc: &SynthConfig) -> PipelineConfig {
    PipelineConfig {
        seed: sc.seed,
        jobs,
        out_dir: PathBuf::from(out),
        data: pipeline::DataPaths {
            embeddings: "embeddings.csv".into(),
            targets: "targets.csv".into(),
            shocks: "shocks.csv".into(),
            outcomes: "outcomes.csv".into(),
            macro_panel: "macro.csv".into(),
            embedding_dim: sc.d,
        },
        sample: Default::default(),
        decomposition: Default::default(),
        channels: Default::default(),
        bvar: pipeline::BvarConfig {
            n_draws: 500,
            ..Default::default()
        },
        base_dir: dir.to_path_buf(),
    }
}

const OUTPUT_FILES: [&str; 6] = [
    "table1.csv",
    "table2.csv",
    "event_study.csv",
    "table5.csv",
    "series.csv",
    "irf.csv",
];

struct PipelineRuns {
    _dir: tempfile::TempDir,
    outs: Vec<PathBuf>,
}

fn pipeline_runs() -> Result<PipelineRuns, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sc = SynthConfig {
        d: 40,
        seed: 9,
        ..SynthConfig::default()
    };
    generate(&sc)
        .and_then(|ds| ds.write(dir.path()))
        .map_err(|e| e.to_string())?;
    let mut outs = Vec::new();
    for (name, jobs) in [("a", 0), ("b", 0), ("c", 1)] {
        let cfg = pipeline_config(dir.path(), name, jobs, &sc);
        let m = pipeline::run(&cfg).map_err(|e| e.to_string())?;
        let series =
            pipeline::Series::read(&cfg.out_dir().join("series.csv")).map_err(|e| e.to_string())?;
        record_identities(&series.shock, &series.news, &series.monetary);
        ensure(
            m.artifacts.len() == OUTPUT_FILES.len(),
            "artifact list incomplete",
        )?;
        outs.push(cfg.out_dir());
    }
    Ok(PipelineRuns { _dir: dir, outs })
}

fn determinism(runs: &PipelineRuns) -> Outcome {
    let mut bytes = 0;
    for f in OUTPUT_FILES {
        let first = std::fs::read(runs.outs[0].join(f)).map_err(|e| format!("{f}: {e}"))?;
        for other in &runs.outs[1..] {
            let b = std::fs::read(other.join(f)).map_err(|e| format!("{f}: {e}"))?;
            ensure(b == first, format!("{f} differs between runs"))?;
        }
        bytes += first.len();
    }
    Ok(format!(
        "{} CSVs ({bytes} bytes) identical across two parallel runs and one sequential run",
        OUTPUT_FILES.len()
    ))
}

fn table_shapes(runs: &PipelineRuns) -> Outcome {
    let expected: [(&str, &[&str], usize); 6] = [
        (
            "table1.csv",
            &["subsample", "shock", "r2", "theta", "se", "t", "p"],
            6,
        ),
        (
            "table2.csv",
            &[
                "subsample",
                "shock",
                "eta_nyt",
                "lambda_nyt",
                "r2_nyt",
                "eta_fomc",
                "lambda_fomc",
                "r2_fomc",
            ],
            6,
        ),
        (
            "event_study.csv",
            &[
                "outcome",
                "beta",
                "beta_se",
                "beta_stars",
                "gamma",
                "gamma_se",
                "gamma_stars",
                "mu",
                "mu_se",
                "mu_stars",
                "n_obs",
            ],
            10,
        ),
        (
            "table5.csv",
            &[
                "subsample",
                "shock",
                "r2",
                "theta_rgdp",
                "p_rgdp",
                "theta_cpi",
                "p_cpi",
            ],
            6,
        ),
        ("series.csv", &["date", "shock", "news", "monetary"], 106),
        (
            "irf.csv",
            &[
                "variable", "horizon", "median", "lo66", "hi66", "lo90", "hi90",
            ],
            3 * 49,
        ),
    ];
    for (file, header, rows) in expected {
        let mut r = csv::Reader::from_path(runs.outs[0].join(file)).map_err(|e| e.to_string())?;
        let got: Vec<String> = r
            .headers()
            .map_err(|e| e.to_string())?
            .iter()
            .map(str::to_string)
            .collect();
        ensure(got == header, format!("{file} header {got:?}"))?;
        let n = r.records().count();
        ensure(n == rows, format!("{file} has {n} rows, expected {rows}"))?;
        for rec in csv::Reader::from_path(runs.outs[0].join(file))
            .map_err(|e| e.to_string())?
            .records()
        {
            let rec = rec.map_err(|e| e.to_string())?;
            ensure(rec.len() == header.len(), format!("ragged row in {file}"))?;
        }
    }
    Ok("tables 1, 2, 3/4, 5, the series file and the IRF file have the expected columns".into())
}

// ---------------------------------------------------------------------------

struct Suite {
    filter: Option<String>,
    failed: Vec<&'static str>,
    ran: usize,
}

impl Suite {
    fn wants(&self, name: &str) -> bool {
        self.filter.as_deref().is_none_or(|f| name.contains(f))
    }

    fn check(&mut self, name: &'static str, f: impl FnOnce() -> Outcome) {
        if !self.wants(name) {
            return;
        }
        self.ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS  {name}: {msg} [{secs:.1}s]"),
            Err(msg) => {
                println!("FAIL  {name}: {msg} [{secs:.1}s]");
                self.failed.push(name);
            }
        }
    }
}

fn main() -> ExitCode {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut suite = Suite {
        filter,
        failed: Vec::new(),
        ran: 0,
    };
    suite.check("elastic net oracle equivalence", oracle_equivalence);
    suite.check("elastic net closed forms", closed_forms);
    suite.check("stage 3 recovery", stage3_recovery);
    suite.check("stage 2 extremes", extremes);
    suite.check("omitted variable bias", omitted_variable);
    suite.check(
        "robust SE oracle and separability",
        robust_se_and_separability,
    );
    suite.check("bvar", bvar_checks);
    if suite.wants("pipeline determinism")
        || suite.wants("table shapes")
        || suite.wants("decomposition identities")
    {
        let runs = catch_unwind(pipeline_runs).unwrap_or_else(|_| Err("pipeline panicked".into()));
        match runs {
            Ok(runs) => {
                suite.check("pipeline determinism", || determinism(&runs));
                suite.check("table shapes", || table_shapes(&runs));
            }
            Err(e) => {
                suite.check("pipeline determinism", || Err(e.clone()));
                suite.check("table shapes", || Err(e.clone()));
            }
        }
    }
    suite.check("decomposition identities", identities);

    println!(
        "\nacceptance: {} passed, {} failed",
        suite.ran - suite.failed.len(),
        suite.failed.len()
    );
    if suite.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
