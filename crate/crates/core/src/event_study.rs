//! Daily rate responses to a shock and to its news and monetary parts.
//!
//! For every outcome two regressions are run on the same rows:
//! `Δr = α₀ + β·shock` and `Δr = α₁ + γ·monetary + μ·news`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::dataset::{create, MeetingKey, OutcomePanel};
use crate::error::{Error, Result};
use crate::par::{map_slice, Execution};
use crate::regression::{design_with_intercept, ols_hc, HcType};

/// Outcomes with this many observations or fewer are skipped.
pub const MIN_OBS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub coef: f64,
    pub se: f64,
    pub p: f64,
}

impl Estimate {
    pub fn stars(&self) -> &'static str {
        stars(self.p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventStudyRow {
    pub outcome: String,
    pub beta: Estimate,
    pub gamma: Estimate,
    pub mu: Estimate,
    pub n_obs: usize,
}

pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Component series aligned on meeting keys.
#[derive(Debug, Clone, Copy)]
pub struct Components<'a> {
    pub keys: &'a [MeetingKey],
    pub shock: &'a [f64],
    pub news: &'a [f64],
    pub monetary: &'a [f64],
}

impl Components<'_> {
    fn validate(&self) -> Result<()> {
        let n = self.keys.len();
        if self.shock.len() != n || self.news.len() != n || self.monetary.len() != n {
            return Err(Error::Dimension(
                "shock, news and monetary must match the key count".into(),
            ));
        }
        Ok(())
    }
}

fn estimate(fit: &crate::regression::OlsFit, i: usize) -> Estimate {
    Estimate {
        coef: fit.coefficients[i],
        se: fit.standard_errors[i],
        p: fit.p_values[i],
    }
}

/// Fits both equations for one outcome, using rows where the outcome is present.
pub fn fit_outcome(
    name: &str,
    values: &BTreeMap<MeetingKey, f64>,
    c: &Components<'_>,
    hc: HcType,
) -> Result<Option<EventStudyRow>> {
    c.validate()?;
    let mut y = Vec::new();
    let mut shock = Vec::new();
    let mut news = Vec::new();
    let mut monetary = Vec::new();
    for (i, k) in c.keys.iter().enumerate() {
        if let Some(v) = values.get(k) {
            y.push(*v);
            shock.push(c.shock[i]);
            news.push(c.news[i]);
            monetary.push(c.monetary[i]);
        }
    }
    if y.len() <= MIN_OBS {
        log::warn!("outcome {name}: {} observations, skipped", y.len());
        return Ok(None);
    }
    let short = ols_hc(&design_with_intercept(&[&shock])?, &y, hc)?;
    let long = ols_hc(&design_with_intercept(&[&monetary, &news])?, &y, hc)?;
    Ok(Some(EventStudyRow {
        outcome: name.to_string(),
        beta: estimate(&short, 1),
        gamma: estimate(&long, 1),
        mu: estimate(&long, 2),
        n_obs: y.len(),
    }))
}

/// Runs the event study for every outcome in panel order.
pub fn run_event_study(
    outcomes: &OutcomePanel,
    components: &Components<'_>,
    hc: HcType,
    exec: Execution,
) -> Result<Vec<EventStudyRow>> {
    components.validate()?;
    let idx: Vec<usize> = (0..outcomes.names.len()).collect();
    let rows = map_slice(&idx, exec, |&i| {
        fit_outcome(&outcomes.names[i], &outcomes.series[i], components, hc)
    });
    let mut out = Vec::new();
    for r in rows {
        if let Some(row) = r? {
            out.push(row);
        }
    }
    Ok(out)
}

pub const CSV_COLUMNS: [&str; 11] = [
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
];

pub fn write_csv(path: impl AsRef<Path>, rows: &[EventStudyRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", CSV_COLUMNS.join(",")).map_err(io)?;
    for r in rows {
        write!(w, "{}", r.outcome).map_err(io)?;
        for e in [&r.beta, &r.gamma, &r.mu] {
            write!(w, ",{},{},{}", e.coef, e.se, e.stars()).map_err(io)?;
        }
        writeln!(w, ",{}", r.n_obs).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Renders rows as an aligned text table: coefficient with stars, standard
/// error in parentheses on the line below, then the observation count.
pub fn render_table(title: &str, rows: &[EventStudyRow]) -> String {
    let cell = |e: &Estimate| format!("{:.3}{}", e.coef, e.stars());
    let se = |e: &Estimate| format!("({:.3})", e.se);
    let name_w = rows
        .iter()
        .map(|r| r.outcome.len())
        .chain(["Outcome".len()])
        .max()
        .unwrap_or(7);
    let w = 12;
    let mut s = String::new();
    let _ = writeln!(s, "{title}");
    let _ = writeln!(
        s,
        "{:<name_w$} {:>w$} {:>w$} {:>w$} {:>6}",
        "Outcome", "beta", "gamma", "mu", "N"
    );
    let _ = writeln!(s, "{}", "-".repeat(name_w + 3 * (w + 1) + 7));
    for r in rows {
        let _ = writeln!(
            s,
            "{:<name_w$} {:>w$} {:>w$} {:>w$} {:>6}",
            r.outcome,
            cell(&r.beta),
            cell(&r.gamma),
            cell(&r.mu),
            r.n_obs
        );
        let _ = writeln!(
            s,
            "{:<name_w$} {:>w$} {:>w$} {:>w$}",
            "",
            se(&r.beta),
            se(&r.gamma),
            se(&r.mu)
        );
    }
    let _ = writeln!(
        s,
        "Robust standard errors in parentheses. *** p<0.01, ** p<0.05, * p<0.1"
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(n: usize) -> Vec<MeetingKey> {
        (0..n)
            .map(|i| MeetingKey::from_ymd(2000 + i as i32, 3, 1).unwrap())
            .collect()
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.009), "***");
        assert_eq!(stars(0.01), "**");
        assert_eq!(stars(0.049), "**");
        assert_eq!(stars(0.05), "*");
        assert_eq!(stars(0.0999), "*");
        assert_eq!(stars(0.1), "");
    }

    #[test]
    fn outcome_equal_to_shock() {
        let k = keys(8);
        let news = [0.1, -0.2, 0.3, 0.05, -0.1, 0.2, 0.0, -0.15];
        let monetary = [0.02, 0.1, -0.05, 0.07, -0.03, 0.0, 0.04, -0.06];
        let shock: Vec<f64> = news.iter().zip(&monetary).map(|(a, b)| a + b).collect();
        let c = Components {
            keys: &k,
            shock: &shock,
            news: &news,
            monetary: &monetary,
        };
        let panel = OutcomePanel {
            names: vec!["same".into()],
            series: vec![k.iter().copied().zip(shock.iter().copied()).collect()],
        };
        let rows = run_event_study(&panel, &c, HcType::HC1, Execution::Sequential).unwrap();
        let r = &rows[0];
        assert!((r.beta.coef - 1.0).abs() < 1e-10);
        assert!((r.gamma.coef - 1.0).abs() < 1e-10);
        assert!((r.mu.coef - 1.0).abs() < 1e-10);
        assert_eq!(r.n_obs, 8);
    }

    #[test]
    fn sparse_outcome_is_skipped_and_missing_rows_dropped() {
        let k = keys(6);
        let v = [0.1, 0.4, -0.3, 0.2, 0.0, 0.5];
        let m = [0.3, -0.1, 0.2, 0.1, -0.4, 0.0];
        let s: Vec<f64> = v.iter().zip(&m).map(|(a, b)| a + b).collect();
        let c = Components {
            keys: &k,
            shock: &s,
            news: &v,
            monetary: &m,
        };
        let few: BTreeMap<_, _> = k[..3].iter().map(|k| (*k, 1.0)).collect();
        let some: BTreeMap<_, _> = k[..5]
            .iter()
            .zip([0.2, -0.1, 0.4, 0.3, 0.05])
            .map(|(k, v)| (*k, v))
            .collect();
        let panel = OutcomePanel {
            names: vec!["few".into(), "some".into()],
            series: vec![few, some],
        };
        let rows = run_event_study(&panel, &c, HcType::HC1, Execution::Sequential).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].outcome, "some");
        assert_eq!(rows[0].n_obs, 5);
    }

    #[test]
    fn table_has_header_and_two_lines_per_row() {
        let e = Estimate {
            coef: 0.67,
            se: 0.1,
            p: 0.001,
        };
        let rows = vec![EventStudyRow {
            outcome: "Nominal 3 month".into(),
            beta: e,
            gamma: e,
            mu: e,
            n_obs: 106,
        }];
        let t = render_table("PNS", &rows);
        assert!(t.contains("0.670***"));
        assert!(t.contains("(0.100)"));
        assert_eq!(t.lines().count(), 6);
    }
}
