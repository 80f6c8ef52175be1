//! Configuration-driven orchestration: decomposition, channel regressions,
//! event study and BVAR impulse responses, written as CSV artifacts.
//!
//! Every stage reads its inputs from the shared file formats, so running the
//! stages one at a time produces the same files as a single [`run`].

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bvar::{
    aggregate_to_monthly, fit_bvarx, irf_exogenous, load_monthly_panel, write_irf_csv, BvarOptions,
    Impulse, IrfOptions, MinnesotaPrior, Month, VarxSpec, IRF_COLUMNS,
};
use crate::dataset::{
    self, build_sample, create, default_zlb_cutoff, DropReason, EmbeddingPanel, MeetingKey,
    SampleFilter, SampleReport, ShockName, ShockPanel, Source, TargetName, TargetPanel, Window,
};
use crate::decomposition::{
    channel_regression, grid_search, DecompositionOptions, GridSpec, SearchMode,
};
use crate::elastic_net::FitOptions;
use crate::error::{Error, Result};
use crate::event_study::{self, run_event_study, Components};
use crate::linalg::variance;
use crate::par::Execution;
use crate::regression::HcType;

pub const TABLE1: &str = "table1.csv";
pub const TABLE2: &str = "table2.csv";
pub const EVENT_STUDY: &str = "event_study.csv";
pub const TABLE5: &str = "table5.csv";
pub const SERIES: &str = "series.csv";
pub const IRF: &str = "irf.csv";
pub const MANIFEST: &str = "manifest.json";

pub const TABLE1_COLUMNS: [&str; 7] = ["subsample", "shock", "r2", "theta", "se", "t", "p"];
pub const TABLE2_COLUMNS: [&str; 8] = [
    "subsample",
    "shock",
    "eta_nyt",
    "lambda_nyt",
    "r2_nyt",
    "eta_fomc",
    "lambda_fomc",
    "r2_fomc",
];
pub const TABLE5_COLUMNS: [&str; 7] = [
    "subsample",
    "shock",
    "r2",
    "theta_rgdp",
    "p_rgdp",
    "theta_cpi",
    "p_cpi",
];
pub const SERIES_COLUMNS: [&str; 4] = ["date", "shock", "news", "monetary"];

/// Overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "INFOSHOCK_OUT_DIR";

fn default_dim() -> usize {
    dataset::EMBEDDING_DIM
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub embeddings: PathBuf,
    pub targets: PathBuf,
    pub shocks: PathBuf,
    pub outcomes: PathBuf,
    #[serde(rename = "macro")]
    pub macro_panel: PathBuf,
    #[serde(default = "default_dim")]
    pub embedding_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    /// Shocks to decompose. The first one feeds the event study and the BVAR.
    pub shocks: Vec<ShockName>,
    /// Subsamples to estimate. The first one feeds the event study and the BVAR.
    pub subsamples: Vec<Window>,
    #[serde(default)]
    pub crisis_exclusion: bool,
    #[serde(default = "default_zlb_cutoff")]
    pub zlb_cutoff: NaiveDate,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            shocks: ShockName::ALL.to_vec(),
            subsamples: vec![Window::FullSample, Window::PreZlb],
            crisis_exclusion: false,
            zlb_cutoff: default_zlb_cutoff(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionConfig {
    pub grid: GridSpec,
    pub mode: SearchMode,
    pub hc: HcType,
    pub demeaned_news: bool,
    pub fit: FitOptions,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        let d = DecompositionOptions::default();
        DecompositionConfig {
            grid: d.grid,
            mode: d.mode,
            hc: d.hc,
            demeaned_news: d.demeaned_news,
            fit: d.fit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub targets: Vec<TargetName>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            targets: vec![TargetName::Rgdp, TargetName::Cpi],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BvarConfig {
    pub lags: usize,
    pub exog_lags: usize,
    #[serde(default = "default_true")]
    pub intercept: bool,
    pub prior: MinnesotaPrior,
    pub n_draws: usize,
    pub horizon: usize,
    pub impulse: Impulse,
    pub truncate_explosive: bool,
}

impl Default for BvarConfig {
    fn default() -> Self {
        BvarConfig {
            lags: 12,
            exog_lags: 0,
            intercept: true,
            prior: MinnesotaPrior::default(),
            n_draws: 2000,
            horizon: 48,
            impulse: Impulse::OneSd,
            truncate_explosive: false,
        }
    }
}

/// Everything a pipeline run depends on. Relative paths are resolved
/// against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core and 1 runs sequentially.
    #[serde(default)]
    pub jobs: usize,
    pub out_dir: PathBuf,
    pub data: DataPaths,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub decomposition: DecompositionConfig,
    #[serde(default)]
    pub channels: ChannelConfig,
    #[serde(default)]
    pub bvar: BvarConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Pipeline stages, used to decide which inputs must exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Decompose,
    Channels,
    EventStudy,
    Bvar,
    Run,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::Config(format!("config file {} not found", path.display()))
            }
            _ => Error::io(path, e),
        })?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    /// Hex SHA-256 of the serialized config, leaving out the output
    /// directory and worker count, which do not affect results.
    pub fn hash(&self) -> Result<String> {
        let canonical = PipelineConfig {
            out_dir: PathBuf::new(),
            jobs: 0,
            ..self.clone()
        };
        let digest = Sha256::digest(canonical.to_toml()?.as_bytes());
        Ok(digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    pub fn execution(&self) -> Execution {
        if self.jobs == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    pub fn filter(&self, window: Window) -> SampleFilter {
        SampleFilter {
            window,
            crisis_exclusion: self.sample.crisis_exclusion,
            zlb_cutoff: self.sample.zlb_cutoff,
        }
    }

    pub fn decomposition_options(&self) -> DecompositionOptions {
        let d = &self.decomposition;
        DecompositionOptions {
            grid: d.grid.clone(),
            mode: d.mode,
            cache: true,
            fit: d.fit,
            hc: d.hc,
            demeaned_news: d.demeaned_news,
            execution: self.execution(),
        }
    }

    /// Checks parameters and that the inputs needed by `stage` exist.
    pub fn validate(&self, stage: Stage) -> Result<()> {
        if self.sample.shocks.is_empty() {
            return Err(Error::Config("sample.shocks is empty".into()));
        }
        if self.sample.subsamples.is_empty() {
            return Err(Error::Config("sample.subsamples is empty".into()));
        }
        if self.data.embedding_dim == 0 {
            return Err(Error::Config("data.embedding_dim must be >= 1".into()));
        }
        self.decomposition.grid.validate()?;
        if self.bvar.lags == 0 || self.bvar.horizon == 0 || self.bvar.n_draws == 0 {
            return Err(Error::Config(
                "bvar.lags, bvar.horizon and bvar.n_draws must be >= 1".into(),
            ));
        }
        self.bvar.prior.validate()?;
        let d = &self.data;
        let core = [
            ("embeddings", &d.embeddings),
            ("targets", &d.targets),
            ("shocks", &d.shocks),
        ];
        let needed: Vec<(&str, &PathBuf)> = match stage {
            Stage::Ingest | Stage::Decompose | Stage::Channels => core.to_vec(),
            Stage::EventStudy => vec![("outcomes", &d.outcomes)],
            Stage::Bvar => vec![("macro", &d.macro_panel)],
            Stage::Run => {
                let mut v = core.to_vec();
                v.push(("outcomes", &d.outcomes));
                v.push(("macro", &d.macro_panel));
                v
            }
        };
        for (name, p) in needed {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(Error::Config(format!(
                    "data.{name}: file {} does not exist",
                    full.display()
                )));
            }
        }
        Ok(())
    }
}

/// Loaded meeting-level inputs.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub fomc: EmbeddingPanel,
    pub nyt: EmbeddingPanel,
    pub targets: TargetPanel,
    pub shocks: ShockPanel,
}

pub fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs> {
    let d = &cfg.data;
    let emb = cfg.resolve(&d.embeddings);
    Ok(Inputs {
        fomc: dataset::load_embeddings_with_dim(&emb, Source::Fomc, d.embedding_dim)?,
        nyt: dataset::load_embeddings_with_dim(&emb, Source::Nyt, d.embedding_dim)?,
        targets: dataset::load_targets(cfg.resolve(&d.targets))?,
        shocks: dataset::load_shocks(cfg.resolve(&d.shocks))?,
    })
}

/// Files written by a stage; removed again if the stage fails.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    fn record(&mut self, p: PathBuf) {
        if !self.written.contains(&p) {
            self.written.push(p);
        }
    }

    fn cleanup(&self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.written
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect()
    }
}

fn guarded<T>(f: impl FnOnce(&mut Artifacts) -> Result<T>) -> Result<(T, Artifacts)> {
    let mut arts = Artifacts::default();
    match f(&mut arts) {
        Ok(v) => Ok((v, arts)),
        Err(e) => {
            arts.cleanup();
            Err(e)
        }
    }
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for r in rows {
        writeln!(w, "{}", r.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn subsample_name(w: Window) -> &'static str {
    match w {
        Window::FullSample => "full",
        Window::PreZlb => "prezlb",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub subsample: String,
    pub shock: String,
    pub n_obs: usize,
    pub dropped: usize,
    pub first: Option<MeetingKey>,
    pub last: Option<MeetingKey>,
}

fn summarize(
    w: Window,
    s: ShockName,
    n: usize,
    keys: &[MeetingKey],
    r: &SampleReport,
) -> SampleSummary {
    SampleSummary {
        subsample: subsample_name(w).into(),
        shock: s.label().into(),
        n_obs: n,
        dropped: r.dropped.len(),
        first: keys.first().copied(),
        last: keys.last().copied(),
    }
}

/// Loads and aligns every configured sample without estimating anything.
pub fn ingest_check(cfg: &PipelineConfig) -> Result<Vec<SampleSummary>> {
    cfg.validate(Stage::Ingest)?;
    let inp = load_inputs(cfg)?;
    let mut out = Vec::new();
    for &w in &cfg.sample.subsamples {
        for &s in &cfg.sample.shocks {
            let (sample, report) = build_sample(
                &inp.fomc,
                &inp.nyt,
                &inp.targets,
                inp.shocks.get(s),
                &cfg.filter(w),
            )?;
            out.push(summarize(w, s, sample.len(), &sample.keys, &report));
        }
    }
    Ok(out)
}

/// Selected penalties for one decomposition, as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRecord {
    pub subsample: String,
    pub shock: String,
    pub n_obs: usize,
    pub eta_nyt: f64,
    pub lambda_nyt: f64,
    pub eta_fomc: f64,
    pub lambda_fomc: f64,
    pub stage3_r2: f64,
}

#[derive(Debug, Clone, Default)]
pub struct DecomposeOutput {
    pub selections: Vec<SelectionRecord>,
    pub warnings: Vec<String>,
}

/// Writes the stage-3 table, the selected-penalty table and the news and
/// monetary series of the first (subsample, shock) pair.
pub fn decompose_stage(cfg: &PipelineConfig) -> Result<(DecomposeOutput, Artifacts)> {
    cfg.validate(Stage::Decompose)?;
    let inp = load_inputs(cfg)?;
    let out = cfg.out_dir();
    let opts = cfg.decomposition_options();
    guarded(|arts| {
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        let mut res = DecomposeOutput::default();
        let mut series = None;
        for &w in &cfg.sample.subsamples {
            for &s in &cfg.sample.shocks {
                let (sample, report) = build_sample(
                    &inp.fomc,
                    &inp.nyt,
                    &inp.targets,
                    inp.shocks.get(s),
                    &cfg.filter(w),
                )?;
                let missing = report
                    .dropped
                    .iter()
                    .filter(|(_, r)| {
                        !matches!(r, DropReason::CrisisWindow | DropReason::AfterZlbCutoff)
                    })
                    .count();
                if missing > 0 {
                    res.warnings.push(format!(
                        "{} {}: {missing} meetings dropped for missing data",
                        subsample_name(w),
                        s.label()
                    ));
                }
                let r = grid_search(&sample, &opts)?;
                let st = &r.stage3;
                t1.push(vec![
                    subsample_name(w).to_string(),
                    s.label().to_string(),
                    st.r2.to_string(),
                    st.theta().to_string(),
                    st.theta_se().to_string(),
                    st.theta_t().to_string(),
                    st.theta_p().to_string(),
                ]);
                let sel = &r.selected;
                t2.push(vec![
                    subsample_name(w).to_string(),
                    s.label().to_string(),
                    sel.nyt.eta.to_string(),
                    sel.nyt.lambda.to_string(),
                    r.nyt.stage2_r2.to_string(),
                    sel.fomc.eta.to_string(),
                    sel.fomc.lambda.to_string(),
                    r.fomc.stage2_r2.to_string(),
                ]);
                for (m, name) in [(&r.nyt, "NYT"), (&r.fomc, "FOMC")] {
                    if !m.fit.converged {
                        res.warnings.push(format!(
                            "{} {}: selected {name} fit did not converge",
                            subsample_name(w),
                            s.label()
                        ));
                    }
                }
                res.selections.push(SelectionRecord {
                    subsample: subsample_name(w).into(),
                    shock: s.label().into(),
                    n_obs: sample.len(),
                    eta_nyt: sel.nyt.eta,
                    lambda_nyt: sel.nyt.lambda,
                    eta_fomc: sel.fomc.eta,
                    lambda_fomc: sel.fomc.lambda,
                    stage3_r2: st.r2,
                });
                if series.is_none() {
                    series = Some(Series {
                        keys: r.keys.clone(),
                        shock: r.shock.clone(),
                        news: r.news.clone(),
                        monetary: r.monetary.clone(),
                    });
                }
            }
        }
        let p = out.join(TABLE1);
        write_rows(&p, &TABLE1_COLUMNS, &t1)?;
        arts.record(p);
        let p = out.join(TABLE2);
        write_rows(&p, &TABLE2_COLUMNS, &t2)?;
        arts.record(p);
        let p = out.join(SERIES);
        series.expect("at least one sample").write(&p)?;
        arts.record(p);
        Ok(res)
    })
}

/// Writes the multi-gap channel table for every (subsample, shock) pair.
pub fn channels_stage(cfg: &PipelineConfig) -> Result<((), Artifacts)> {
    cfg.validate(Stage::Channels)?;
    let inp = load_inputs(cfg)?;
    let out = cfg.out_dir();
    let opts = cfg.decomposition_options();
    let targets = &cfg.channels.targets;
    if targets.is_empty() {
        return Err(Error::Config("channels.targets is empty".into()));
    }
    guarded(|arts| {
        let mut rows = Vec::new();
        for &w in &cfg.sample.subsamples {
            for &s in &cfg.sample.shocks {
                let (sample, _) = build_sample(
                    &inp.fomc,
                    &inp.nyt,
                    &inp.targets,
                    inp.shocks.get(s),
                    &cfg.filter(w),
                )?;
                let r = channel_regression(&sample, targets, &opts)?;
                let cell = |t: TargetName| -> (String, String) {
                    match r.theta(t) {
                        Some((c, _, p)) => (c.to_string(), p.to_string()),
                        None => (String::new(), String::new()),
                    }
                };
                let (tr, pr) = cell(TargetName::Rgdp);
                let (tc, pc) = cell(TargetName::Cpi);
                rows.push(vec![
                    subsample_name(w).to_string(),
                    s.label().to_string(),
                    r.r2.to_string(),
                    tr,
                    pr,
                    tc,
                    pc,
                ]);
            }
        }
        let p = out.join(TABLE5);
        write_rows(&p, &TABLE5_COLUMNS, &rows)?;
        arts.record(p);
        Ok(())
    })
}

/// Meeting-level decomposition as stored in the series file.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub keys: Vec<MeetingKey>,
    pub shock: Vec<f64>,
    pub news: Vec<f64>,
    pub monetary: Vec<f64>,
}

impl Series {
    pub fn write(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = (0..self.keys.len())
            .map(|i| {
                vec![
                    self.keys[i].to_string(),
                    self.shock[i].to_string(),
                    self.news[i].to_string(),
                    self.monetary[i].to_string(),
                ]
            })
            .collect();
        write_rows(path, &SERIES_COLUMNS, &rows)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let table = read_table(path, &SERIES_COLUMNS)?;
        let mut s = Series {
            keys: Vec::new(),
            shock: Vec::new(),
            news: Vec::new(),
            monetary: Vec::new(),
        };
        let disp = path.display().to_string();
        for (i, row) in table.iter().enumerate() {
            let line = i + 2;
            let perr = |message: String| Error::Parse {
                path: disp.clone(),
                line,
                message,
            };
            s.keys.push(row[0].parse().map_err(perr)?);
            let num = |j: usize| -> Result<f64> {
                row[j].parse::<f64>().map_err(|e| Error::Parse {
                    path: disp.clone(),
                    line,
                    message: format!("column '{}': {e}", SERIES_COLUMNS[j]),
                })
            };
            s.shock.push(num(1)?);
            s.news.push(num(2)?);
            s.monetary.push(num(3)?);
        }
        Ok(s)
    }
}

/// Reads a CSV artifact, checking its header.
pub fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>> {
    if !path.is_file() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::io(path, e.into()))?;
    let disp = path.display().to_string();
    let got: Vec<String> = r
        .headers()
        .map_err(|e| Error::Parse {
            path: disp.clone(),
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if got != header {
        return Err(Error::Parse {
            path: disp,
            line: 1,
            message: format!(
                "expected header {}, found {}",
                header.join(","),
                got.join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: disp.clone(),
            line: i + 2,
            message: e.to_string(),
        })?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(rows)
}

#[derive(Debug, Clone, Default)]
pub struct EventStudyOutput {
    pub rows: Vec<event_study::EventStudyRow>,
    pub warnings: Vec<String>,
}

/// Event study of every outcome on the stored shock, news and monetary series.
pub fn event_study_stage(cfg: &PipelineConfig) -> Result<(EventStudyOutput, Artifacts)> {
    cfg.validate(Stage::EventStudy)?;
    let out = cfg.out_dir();
    let series = Series::read(&out.join(SERIES))?;
    let outcomes = dataset::load_outcomes(cfg.resolve(&cfg.data.outcomes))?;
    guarded(|arts| {
        let comps = Components {
            keys: &series.keys,
            shock: &series.shock,
            news: &series.news,
            monetary: &series.monetary,
        };
        let rows = run_event_study(&outcomes, &comps, cfg.decomposition.hc, cfg.execution())?;
        let mut warnings: Vec<String> = outcomes
            .unrecognized()
            .into_iter()
            .map(|n| format!("outcome column '{n}' is not a known outcome name"))
            .collect();
        for name in &outcomes.names {
            if !rows.iter().any(|r| &r.outcome == name) {
                warnings.push(format!("outcome '{name}' skipped: too few observations"));
            }
        }
        let p = out.join(EVENT_STUDY);
        event_study::write_csv(&p, &rows)?;
        arts.record(p);
        Ok(EventStudyOutput { rows, warnings })
    })
}

#[derive(Debug, Clone, Default)]
pub struct BvarOutput {
    pub n_months: usize,
    pub n_explosive: usize,
    pub redraws: usize,
    pub warnings: Vec<String>,
}

/// BVARX on the macro panel with the monthly-summed monetary series as the
/// exogenous regressor; writes impulse-response bands.
pub fn bvar_stage(cfg: &PipelineConfig) -> Result<(BvarOutput, Artifacts)> {
    cfg.validate(Stage::Bvar)?;
    let out = cfg.out_dir();
    let series = Series::read(&out.join(SERIES))?;
    let panel = load_monthly_panel(cfg.resolve(&cfg.data.macro_panel))?;
    let (Some(k0), Some(k1)) = (series.keys.first(), series.keys.last()) else {
        return Err(Error::Alignment("series file has no meetings".into()));
    };
    let (Some(p0), Some(p1)) = (panel.months.first(), panel.months.last()) else {
        return Err(Error::Alignment("macro panel has no months".into()));
    };
    let first = Month::of(*k0).max(*p0);
    let last = Month::of(*k1).min(*p1);
    if first > last {
        return Err(Error::Alignment(
            "macro panel does not overlap the meeting sample".into(),
        ));
    }
    let y = panel.slice(first, last)?;
    let shock = aggregate_to_monthly(&series.keys, &series.monetary, Some((first, last)))?;
    let exog = DMatrix::from_column_slice(shock.values.len(), 1, &shock.values);
    let b = &cfg.bvar;
    let spec = VarxSpec {
        endogenous: y.names.clone(),
        exogenous: vec!["monetary".into()],
        lags: b.lags,
        exog_lags: b.exog_lags,
        intercept: b.intercept,
    };
    let post = fit_bvarx(
        &y,
        &exog,
        &spec,
        &b.prior,
        &BvarOptions {
            n_draws: b.n_draws,
            seed: cfg.seed,
            execution: cfg.execution(),
        },
    )?;
    let irf = irf_exogenous(
        &post,
        &IrfOptions {
            horizon: b.horizon,
            exog_index: 0,
            impulse: b.impulse,
            truncate_explosive: b.truncate_explosive,
            execution: cfg.execution(),
        },
    )?;
    guarded(|arts| {
        let p = out.join(IRF);
        write_irf_csv(&p, &irf)?;
        arts.record(p);
        let mut warnings = Vec::new();
        if irf.n_explosive > 0 {
            warnings.push(format!(
                "{} of {} posterior draws are explosive{}",
                irf.n_explosive,
                post.n_draws,
                if b.truncate_explosive {
                    " and were dropped"
                } else {
                    ""
                }
            ));
        }
        if post.redraws > 0 {
            warnings.push(format!("{} covariance draws were redrawn", post.redraws));
        }
        Ok(BvarOutput {
            n_months: y.months.len(),
            n_explosive: irf.n_explosive,
            redraws: post.redraws,
            warnings,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<String>,
    pub selections: Vec<SelectionRecord>,
    pub warnings: Vec<String>,
}

/// Runs every stage and writes the manifest. On failure every file written
/// by the run is removed.
pub fn run(cfg: &PipelineConfig) -> Result<Manifest> {
    cfg.validate(Stage::Run)?;
    let mut all = Artifacts::default();
    let result = (|| -> Result<Manifest> {
        let (dec, a) = decompose_stage(cfg)?;
        all.written.extend(a.written);
        let ((), a) = channels_stage(cfg)?;
        all.written.extend(a.written);
        let (es, a) = event_study_stage(cfg)?;
        all.written.extend(a.written);
        let (bv, a) = bvar_stage(cfg)?;
        all.written.extend(a.written);

        let mut warnings = dec.warnings;
        warnings.extend(es.warnings);
        warnings.extend(bv.warnings);
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash()?,
            seed: cfg.seed,
            artifacts: all.names(),
            selections: dec.selections,
            warnings,
        };
        let p = cfg.out_dir().join(MANIFEST);
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Config(format!("manifest: {e}")))?;
        all.record(p.clone());
        fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))?;
        Ok(manifest)
    })();
    if result.is_err() {
        all.cleanup();
    }
    result
}

fn pad_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|j| {
            rows.iter()
                .map(|r| r.get(j).map_or(0, |c| c.len()))
                .chain([header[j].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut s = String::new();
    let line = |cells: Vec<&str>| -> String {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(j, (c, w))| {
                if j < 2 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let _ = writeln!(s, "{}", line(header.to_vec()));
    for r in rows {
        let _ = writeln!(s, "{}", line(r.iter().map(String::as_str).collect()));
    }
    s
}

fn rounded(rows: Vec<Vec<String>>, skip: usize) -> Vec<Vec<String>> {
    rows.into_iter()
        .map(|r| {
            r.into_iter()
                .enumerate()
                .map(|(j, c)| match c.parse::<f64>() {
                    Ok(v) if j >= skip => format!("{v:.3}"),
                    _ => c,
                })
                .collect()
        })
        .collect()
}

/// Plain-text rendering of the artifacts in `out`. Every artifact except
/// the manifest must exist.
pub fn report(out: &Path) -> Result<String> {
    let t1 = read_table(&out.join(TABLE1), &TABLE1_COLUMNS)?;
    let t2 = read_table(&out.join(TABLE2), &TABLE2_COLUMNS)?;
    let t5 = read_table(&out.join(TABLE5), &TABLE5_COLUMNS)?;
    let es = read_table(&out.join(EVENT_STUDY), &event_study::CSV_COLUMNS)?;
    let series = Series::read(&out.join(SERIES))?;
    let irf = read_table(&out.join(IRF), &IRF_COLUMNS)?;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "Stage-3 projection of the shock on the expectation gap\n"
    );
    s += &pad_table(&TABLE1_COLUMNS, &rounded(t1, 2));
    let _ = writeln!(s, "\nSelected penalties and stage-2 fit\n");
    s += &pad_table(&TABLE2_COLUMNS, &rounded(t2, 2));
    let _ = writeln!(s, "\nChannel regression\n");
    s += &pad_table(&TABLE5_COLUMNS, &rounded(t5, 2));

    let mut rows = Vec::new();
    for r in &es {
        // The CSV keeps stars, not p-values; any p in the starred bracket renders the same.
        let est = |j: usize| {
            let num = |v: &str| v.parse::<f64>().unwrap_or(f64::NAN);
            event_study::Estimate {
                coef: num(&r[j]),
                se: num(&r[j + 1]),
                p: match r[j + 2].as_str() {
                    "***" => 0.0,
                    "**" => 0.02,
                    "*" => 0.07,
                    _ => 1.0,
                },
            }
        };
        rows.push(event_study::EventStudyRow {
            outcome: r[0].clone(),
            beta: est(1),
            gamma: est(4),
            mu: est(7),
            n_obs: r[10].parse().unwrap_or(0),
        });
    }
    s.push('\n');
    s += &event_study::render_table("Event study: daily rate responses", &rows);

    let sd = |v: &[f64]| variance(v).sqrt();
    let _ = writeln!(
        s,
        "\nSeries: {} meetings, sd(shock) {:.4}, sd(news) {:.4}, sd(monetary) {:.4}",
        series.keys.len(),
        sd(&series.shock),
        sd(&series.news),
        sd(&series.monetary)
    );
    let horizons = irf
        .iter()
        .filter_map(|r| r[1].parse::<usize>().ok())
        .max()
        .unwrap_or(0);
    let _ = writeln!(
        s,
        "Impulse responses: {} rows, horizons 0..={horizons}",
        irf.len()
    );
    Ok(s)
}
