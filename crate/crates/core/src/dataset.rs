//! Loading, validating, and aligning the per-meeting inputs.
//!
//! Every input is keyed by the calendar date of a scheduled FOMC meeting.
//! Joins are exact date matches. Shock and outcome values are held in
//! percentage points; files may declare `# units: basis_points` instead.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EMBEDDING_DIM: usize = 768;

/// Outcome columns recognised by name; others are kept with a warning.
pub const KNOWN_OUTCOMES: [&str; 10] = [
    "Nominal 3 month",
    "Nominal 1 year",
    "Nominal 2 years",
    "Nominal 5 years",
    "Nominal 10 years",
    "Nominal 20 years",
    "TIPS Real 2 years",
    "TIPS Real 5 years",
    "TIPS Real 10 years",
    "TIPS Real 20 years",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MeetingKey(pub NaiveDate);

impl MeetingKey {
    pub fn from_ymd(y: i32, m: u32, d: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(y, m, d).map(MeetingKey)
    }

    pub fn date(&self) -> NaiveDate {
        self.0
    }
}

impl fmt::Display for MeetingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

impl FromStr for MeetingKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .map(MeetingKey)
            .map_err(|e| format!("invalid date '{s}': {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "FOMC")]
    Fomc,
    #[serde(rename = "NYT")]
    Nyt,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Fomc => "FOMC",
            Source::Nyt => "NYT",
        }
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FOMC" => Ok(Source::Fomc),
            "NYT" => Ok(Source::Nyt),
            other => Err(format!("unknown source '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetName {
    Ffr,
    Rgdp,
    Cpi,
}

impl TargetName {
    pub fn as_str(&self) -> &'static str {
        match self {
            TargetName::Ffr => "ffr",
            TargetName::Rgdp => "rgdp",
            TargetName::Cpi => "cpi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ShockName {
    #[serde(rename = "pns")]
    Pns,
    #[serde(rename = "ffr_surprise")]
    FfrSurprise,
    #[serde(rename = "ff4")]
    Ff4,
}

impl ShockName {
    pub const ALL: [ShockName; 3] = [ShockName::Pns, ShockName::FfrSurprise, ShockName::Ff4];

    /// Column name in the shocks file.
    pub fn column(&self) -> &'static str {
        match self {
            ShockName::Pns => "pns",
            ShockName::FfrSurprise => "ffr_surprise",
            ShockName::Ff4 => "ff4",
        }
    }

    /// Short label used in output tables.
    pub fn label(&self) -> &'static str {
        match self {
            ShockName::Pns => "PNS",
            ShockName::FfrSurprise => "FFR",
            ShockName::Ff4 => "FF4",
        }
    }
}

impl FromStr for ShockName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pns" => Ok(ShockName::Pns),
            "ffr" | "ffr_surprise" => Ok(ShockName::FfrSurprise),
            "ff4" => Ok(ShockName::Ff4),
            other => Err(format!("unknown shock '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Percent,
    BasisPoints,
}

impl Units {
    fn to_percent(self, v: f64) -> f64 {
        match self {
            Units::Percent => v,
            Units::BasisPoints => v / 100.0,
        }
    }
}

impl FromStr for Units {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "percent" | "pct" | "%" | "percentage_points" => Ok(Units::Percent),
            "basis_points" | "basis points" | "bp" | "bps" => Ok(Units::BasisPoints),
            other => Err(format!("unknown units '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPanel {
    pub source: Source,
    pub dim: usize,
    pub rows: BTreeMap<MeetingKey, Vec<f64>>,
}

impl EmbeddingPanel {
    pub fn new(source: Source, dim: usize) -> Self {
        EmbeddingPanel {
            source,
            dim,
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: MeetingKey, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Dimension(format!(
                "{} embedding for {key} has {} entries, expected {}",
                self.source.as_str(),
                v.len(),
                self.dim
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite embedding entry for {key}"
            )));
        }
        if self.rows.insert(key, v).is_some() {
            return Err(Error::Validation(format!(
                "duplicate {} embedding for {key}",
                self.source.as_str()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSeries {
    pub name: TargetName,
    pub values: BTreeMap<MeetingKey, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetPanel {
    pub ffr: TargetSeries,
    pub rgdp: TargetSeries,
    pub cpi: TargetSeries,
}

impl TargetPanel {
    pub fn get(&self, name: TargetName) -> &TargetSeries {
        match name {
            TargetName::Ffr => &self.ffr,
            TargetName::Rgdp => &self.rgdp,
            TargetName::Cpi => &self.cpi,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockSeries {
    pub name: ShockName,
    /// Units declared by the source file; values are already in percent.
    pub declared_units: Units,
    pub values: BTreeMap<MeetingKey, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockPanel {
    pub declared_units: Units,
    pub series: BTreeMap<ShockName, ShockSeries>,
}

impl ShockPanel {
    pub fn get(&self, name: ShockName) -> &ShockSeries {
        &self.series[&name]
    }
}

/// Daily changes in outcome yields, in percentage points. Cells may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomePanel {
    pub names: Vec<String>,
    pub series: Vec<BTreeMap<MeetingKey, f64>>,
}

impl OutcomePanel {
    pub fn get(&self, name: &str) -> Option<&BTreeMap<MeetingKey, f64>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.series[i])
    }

    /// Columns whose names are not in [`KNOWN_OUTCOMES`].
    pub fn unrecognized(&self) -> Vec<&str> {
        self.names
            .iter()
            .filter(|n| !KNOWN_OUTCOMES.contains(&n.as_str()))
            .map(String::as_str)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[serde(rename = "full")]
    FullSample,
    #[serde(rename = "prezlb")]
    PreZlb,
}

impl Window {
    pub fn label(&self) -> &'static str {
        match self {
            Window::FullSample => "Full Sample",
            Window::PreZlb => "Pre-ZLB",
        }
    }
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "full" | "fullsample" => Ok(Window::FullSample),
            "prezlb" => Ok(Window::PreZlb),
            other => Err(format!("unknown subsample '{other}'")),
        }
    }
}

/// First meeting at which the target range reached the zero lower bound.
pub fn default_zlb_cutoff() -> NaiveDate {
    NaiveDate::from_ymd_opt(2008, 12, 16).unwrap()
}

/// Inclusive bounds of the excluded crisis window (July 2008 to July 2009).
pub fn crisis_window() -> (NaiveDate, NaiveDate) {
    (
        NaiveDate::from_ymd_opt(2008, 7, 1).unwrap(),
        NaiveDate::from_ymd_opt(2009, 7, 31).unwrap(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFilter {
    pub window: Window,
    pub crisis_exclusion: bool,
    /// PreZLB keeps meetings strictly before this date.
    #[serde(default = "default_zlb_cutoff")]
    pub zlb_cutoff: NaiveDate,
}

impl SampleFilter {
    pub fn none() -> Self {
        SampleFilter {
            window: Window::FullSample,
            crisis_exclusion: false,
            zlb_cutoff: default_zlb_cutoff(),
        }
    }

    pub fn new(window: Window, crisis_exclusion: bool) -> Self {
        SampleFilter {
            window,
            crisis_exclusion,
            zlb_cutoff: default_zlb_cutoff(),
        }
    }

    fn reject(&self, key: MeetingKey) -> Option<DropReason> {
        let (lo, hi) = crisis_window();
        if self.crisis_exclusion && key.0 >= lo && key.0 <= hi {
            return Some(DropReason::CrisisWindow);
        }
        if self.window == Window::PreZlb && key.0 >= self.zlb_cutoff {
            return Some(DropReason::AfterZlbCutoff);
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    MissingFomcEmbedding,
    MissingNytEmbedding,
    MissingShock,
    MissingFfr,
    CrisisWindow,
    AfterZlbCutoff,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleReport {
    pub dropped: Vec<(MeetingKey, DropReason)>,
}

impl SampleReport {
    pub fn count(&self, reason: DropReason) -> usize {
        self.dropped.iter().filter(|(_, r)| *r == reason).count()
    }
}

/// Row-aligned matrices ready for estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSample {
    pub keys: Vec<MeetingKey>,
    pub x_fomc: DMatrix<f64>,
    pub x_nyt: DMatrix<f64>,
    pub ffr: Vec<f64>,
    /// Present only when complete on every row.
    pub rgdp: Option<Vec<f64>>,
    pub cpi: Option<Vec<f64>>,
    pub shock_name: ShockName,
    pub shock: Vec<f64>,
}

impl AnalysisSample {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x_fomc.ncols()
    }

    pub fn x(&self, source: Source) -> &DMatrix<f64> {
        match source {
            Source::Fomc => &self.x_fomc,
            Source::Nyt => &self.x_nyt,
        }
    }

    pub fn target(&self, name: TargetName) -> Option<&[f64]> {
        match name {
            TargetName::Ffr => Some(&self.ffr),
            TargetName::Rgdp => self.rgdp.as_deref(),
            TargetName::Cpi => self.cpi.as_deref(),
        }
    }

    /// Same rows with a different shock vector.
    pub fn with_shock(&self, name: ShockName, shock: Vec<f64>) -> Result<Self> {
        if shock.len() != self.len() {
            return Err(Error::Dimension(format!(
                "shock has {} entries, sample has {} rows",
                shock.len(),
                self.len()
            )));
        }
        let mut out = self.clone();
        out.shock_name = name;
        out.shock = shock;
        Ok(out)
    }
}

/// Intersects the inputs on meeting date, applies `filter`, and stacks rows
/// in date order.
pub fn build_sample(
    fomc: &EmbeddingPanel,
    nyt: &EmbeddingPanel,
    targets: &TargetPanel,
    shock: &ShockSeries,
    filter: &SampleFilter,
) -> Result<(AnalysisSample, SampleReport)> {
    if fomc.dim != nyt.dim {
        return Err(Error::Dimension(format!(
            "FOMC embeddings have dimension {}, NYT {}",
            fomc.dim, nyt.dim
        )));
    }
    let universe: BTreeSet<MeetingKey> = fomc
        .rows
        .keys()
        .chain(nyt.rows.keys())
        .chain(shock.values.keys())
        .chain(targets.ffr.values.keys())
        .copied()
        .collect();

    let mut report = SampleReport::default();
    let mut keys = Vec::new();
    for key in universe {
        let reason = if !fomc.rows.contains_key(&key) {
            Some(DropReason::MissingFomcEmbedding)
        } else if !nyt.rows.contains_key(&key) {
            Some(DropReason::MissingNytEmbedding)
        } else if !shock.values.contains_key(&key) {
            Some(DropReason::MissingShock)
        } else if !targets.ffr.values.contains_key(&key) {
            Some(DropReason::MissingFfr)
        } else {
            filter.reject(key)
        };
        match reason {
            Some(r) => report.dropped.push((key, r)),
            None => keys.push(key),
        }
    }
    if keys.is_empty() {
        return Err(Error::Alignment(format!(
            "no meetings left after alignment and filtering ({} dropped)",
            report.dropped.len()
        )));
    }

    let t = keys.len();
    let d = fomc.dim;
    let x_fomc = DMatrix::from_fn(t, d, |i, j| fomc.rows[&keys[i]][j]);
    let x_nyt = DMatrix::from_fn(t, d, |i, j| nyt.rows[&keys[i]][j]);
    let column = |series: &TargetSeries| -> Option<Vec<f64>> {
        keys.iter().map(|k| series.values.get(k).copied()).collect()
    };
    let ffr = column(&targets.ffr).expect("ffr presence checked above");
    let sample = AnalysisSample {
        x_fomc,
        x_nyt,
        ffr,
        rgdp: column(&targets.rgdp),
        cpi: column(&targets.cpi),
        shock_name: shock.name,
        shock: keys.iter().map(|k| shock.values[k]).collect(),
        keys,
    };
    Ok((sample, report))
}

// ---------------------------------------------------------------------------
// CSV input

struct CsvFile {
    path: String,
    units: Option<Units>,
    header: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

fn read_csv(path: &Path) -> Result<CsvFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let display = path.display().to_string();
    let mut units = None;
    for (i, line) in text.lines().enumerate() {
        if let Some(meta) = line.trim_start().strip_prefix('#') {
            if let Some((key, value)) = meta.split_once(':') {
                if key.trim().eq_ignore_ascii_case("units") {
                    units = Some(value.parse::<Units>().map_err(|message| Error::Parse {
                        path: display.clone(),
                        line: i + 1,
                        message,
                    })?);
                }
            }
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let parse_err = |line: usize, e: csv::Error| Error::Parse {
        path: display.clone(),
        line,
        message: e.to_string(),
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e)
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        rows.push((line, rec.iter().map(|c| c.trim().to_string()).collect()));
    }
    Ok(CsvFile {
        path: display,
        units,
        header,
        rows,
    })
}

impl CsvFile {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self.header.len() < expected.len()
            || self
                .header
                .iter()
                .zip(expected)
                .any(|(h, e)| !h.eq_ignore_ascii_case(e))
        {
            return Err(self.err(
                1,
                format!(
                    "expected header starting with {:?}, found {:?}",
                    expected, self.header
                ),
            ));
        }
        Ok(())
    }

    fn key(&self, line: usize, cell: &str) -> Result<MeetingKey> {
        cell.parse::<MeetingKey>().map_err(|m| self.err(line, m))
    }

    fn number(&self, line: usize, column: &str, cell: &str) -> Result<Option<f64>> {
        if cell.is_empty() {
            return Ok(None);
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| self.err(line, format!("column '{column}': '{cell}' is not a number")))?;
        if !v.is_finite() {
            return Err(Error::Validation(format!(
                "{}: line {line}: column '{column}' is not finite",
                self.path
            )));
        }
        Ok(Some(v))
    }
}

/// Reads the `source` rows of an embeddings file (`date,source,e0,...,e767`).
pub fn load_embeddings(path: impl AsRef<Path>, source: Source) -> Result<EmbeddingPanel> {
    load_embeddings_with_dim(path, source, EMBEDDING_DIM)
}

pub fn load_embeddings_with_dim(
    path: impl AsRef<Path>,
    source: Source,
    dim: usize,
) -> Result<EmbeddingPanel> {
    let csv = read_csv(path.as_ref())?;
    csv.expect_header(&["date", "source"])?;
    let expected_cols: Vec<String> = (0..dim).map(|i| format!("e{i}")).collect();
    if csv.header[2..] != expected_cols[..] {
        return Err(Error::Dimension(format!(
            "{}: header declares {} embedding columns, expected e0..e{}",
            csv.path,
            csv.header.len() - 2,
            dim.saturating_sub(1)
        )));
    }
    let mut panel = EmbeddingPanel::new(source, dim);
    for (line, row) in &csv.rows {
        if row.len() != dim + 2 {
            return Err(Error::Dimension(format!(
                "{}: line {line}: row has {} embedding entries, expected {dim}",
                csv.path,
                row.len().saturating_sub(2)
            )));
        }
        let row_source: Source = row[1].parse().map_err(|m: String| csv.err(*line, m))?;
        if row_source != source {
            continue;
        }
        let key = csv.key(*line, &row[0])?;
        let mut v = Vec::with_capacity(dim);
        for (j, cell) in row[2..].iter().enumerate() {
            let x = cell
                .parse::<f64>()
                .map_err(|_| csv.err(*line, format!("e{j}: '{cell}' is not a number")))?;
            if !x.is_finite() {
                return Err(Error::Validation(format!(
                    "{}: line {line}: e{j} is not finite",
                    csv.path
                )));
            }
            v.push(x);
        }
        panel.insert(key, v).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: line {line}: {m}", csv.path)),
            other => other,
        })?;
    }
    Ok(panel)
}

fn insert_unique(
    map: &mut BTreeMap<MeetingKey, f64>,
    key: MeetingKey,
    v: f64,
    csv: &CsvFile,
    line: usize,
) -> Result<()> {
    if map.insert(key, v).is_some() {
        return Err(csv.err(line, format!("duplicate date {key}")));
    }
    Ok(())
}

/// Reads `date,ffr,rgdp,cpi`; blank cells are missing.
pub fn load_targets(path: impl AsRef<Path>) -> Result<TargetPanel> {
    let csv = read_csv(path.as_ref())?;
    csv.expect_header(&["date", "ffr", "rgdp", "cpi"])?;
    let mut maps: [BTreeMap<MeetingKey, f64>; 3] = Default::default();
    let mut seen = BTreeSet::new();
    for (line, row) in &csv.rows {
        if row.len() != 4 {
            return Err(csv.err(*line, format!("expected 4 fields, found {}", row.len())));
        }
        let key = csv.key(*line, &row[0])?;
        if !seen.insert(key) {
            return Err(csv.err(*line, format!("duplicate date {key}")));
        }
        for (i, name) in ["ffr", "rgdp", "cpi"].iter().enumerate() {
            if let Some(v) = csv.number(*line, name, &row[i + 1])? {
                if i == 0 && v < 0.0 {
                    return Err(Error::Validation(format!(
                        "{}: line {line}: negative federal funds rate {v}",
                        csv.path
                    )));
                }
                insert_unique(&mut maps[i], key, v, &csv, *line)?;
            }
        }
    }
    let [ffr, rgdp, cpi] = maps;
    Ok(TargetPanel {
        ffr: TargetSeries {
            name: TargetName::Ffr,
            values: ffr,
        },
        rgdp: TargetSeries {
            name: TargetName::Rgdp,
            values: rgdp,
        },
        cpi: TargetSeries {
            name: TargetName::Cpi,
            values: cpi,
        },
    })
}

/// Reads `date,pns,ffr_surprise,ff4` with a `# units:` metadata line.
pub fn load_shocks(path: impl AsRef<Path>) -> Result<ShockPanel> {
    let csv = read_csv(path.as_ref())?;
    csv.expect_header(&["date", "pns", "ffr_surprise", "ff4"])?;
    let units = csv
        .units
        .ok_or_else(|| csv.err(1, "missing '# units:' metadata line"))?;
    let mut series: BTreeMap<ShockName, ShockSeries> = ShockName::ALL
        .iter()
        .map(|&name| {
            (
                name,
                ShockSeries {
                    name,
                    declared_units: units,
                    values: BTreeMap::new(),
                },
            )
        })
        .collect();
    let mut seen = BTreeSet::new();
    for (line, row) in &csv.rows {
        if row.len() != 4 {
            return Err(csv.err(*line, format!("expected 4 fields, found {}", row.len())));
        }
        let key = csv.key(*line, &row[0])?;
        if !seen.insert(key) {
            return Err(csv.err(*line, format!("duplicate date {key}")));
        }
        for (i, name) in ShockName::ALL.iter().enumerate() {
            if let Some(v) = csv.number(*line, name.column(), &row[i + 1])? {
                let s = series.get_mut(name).unwrap();
                insert_unique(&mut s.values, key, units.to_percent(v), &csv, *line)?;
            }
        }
    }
    Ok(ShockPanel {
        declared_units: units,
        series,
    })
}

/// Reads `date,<outcome>...`; blank cells are missing.
pub fn load_outcomes(path: impl AsRef<Path>) -> Result<OutcomePanel> {
    let csv = read_csv(path.as_ref())?;
    csv.expect_header(&["date"])?;
    let units = csv.units.unwrap_or(Units::Percent);
    let names: Vec<String> = csv.header[1..].to_vec();
    let mut series = vec![BTreeMap::new(); names.len()];
    let mut seen = BTreeSet::new();
    for (line, row) in &csv.rows {
        if row.len() != names.len() + 1 {
            return Err(csv.err(
                *line,
                format!("expected {} fields, found {}", names.len() + 1, row.len()),
            ));
        }
        let key = csv.key(*line, &row[0])?;
        if !seen.insert(key) {
            return Err(csv.err(*line, format!("duplicate date {key}")));
        }
        for (i, name) in names.iter().enumerate() {
            if let Some(v) = csv.number(*line, name, &row[i + 1])? {
                series[i].insert(key, units.to_percent(v));
            }
        }
    }
    let panel = OutcomePanel { names, series };
    for name in panel.unrecognized() {
        log::warn!("unrecognized outcome column '{name}' kept as given");
    }
    Ok(panel)
}

// ---------------------------------------------------------------------------
// CSV output

pub(crate) fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn opt(v: Option<&f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one or more panels into a single embeddings file, ordered by date
/// then source.
pub fn write_embeddings(path: impl AsRef<Path>, panels: &[&EmbeddingPanel]) -> Result<()> {
    let path = path.as_ref();
    let dim = panels.first().map_or(EMBEDDING_DIM, |p| p.dim);
    if panels.iter().any(|p| p.dim != dim) {
        return Err(Error::Dimension("panels differ in dimension".into()));
    }
    let mut rows: Vec<(MeetingKey, Source, &Vec<f64>)> = panels
        .iter()
        .flat_map(|p| p.rows.iter().map(move |(k, v)| (*k, p.source, v)))
        .collect();
    rows.sort_by_key(|(k, s, _)| (*k, *s));
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "date,source").map_err(io)?;
    for i in 0..dim {
        write!(w, ",e{i}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for (k, s, v) in rows {
        write!(w, "{k},{}", s.as_str()).map_err(io)?;
        for x in v {
            write!(w, ",{x}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_targets(path: impl AsRef<Path>, targets: &TargetPanel) -> Result<()> {
    let path = path.as_ref();
    let keys: BTreeSet<MeetingKey> = [&targets.ffr, &targets.rgdp, &targets.cpi]
        .iter()
        .flat_map(|s| s.values.keys().copied())
        .collect();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "date,ffr,rgdp,cpi").map_err(io)?;
    for k in keys {
        writeln!(
            w,
            "{k},{},{},{}",
            opt(targets.ffr.values.get(&k)),
            opt(targets.rgdp.values.get(&k)),
            opt(targets.cpi.values.get(&k))
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes shocks in percent with the matching metadata line.
pub fn write_shocks(path: impl AsRef<Path>, shocks: &ShockPanel) -> Result<()> {
    let path = path.as_ref();
    let keys: BTreeSet<MeetingKey> = shocks
        .series
        .values()
        .flat_map(|s| s.values.keys().copied())
        .collect();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "# units: percent").map_err(io)?;
    writeln!(w, "date,pns,ffr_surprise,ff4").map_err(io)?;
    for k in keys {
        write!(w, "{k}").map_err(io)?;
        for name in ShockName::ALL {
            write!(w, ",{}", opt(shocks.get(name).values.get(&k))).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_outcomes(path: impl AsRef<Path>, outcomes: &OutcomePanel) -> Result<()> {
    let path = path.as_ref();
    let keys: BTreeSet<MeetingKey> = outcomes
        .series
        .iter()
        .flat_map(|s| s.keys().copied())
        .collect();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "date").map_err(io)?;
    for n in &outcomes.names {
        write!(w, ",{n}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for k in keys {
        write!(w, "{k}").map_err(io)?;
        for s in &outcomes.series {
            write!(w, ",{}", opt(s.get(&k))).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Calendar month `(year, month)` of a meeting.
pub fn month_of(key: MeetingKey) -> (i32, u32) {
    (key.0.year(), key.0.month())
}
