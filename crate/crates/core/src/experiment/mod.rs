//! Reproducible experiment runs: a TOML spec in, a directory of tables, a
//! summary with pass/fail checks and a manifest out.
//!
//! A run directory holds `manifest.json`, one table per reported quantity
//! (`.csv` or `.json`) and `summary.json`. Every verdict in the summary is a
//! function of the stored tables and the resolved spec, so [`audit_run`]
//! can recompute it from disk.

mod compare;
mod pipelines;
mod table;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::coupling::Driver;
use crate::error::Error;
use crate::momentum::Prop1Config;

pub use compare::{compare_runs, CompareReport, ConfigDiff, StatDiff};
pub use pipelines::evaluate;
pub use table::{Format, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INVALID_SPEC: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Simulate,
    Couple,
    Chaos,
    Kac,
    Momentum,
    Marginal,
    Covariation,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Simulate,
        ExperimentKind::Couple,
        ExperimentKind::Chaos,
        ExperimentKind::Kac,
        ExperimentKind::Momentum,
        ExperimentKind::Marginal,
        ExperimentKind::Covariation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Couple => "couple",
            ExperimentKind::Chaos => "chaos",
            ExperimentKind::Kac => "kac",
            ExperimentKind::Momentum => "momentum",
            ExperimentKind::Marginal => "marginal",
            ExperimentKind::Covariation => "covariation",
        }
    }

    /// Whether the kind reads the `[sim]` section.
    fn uses_sim(self) -> bool {
        !matches!(self, ExperimentKind::Momentum | ExperimentKind::Marginal)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Fixed initial values of the leading components.
    pub c: Vec<f64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { c: vec![1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoupleSection {
    pub c: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub driver: Driver,
}

impl Default for CoupleSection {
    fn default() -> Self {
        CoupleSection {
            c: vec![1.0],
            alpha: 1.0,
            beta: 0.5,
            driver: Driver::Shared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosSection {
    pub c: Vec<f64>,
    /// The score must stay below `safety * 3 / sqrt(M)`.
    pub safety: f64,
}

impl Default for ChaosSection {
    fn default() -> Self {
        ChaosSection {
            c: vec![1.0, 1.0, 1.0],
            safety: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KacSection {
    pub c: Vec<f64>,
    /// Decreasing collision-angle scales.
    pub epsilons: Vec<f64>,
}

impl Default for KacSection {
    fn default() -> Self {
        KacSection {
            c: vec![1.0],
            epsilons: vec![0.5, 0.25, 0.125],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarginalSection {
    pub n: usize,
    pub samples: usize,
    /// Also check that lifting a uniform point of the `(N-1)`-sphere with an
    /// independent `nu_N` coordinate lands uniformly on the `N`-sphere.
    pub lift: bool,
}

impl Default for MarginalSection {
    fn default() -> Self {
        MarginalSection {
            n: 3,
            samples: 100_000,
            lift: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovariationSection {
    pub c: Vec<f64>,
    pub pairs: Vec<[usize; 2]>,
    /// Allowed relative error at the horizon.
    pub tolerance: f64,
}

impl Default for CovariationSection {
    fn default() -> Self {
        CovariationSection {
            c: vec![2.0, 2.0],
            pairs: vec![[0, 0], [0, 1], [1, 1]],
            tolerance: 0.05,
        }
    }
}

/// Parsed experiment file. Run-level settings given on the command line
/// override the file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Wall-clock budget; exceeding it stops between stages and flags the
    /// outputs as partial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couple: Option<CoupleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chaos: Option<ChaosSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kac: Option<KacSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<Prop1Config>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal: Option<MarginalSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariation: Option<CovariationSection>,
}

impl ExperimentSpec {
    fn sections(&self) -> [(ExperimentKind, bool); 7] {
        [
            (ExperimentKind::Simulate, self.simulate.is_some()),
            (ExperimentKind::Couple, self.couple.is_some()),
            (ExperimentKind::Chaos, self.chaos.is_some()),
            (ExperimentKind::Kac, self.kac.is_some()),
            (ExperimentKind::Momentum, self.momentum.is_some()),
            (ExperimentKind::Marginal, self.marginal.is_some()),
            (ExperimentKind::Covariation, self.covariation.is_some()),
        ]
    }

    pub fn sim(&self) -> SimConfig {
        self.sim.clone().unwrap_or_default()
    }
}

/// A message tied to a place in the config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path, line, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid spec: {0}")]
    Spec(Diagnostic),
    #[error(transparent)]
    Sim(#[from] Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Audit(String),
    #[error("cannot compare a {a} run with a {b} run")]
    KindMismatch { a: ExperimentKind, b: ExperimentKind },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Spec(_) | RunError::KindMismatch { .. } => EXIT_INVALID_SPEC,
            _ => EXIT_RUNTIME,
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the `[section]` header or of a top-level `section = ...` key.
fn section_line(text: &str, section: &str) -> Option<usize> {
    let header = format!("[{section}]");
    text.lines().position(|l| {
        let l = l.trim_start();
        l.starts_with(&header) || l.strip_prefix(section).is_some_and(|r| r.trim_start().starts_with('='))
    })
    .map(|k| k + 1)
}

/// Parses an experiment file, reporting syntax errors and unknown keys with
/// their line.
pub fn parse_spec(text: &str, path: &str) -> Result<ExperimentSpec, RunError> {
    let diag = |line, message: String| {
        RunError::Spec(Diagnostic {
            path: path.to_string(),
            line,
            message,
        })
    };
    if text.trim().is_empty() {
        return Err(diag(Some(1), "configuration is empty".into()));
    }
    let spec: ExperimentSpec = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        diag(line, e.message().trim().to_string())
    })?;
    if spec == ExperimentSpec::default() {
        return Err(diag(Some(1), "configuration sets nothing".into()));
    }
    Ok(spec)
}

/// Reads and parses an experiment file.
pub fn load_spec(path: &Path) -> Result<(ExperimentSpec, String), RunError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| {
        RunError::Spec(Diagnostic {
            path: name.clone(),
            line: None,
            message: format!("cannot read configuration: {e}"),
        })
    })?;
    let spec = parse_spec(&text, &name)?;
    Ok((spec, text))
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

/// A spec with every run-level choice made.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub format: Format,
    /// The spec as recorded in the manifest: kind and seed filled in, seed
    /// pushed into the sections, run-level paths and worker count removed.
    pub spec: ExperimentSpec,
}

/// Applies overrides, fills per-kind defaults and validates the result.
/// `text` and `path` only serve diagnostics.
pub fn resolve(
    kind: ExperimentKind,
    spec: ExperimentSpec,
    opts: &RunOptions,
    text: &str,
    path: &str,
) -> Result<ResolvedSpec, RunError> {
    let diag = |section: &str, message: String| {
        RunError::Spec(Diagnostic {
            path: path.to_string(),
            line: section_line(text, section),
            message,
        })
    };
    if let Some(k) = spec.kind {
        if k != kind {
            return Err(diag("kind", format!("file declares kind {k}, but {kind} was requested")));
        }
    }
    for (other, present) in spec.sections() {
        if present && other != kind {
            return Err(diag(
                other.name(),
                format!("section [{other}] does not belong to a {kind} experiment"),
            ));
        }
    }
    if spec.sim.is_some() && !kind.uses_sim() {
        return Err(diag("sim", format!("a {kind} experiment takes no [sim] section")));
    }
    if let Some(b) = spec.budget_seconds {
        if !(b > 0.0) {
            return Err(diag("budget_seconds", "budget_seconds must be positive".into()));
        }
    }
    let seed = opts
        .seed
        .or(spec.seed)
        .or_else(|| spec.sim.as_ref().map(|s| s.seed))
        .or_else(|| spec.momentum.as_ref().map(|m| m.seed))
        .unwrap_or(0);
    let workers = opts
        .workers
        .or(spec.workers)
        .unwrap_or_else(crate::ensemble::default_workers)
        .max(1);
    let out = opts
        .out
        .clone()
        .or_else(|| spec.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(kind.name()));
    let format = opts.format.or(spec.format).unwrap_or_default();

    let mut spec = spec;
    spec.kind = Some(kind);
    spec.seed = Some(seed);
    spec.workers = None;
    spec.out = None;
    spec.format = Some(format);
    if kind.uses_sim() {
        let mut sim = spec.sim();
        sim.seed = seed;
        spec.sim = Some(sim);
    }
    match kind {
        ExperimentKind::Simulate => {
            spec.simulate.get_or_insert_with(Default::default);
        }
        ExperimentKind::Couple => {
            let c = spec.couple.get_or_insert_with(Default::default).c.clone();
            spec.sim.as_mut().expect("filled above").tagged = (0..c.len()).collect();
        }
        ExperimentKind::Chaos => {
            let c = spec.chaos.get_or_insert_with(Default::default).c.clone();
            spec.sim.as_mut().expect("filled above").tagged = (0..c.len()).collect();
        }
        ExperimentKind::Kac => {
            spec.kac.get_or_insert_with(Default::default);
            spec.sim.as_mut().expect("filled above").tagged = vec![0];
        }
        ExperimentKind::Momentum => {
            spec.momentum.get_or_insert_with(Default::default).seed = seed;
        }
        ExperimentKind::Marginal => {
            spec.marginal.get_or_insert_with(Default::default);
        }
        ExperimentKind::Covariation => {
            spec.covariation.get_or_insert_with(Default::default);
            let sim = spec.sim.as_mut().expect("filled above");
            sim.store_martingale = true;
        }
    }
    pipelines::validate(kind, &spec).map_err(|(section, message)| diag(section, message))?;
    Ok(ResolvedSpec {
        kind,
        seed,
        workers,
        out,
        format,
        spec,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// A scalar outcome with its Monte Carlo standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: ExperimentKind,
    pub partial: bool,
    pub checks: Vec<Check>,
    pub statistics: Vec<Statistic>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ExperimentKind,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub format: Format,
    pub config: ExperimentSpec,
    pub wall_time_seconds: f64,
    pub partial: bool,
    pub budget_exceeded: bool,
    /// Every file of the run directory other than the manifest itself.
    pub files: Vec<String>,
    pub tables: Vec<String>,
    pub summary: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub summary: Summary,
}

impl RunOutcome {
    /// Exit status: budget overrun first, then failed checks when asked.
    pub fn exit_code(&self, check: bool) -> i32 {
        if self.manifest.budget_exceeded {
            EXIT_BUDGET
        } else if check && !self.summary.all_pass() {
            EXIT_CHECK_FAILED
        } else {
            EXIT_OK
        }
    }
}

/// Wall-clock budget checked between pipeline stages.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    start: Instant,
    limit: Option<f64>,
}

impl Budget {
    pub fn new(limit: Option<f64>) -> Self {
        Budget {
            start: Instant::now(),
            limit,
        }
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    pub fn exceeded(&self) -> bool {
        self.limit.is_some_and(|l| self.elapsed() > l)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Runs a resolved experiment and writes its directory. Nothing is written
/// if the simulation itself fails.
pub fn run_experiment(resolved: &ResolvedSpec) -> Result<RunOutcome, RunError> {
    let budget = Budget::new(resolved.spec.budget_seconds);
    let (tables, partial) = pipelines::run(resolved.kind, &resolved.spec, resolved.workers, &budget)
        .map_err(|e| match e {
            Error::InvalidConfig(_)
            | Error::InvalidDimension { .. }
            | Error::InfeasibleInitialData { .. }
            | Error::Domain(_) => RunError::Spec(Diagnostic {
                path: "<spec>".into(),
                line: None,
                message: e.to_string(),
            }),
            other => RunError::Sim(other),
        })?;
    let (checks, statistics) = evaluate(resolved.kind, &resolved.spec, &tables)?;
    let summary = Summary {
        kind: resolved.kind,
        partial,
        checks,
        statistics,
    };

    let dir = resolved.out.clone();
    std::fs::create_dir_all(&dir)?;
    let mut files = Vec::with_capacity(tables.len() + 1);
    for t in &tables {
        files.push(t.write(&dir, resolved.format)?);
    }
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    files.push(SUMMARY_FILE.to_string());
    let manifest = Manifest {
        kind: resolved.kind,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: resolved.seed,
        workers: resolved.workers,
        format: resolved.format,
        config: resolved.spec.clone(),
        wall_time_seconds: budget.elapsed(),
        partial,
        budget_exceeded: budget.exceeded(),
        files,
        tables: tables.iter().map(|t| t.name.clone()).collect(),
        summary: SUMMARY_FILE.to_string(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(RunOutcome { dir, manifest, summary })
}

pub fn read_manifest(path: &Path) -> Result<Manifest, RunError> {
    let path = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    Ok(serde_json::from_reader(std::fs::File::open(path)?)?)
}

fn run_dir(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    }
}

pub fn read_summary(manifest_path: &Path, manifest: &Manifest) -> Result<Summary, RunError> {
    Ok(serde_json::from_reader(std::fs::File::open(
        run_dir(manifest_path).join(&manifest.summary),
    )?)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub stored: Vec<Check>,
    pub recomputed: Vec<Check>,
}

impl AuditReport {
    pub fn consistent(&self) -> bool {
        self.stored == self.recomputed
    }
}

/// Recomputes a run's checks from its stored tables and spec.
pub fn audit_run(path: &Path) -> Result<AuditReport, RunError> {
    let manifest = read_manifest(path)?;
    let dir = run_dir(path);
    for f in &manifest.files {
        if !dir.join(f).is_file() {
            return Err(RunError::Audit(format!("manifest lists missing file {f}")));
        }
    }
    let tables = manifest
        .tables
        .iter()
        .map(|name| Table::read(&dir, name, manifest.format))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = read_summary(path, &manifest)?;
    let (recomputed, _) = evaluate(manifest.kind, &manifest.config, &tables)?;
    Ok(AuditReport {
        stored: summary.checks,
        recomputed,
    })
}
