//! Command implementations behind the `popbias` binary. Each returns its printable output and
//! writes any files it produces; the binary only parses flags and prints.

pub mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use popbias::catalog::{normalize_title, ParseMode};
use popbias::distfit::{fit_pareto, ParetoFit};
use popbias::eval::{
    correlate_metrics, emit_report, parse_report_csv, run_evaluation, CorrelationMatrix, Dataset, EvalRow,
    RecommenderFactory, ReportFormat, RunManifest,
};
use popbias::metrics::{check_grid, default_battery, MetricId, SamplingConfig, VerdictGrid};
use serde::Serialize;

pub use config::{Overrides, RecommenderConfig, RunConfig};

pub const DEFAULT_OUT: &str = "popbias-out";

pub fn parse_mode(strict: bool) -> ParseMode {
    if strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantile {
    pub q: f64,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub movies: usize,
    pub interactions: usize,
    pub users: usize,
    pub rated_items: usize,
    pub movie_parse_errors: usize,
    pub rating_parse_errors: usize,
    pub popularity_quantiles: Vec<Quantile>,
    /// Most-rated item (lowest id on ties), its title and count.
    pub top_item: (u64, String, u64),
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "movies:        {}", self.movies)?;
        writeln!(f, "interactions:  {}", self.interactions)?;
        writeln!(f, "users:         {}", self.users)?;
        writeln!(f, "rated items:   {}", self.rated_items)?;
        if self.movie_parse_errors + self.rating_parse_errors > 0 {
            writeln!(f, "skipped lines: {} movies, {} ratings", self.movie_parse_errors, self.rating_parse_errors)?;
        }
        let qs: Vec<String> = self.popularity_quantiles.iter().map(|q| format!("q{}={}", q.q, q.value)).collect();
        writeln!(f, "popularity:    {}", qs.join(" "))?;
        write!(f, "most rated:    {} {} ({} ratings)", self.top_item.0, self.top_item.1, self.top_item.2)
    }
}

/// Nearest-rank quantile of an ascending slice.
fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

#[derive(Serialize)]
struct IndexEntry<'a> {
    item: u64,
    title: &'a str,
    year: i32,
    normalized_title: String,
    popularity: u64,
}

/// Loads a MovieLens-format directory, writes `catalog_index.json` to `out` and returns the summary.
pub fn cmd_ingest(dir: &Path, out: &Path, mode: ParseMode) -> Result<IngestSummary> {
    let data = Dataset::load(dir, mode)?;
    let mut counts: Vec<u64> = data.phi.iter().map(|(_, c)| c).collect();
    counts.sort_unstable();
    let popularity_quantiles = [0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0]
        .into_iter()
        .map(|q| Quantile { q, value: nearest_rank(&counts, q) })
        .collect();
    let (top_id, top_count) = data.phi.ranked()[0];
    let top_title = data.catalog.get(top_id).map(|e| e.title.clone()).unwrap_or_default();
    let users: std::collections::HashSet<_> = data.interactions.iter().map(|r| r.user).collect();
    let summary = IngestSummary {
        movies: data.catalog.len(),
        interactions: data.interactions.len(),
        users: users.len(),
        rated_items: data.phi.len(),
        movie_parse_errors: data.movie_errors.len(),
        rating_parse_errors: data.rating_errors.len(),
        popularity_quantiles,
        top_item: (top_id.0, top_title, top_count),
    };

    let entries: Vec<IndexEntry> = data
        .catalog
        .entries()
        .iter()
        .map(|e| IndexEntry {
            item: e.item.0,
            title: &e.title,
            year: e.year,
            normalized_title: normalize_title(&e.title, e.year).normalized_title,
            popularity: data.phi.get(e.item).unwrap_or(0),
        })
        .collect();
    create_dir(out)?;
    let json = serde_json::json!({ "summary": &summary, "entries": entries });
    write(&out.join("catalog_index.json"), &serde_json::to_string_pretty(&json)?)?;
    Ok(summary)
}

pub enum FitSource<'a> {
    /// One score per line; blank lines and `#` comments are ignored.
    Scores(&'a Path),
    /// Rating counts per item of a MovieLens-format directory.
    Dataset(&'a Path),
}

pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().with_context(|| format!("{}:{}: not a number: {line:?}", path.display(), i + 1))?;
        out.push(v);
    }
    Ok(out)
}

pub fn cmd_fit(source: FitSource<'_>, x_min: Option<f64>, mode: ParseMode) -> Result<ParetoFit<f64>> {
    let samples = match source {
        FitSource::Scores(p) => read_scores(p)?,
        FitSource::Dataset(d) => Dataset::load(d, mode)?.phi.iter().map(|(_, c)| c as f64).collect(),
    };
    Ok(fit_pareto(&samples, x_min)?)
}

pub fn format_fit(fit: &ParetoFit<f64>) -> String {
    format!("alpha={:.4} x_min={} ks_stat={:.4} n={}", fit.alpha, fit.x_min, fit.ks_stat, fit.n)
}

#[derive(Debug, Serialize)]
struct ManifestFile<'a> {
    tool_version: &'static str,
    data_dir: String,
    strict_parse: bool,
    movie_parse_errors: usize,
    rating_parse_errors: usize,
    run: &'a RunManifest,
}

#[derive(Debug, Clone)]
pub struct EvaluateOutput {
    pub out_dir: PathBuf,
    pub rows: Vec<EvalRow>,
    pub csv: String,
    pub markdown: String,
    pub manifest: RunManifest,
}

impl EvaluateOutput {
    pub fn summary(&self) -> String {
        let mut s = self.markdown.clone();
        for f in &self.manifest.failures {
            s.push_str(&format!("\nfailed: {}: {}", f.recommender, f.error));
        }
        if !self.manifest.skipped.is_empty() {
            s.push_str(&format!("\nskipped users: {}", self.manifest.skipped.len()));
        }
        s
    }
}

/// Runs the configured evaluation and writes `report.csv`, `report.md` and `manifest.json`
/// (plus `correlation.csv` when at least four rows allow it).
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvaluateOutput> {
    cfg.validate()?;
    let dir = cfg.data_dir()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let factories = cfg.factories()?;
    let data = Dataset::load(dir, parse_mode(cfg.strict_parse))?;
    let refs: Vec<&dyn RecommenderFactory> = factories.iter().map(|f| f.as_ref()).collect();
    let outcome = run_evaluation(&data, &cfg.eval, &refs)?;
    ensure!(!outcome.rows.is_empty(), "every recommender failed: {:?}", outcome.manifest.failures);

    let corr = if outcome.rows.len() >= 4 { correlate_metrics(&outcome.rows, &cfg.eval.metrics).ok() } else { None };
    let csv = emit_report(&outcome.rows, None, ReportFormat::Csv)?;
    let markdown = emit_report(&outcome.rows, corr.as_ref(), ReportFormat::Markdown)?;
    let manifest = ManifestFile {
        tool_version: env!("CARGO_PKG_VERSION"),
        data_dir: dir.display().to_string(),
        strict_parse: cfg.strict_parse,
        movie_parse_errors: data.movie_errors.len(),
        rating_parse_errors: data.rating_errors.len(),
        run: &outcome.manifest,
    };
    create_dir(&out)?;
    write(&out.join("report.csv"), &csv)?;
    write(&out.join("report.md"), &markdown)?;
    write(&out.join("manifest.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    if let Some(c) = &corr {
        write(&out.join("correlation.csv"), &c.to_csv())?;
    }
    Ok(EvaluateOutput { out_dir: out, rows: outcome.rows, csv, markdown, manifest: outcome.manifest })
}

pub fn parse_metrics(names: &[String]) -> Result<Vec<MetricId>> {
    if names.is_empty() {
        return Ok(MetricId::ALL.to_vec());
    }
    let mut out = Vec::new();
    for n in names.iter().flat_map(|n| n.split(',')) {
        let Ok(m) = n.trim().parse::<MetricId>() else {
            let known: Vec<&str> = MetricId::ALL.iter().map(|m| m.as_str()).collect();
            bail!("unknown metric {n:?}; expected one of {}", known.join(", "));
        };
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

pub fn cmd_desiderata(metrics: &[String], seed: Option<u64>) -> Result<VerdictGrid> {
    let metrics = parse_metrics(metrics)?;
    let mut sampling = SamplingConfig::default();
    if let Some(s) = seed {
        sampling.seed = s;
    }
    Ok(check_grid::<f64>(&metrics, &default_battery(), &sampling)?)
}

/// Pools the rows of every report (row names must be unique) and correlates the metrics.
pub fn cmd_correlate(reports: &[PathBuf], metrics: &[String]) -> Result<CorrelationMatrix> {
    if reports.is_empty() {
        bail!("no report files given");
    }
    let mut rows = Vec::new();
    for p in reports {
        let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
        rows.extend(parse_report_csv(&text).with_context(|| format!("invalid report {}", p.display()))?);
    }
    let mut names = std::collections::HashSet::new();
    for r in &rows {
        ensure!(names.insert(r.recommender.clone()), "recommender {} appears in more than one row", r.recommender);
    }
    let metrics = if metrics.is_empty() {
        MetricId::ALL.iter().copied().filter(|m| rows.iter().all(|r| r.metric(*m).is_some())).collect()
    } else {
        parse_metrics(metrics)?
    };
    Ok(correlate_metrics(&rows, &metrics)?)
}
