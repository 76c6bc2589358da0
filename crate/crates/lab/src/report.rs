//! Study manifests and the analysis built from them.
//!
//! Every simulating verb writes a manifest next to its trial records. The
//! report is computed from the manifest and the per-evaluation fits only, so
//! `analyze` on the stored files reproduces the inline report exactly.

use std::collections::BTreeMap;
use std::path::Path;

use edgewalk_core::chaos::classify_delta;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formats::{self, FitRecord, Provenance};
use crate::stats::{self, Correlation, Label, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    LmcrwGrid,
    RbnStudy,
    Evolve,
    PostEval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Baseline,
    Cell,
    Network,
    Evolved,
    /// Best individual of the first generation of an evolutionary run.
    InitialBest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEntry {
    pub id: String,
    pub role: Role,
    pub size: Option<usize>,
    pub rho: Option<f64>,
    pub alpha: Option<f64>,
    /// Network file relative to the study directory.
    pub network: Option<String>,
    pub network_hash: Option<String>,
    pub delta_mean: Option<f64>,
    pub d_bar: Option<f64>,
    /// Trial-record files, one per evaluation, relative to the study directory.
    pub records: Vec<String>,
}

impl GroupEntry {
    pub fn new(id: impl Into<String>, role: Role) -> Self {
        Self {
            id: id.into(),
            role,
            size: None,
            rho: None,
            alpha: None,
            network: None,
            network_hash: None,
            delta_mean: None,
            d_bar: None,
            records: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: StudyKind,
    pub provenance: Provenance,
    pub n_comparisons: usize,
    pub regime_tolerance: f64,
    /// Steps of the activation rasters written by `analyze`.
    pub trace_steps: usize,
    pub baseline: Option<GroupEntry>,
    pub groups: Vec<GroupEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub id: String,
    pub role: Role,
    pub size: Option<usize>,
    pub rho: Option<f64>,
    pub alpha: Option<f64>,
    pub network_hash: Option<String>,
    pub fits: Vec<FitRecord>,
    /// Mean over fitted evaluations; sentinels are counted, not averaged.
    pub mean_tf: Option<f64>,
    pub median_tf: Option<f64>,
    pub sd_tf: Option<f64>,
    pub sentinels: usize,
    pub delta_mean: Option<f64>,
    pub regime: Option<String>,
    pub d_bar: Option<f64>,
    pub verdict: Option<Verdict>,
    /// Bonferroni-adjusted p-value.
    pub p_adjusted: Option<f64>,
}

impl GroupSummary {
    /// First-passage time per evaluation, infinite for sentinels.
    pub fn tfs(&self) -> Vec<f64> {
        self.fits.iter().map(FitRecord::tf).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub group: String,
    pub size: Option<usize>,
    pub members: usize,
    pub worse_pct: f64,
    pub similar_pct: f64,
    pub better_pct: f64,
    /// Mean over every fitted evaluation of every member.
    pub mean_tf: Option<f64>,
    pub sd_tf: Option<f64>,
    pub sentinels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub size: usize,
    /// `delta` or `d_bar`, against the network mean first-passage time.
    pub x: String,
    pub r: f64,
    pub slope: f64,
    pub intercept: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub rho: f64,
    pub alpha: f64,
    pub mean_tf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub kind: StudyKind,
    pub provenance: Provenance,
    pub n_comparisons: usize,
    pub threshold: f64,
    pub baseline: Option<GroupSummary>,
    pub groups: Vec<GroupSummary>,
    pub table: Vec<TableRow>,
    pub correlations: Vec<CorrelationRow>,
    pub best_cell: Option<BestCell>,
}

fn finite(xs: &[f64]) -> Vec<f64> {
    xs.iter().copied().filter(|x| x.is_finite()).collect()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn sd(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    (xs.len() > 1).then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn summarize(entry: &GroupEntry, fits: Vec<FitRecord>, tolerance: f64) -> GroupSummary {
    let tfs: Vec<f64> = fits.iter().map(FitRecord::tf).collect();
    let ok = finite(&tfs);
    GroupSummary {
        id: entry.id.clone(),
        role: entry.role,
        size: entry.size,
        rho: entry.rho,
        alpha: entry.alpha,
        network_hash: entry.network_hash.clone(),
        mean_tf: mean(&ok),
        median_tf: median(&ok),
        sd_tf: sd(&ok),
        sentinels: tfs.len() - ok.len(),
        delta_mean: entry.delta_mean,
        regime: entry
            .delta_mean
            .map(|d| classify_delta(d, tolerance).label().to_string()),
        d_bar: entry.d_bar,
        verdict: None,
        p_adjusted: None,
        fits,
    }
}

/// Builds the report from the manifest and one fit per evaluation of every
/// group (baseline first when present, then groups in manifest order).
pub fn build_report(manifest: &Manifest, mut fits: Vec<Vec<FitRecord>>) -> Result<Report> {
    let tol = manifest.regime_tolerance;
    let baseline = manifest.baseline.as_ref().map(|b| summarize(b, fits.remove(0), tol));
    let mut groups: Vec<GroupSummary> = manifest
        .groups
        .iter()
        .zip(fits)
        .map(|(g, f)| summarize(g, f, tol))
        .collect();

    let m = manifest.n_comparisons.max(1);
    if let Some(base) = &baseline {
        let base_tfs = base.tfs();
        for g in groups
            .iter_mut()
            .filter(|g| matches!(g.role, Role::Network | Role::Evolved | Role::InitialBest))
        {
            let tfs = g.tfs();
            if tfs.len() >= 3 && base_tfs.len() >= 3 {
                let v = stats::compare(&tfs, &base_tfs, m)?;
                g.p_adjusted = Some((v.p_value * m as f64).min(1.0));
                g.verdict = Some(v);
            }
        }
    }

    let mut by_size: BTreeMap<(usize, u8), Vec<&GroupSummary>> = BTreeMap::new();
    for g in &groups {
        let tag = match g.role {
            Role::Network => 0,
            Role::Evolved => 1,
            _ => continue,
        };
        by_size.entry((g.size.unwrap_or(0), tag)).or_default().push(g);
    }
    let table = by_size
        .iter()
        .map(|(&(size, tag), members)| {
            let count = |label: Label| {
                let k = members
                    .iter()
                    .filter(|g| g.verdict.is_some_and(|v| v.label == label))
                    .count();
                100.0 * k as f64 / members.len() as f64
            };
            let all: Vec<f64> = members.iter().flat_map(|g| g.tfs()).collect();
            let ok = finite(&all);
            TableRow {
                group: format!("{}{size}", if tag == 0 { "RBN N" } else { "EBN N" }),
                size: Some(size),
                members: members.len(),
                worse_pct: count(Label::Worse),
                similar_pct: count(Label::Similar),
                better_pct: count(Label::Better),
                mean_tf: mean(&ok),
                sd_tf: sd(&ok),
                sentinels: all.len() - ok.len(),
            }
        })
        .collect();

    let mut correlations = Vec::new();
    for (&(size, tag), members) in &by_size {
        if tag != 0 {
            continue;
        }
        for (name, pick) in [
            (
                "delta",
                (|g: &GroupSummary| g.delta_mean) as fn(&GroupSummary) -> Option<f64>,
            ),
            ("d_bar", |g: &GroupSummary| g.d_bar),
        ] {
            let pairs: Vec<(f64, f64)> = members
                .iter()
                .filter_map(|g| Some((pick(g)?, g.mean_tf?)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect();
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(Correlation {
                r,
                slope,
                intercept,
                p_value,
                n,
            }) = stats::pearson_correlation(&x, &y)
            {
                correlations.push(CorrelationRow {
                    size,
                    x: name.to_string(),
                    r,
                    slope,
                    intercept,
                    p_value,
                    n,
                });
            }
        }
    }

    let best_cell = groups
        .iter()
        .filter(|g| g.role == Role::Cell)
        .filter_map(|g| Some((g, g.mean_tf?)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(g, tf)| BestCell {
            rho: g.rho.unwrap_or(f64::NAN),
            alpha: g.alpha.unwrap_or(f64::NAN),
            mean_tf: tf,
        });

    Ok(Report {
        kind: manifest.kind,
        provenance: manifest.provenance.clone(),
        n_comparisons: manifest.n_comparisons,
        threshold: stats::bonferroni_threshold(m),
        baseline,
        groups,
        table,
        correlations,
        best_cell,
    })
}

#[derive(Serialize)]
struct GroupRow<'a> {
    id: &'a str,
    role: Role,
    size: Option<usize>,
    rho: Option<f64>,
    alpha: Option<f64>,
    network_hash: Option<&'a str>,
    mean_tf: Option<f64>,
    median_tf: Option<f64>,
    sd_tf: Option<f64>,
    sentinels: usize,
    delta_mean: Option<f64>,
    regime: Option<&'a str>,
    d_bar: Option<f64>,
    test: Option<stats::TestKind>,
    p_value: Option<f64>,
    p_adjusted: Option<f64>,
    threshold: Option<f64>,
    verdict: Option<Label>,
}

#[derive(Serialize)]
struct EvaluationRow<'a> {
    id: &'a str,
    role: Role,
    size: Option<usize>,
    rho: Option<f64>,
    alpha: Option<f64>,
    evaluation: usize,
    tf: Option<f64>,
    lambda: Option<f64>,
    k: Option<f64>,
    residual: Option<f64>,
    n_events: usize,
    n_censored: usize,
}

#[derive(Serialize)]
struct HeatmapRow {
    rho: f64,
    alpha: f64,
    mean_tf: Option<f64>,
    sentinels: usize,
}

/// Writes `report.json` and the plot-ready tables derived from it.
pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    let p = &report.provenance;
    formats::write_file(dir, "report.json", &formats::json_text(report)?)?;

    let all: Vec<&GroupSummary> = report.baseline.iter().chain(&report.groups).collect();
    let rows: Vec<GroupRow> = all
        .iter()
        .map(|g| GroupRow {
            id: &g.id,
            role: g.role,
            size: g.size,
            rho: g.rho,
            alpha: g.alpha,
            network_hash: g.network_hash.as_deref(),
            mean_tf: g.mean_tf,
            median_tf: g.median_tf,
            sd_tf: g.sd_tf,
            sentinels: g.sentinels,
            delta_mean: g.delta_mean,
            regime: g.regime.as_deref(),
            d_bar: g.d_bar,
            test: g.verdict.map(|v| v.test),
            p_value: g.verdict.map(|v| v.p_value),
            p_adjusted: g.p_adjusted,
            threshold: g.verdict.map(|v| v.threshold),
            verdict: g.verdict.map(|v| v.label),
        })
        .collect();
    formats::write_file(dir, "groups.csv", &formats::csv_text(p, &rows)?)?;

    let evals: Vec<EvaluationRow> = all
        .iter()
        .flat_map(|g| {
            g.fits.iter().enumerate().map(move |(e, f)| EvaluationRow {
                id: &g.id,
                role: g.role,
                size: g.size,
                rho: g.rho,
                alpha: g.alpha,
                evaluation: e,
                tf: f.mean_fpt,
                lambda: f.lambda,
                k: f.k,
                residual: f.residual,
                n_events: f.n_events,
                n_censored: f.n_censored,
            })
        })
        .collect();
    formats::write_file(dir, "evaluations.csv", &formats::csv_text(p, &evals)?)?;

    if !report.table.is_empty() {
        formats::write_file(dir, "table.csv", &formats::csv_text(p, &report.table)?)?;
    }
    if !report.correlations.is_empty() {
        formats::write_file(dir, "correlations.csv", &formats::csv_text(p, &report.correlations)?)?;
    }
    if report.kind == StudyKind::LmcrwGrid {
        let heat: Vec<HeatmapRow> = report
            .groups
            .iter()
            .filter(|g| g.role == Role::Cell)
            .map(|g| HeatmapRow {
                rho: g.rho.unwrap_or(f64::NAN),
                alpha: g.alpha.unwrap_or(f64::NAN),
                mean_tf: g.mean_tf,
                sentinels: g.sentinels,
            })
            .collect();
        formats::write_file(dir, "heatmap.csv", &formats::csv_text(p, &heat)?)?;
    }
    Ok(())
}
