//! File formats: network text, trial records, fit records.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::path::Path;

use edgewalk_core::sim::TrialRecord;
use edgewalk_core::survival::{FptEstimate, SurvivalDataset};
use edgewalk_core::{Gate, Link, Topology};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Config hash and base seed stamped on every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub base_seed: u64,
}

impl Provenance {
    pub fn comment_line(&self) -> String {
        format!(
            "# edgewalk config_hash={} base_seed={}\n",
            self.config_hash, self.base_seed
        )
    }
}

/// A network topology with the node states it starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct BnFile {
    pub topology: Topology,
    pub state: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BnParseError {
    /// 1-based line number.
    pub line: usize,
    /// 1-based field within the line, when the error is about one field.
    pub field: Option<usize>,
    pub message: String,
}

impl fmt::Display for BnParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.field {
            Some(field) => write!(f, "line {}, field {}: {}", self.line, field, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

impl std::error::Error for BnParseError {}

/// `bn <N>`, N lines of connection digits, N lines of gate digits, one line
/// of state bits in node order.
pub fn write_bn(topology: &Topology, state: u64) -> String {
    let n = topology.size();
    let mut out = format!("bn {n}\n");
    let digits = |out: &mut String, values: &mut dyn Iterator<Item = u8>| {
        let row: Vec<String> = values.map(|d| d.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    };
    for i in 0..n {
        digits(&mut out, &mut (0..n).map(|j| topology.link(i, j).digit()));
    }
    for i in 0..n {
        digits(&mut out, &mut (0..n - 1).map(|c| topology.gate(i, c).digit()));
    }
    digits(&mut out, &mut (0..n).map(|i| ((state >> i) & 1) as u8));
    out
}

pub fn parse_bn(text: &str) -> Result<BnFile, BnParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let err = |line, field, message: String| BnParseError { line, field, message };
    let end = text.lines().count() + 1;

    let (line, header) = lines
        .next()
        .ok_or_else(|| err(1, None, "missing `bn <N>` header".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("bn") {
        return Err(err(line, Some(1), "expected `bn`".into()));
    }
    let n: usize = parts
        .next()
        .ok_or_else(|| err(line, Some(2), "missing node count".into()))?
        .parse()
        .map_err(|_| err(line, Some(2), "node count is not an integer".into()))?;
    if parts.next().is_some() {
        return Err(err(line, Some(3), "unexpected field after node count".into()));
    }
    if !(2..=edgewalk_core::network::MAX_NODES).contains(&n) || n % 2 != 0 {
        return Err(err(
            line,
            Some(2),
            format!("node count {n} must be even and in [2, 64]"),
        ));
    }

    let mut row = |what: &str, width: usize, max: u8| -> Result<Vec<u8>, BnParseError> {
        let (line, text) = lines
            .next()
            .ok_or_else(|| err(end, None, format!("unexpected end of file, expected {what}")))?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != width {
            return Err(err(
                line,
                None,
                format!("{what}: expected {width} fields, found {}", fields.len()),
            ));
        }
        fields
            .iter()
            .enumerate()
            .map(|(k, f)| match f.parse::<u8>() {
                Ok(d) if d <= max => Ok(d),
                _ => Err(err(
                    line,
                    Some(k + 1),
                    format!("{what}: `{f}` is not a digit in 0..={max}"),
                )),
            })
            .collect()
    };

    let mut links = Vec::with_capacity(n * n);
    for _ in 0..n {
        links.extend(row("connection row", n, 2)?);
    }
    let mut gates = Vec::with_capacity(n * (n - 1));
    for _ in 0..n {
        gates.extend(row("gate row", n - 1, 2)?);
    }
    let bits = row("state row", n, 1)?;
    if let Some((line, _)) = lines.next() {
        return Err(err(line, None, "trailing content after the state row".into()));
    }
    let state = bits
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, b)| acc | (u64::from(*b) << i));
    let topology = Topology::new(
        n,
        links.into_iter().map(|d| Link::from_digit(d).unwrap()).collect(),
        gates.into_iter().map(|d| Gate::from_digit(d).unwrap()).collect(),
    )
    .map_err(|e| err(1, None, e.to_string()))?;
    Ok(BnFile { topology, state })
}

pub fn read_bn(path: &Path) -> Result<BnFile> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    parse_bn(&text).map_err(|e| {
        let e = if e.line == usize::MAX {
            BnParseError {
                line: text.lines().count() + 1,
                ..e
            }
        } else {
            e
        };
        LabError::data(path, e.to_string())
    })
}

/// Short content hash of a network file.
pub fn network_hash(text: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

/// One row of a trial-record table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub trial: usize,
    pub robot: usize,
    /// First-passage time, or the trial duration when censored.
    pub first_passage_s: f64,
    pub censored: bool,
    pub target_x: f64,
    pub target_y: f64,
}

pub fn record_rows(records: &[TrialRecord]) -> Vec<RecordRow> {
    records
        .iter()
        .enumerate()
        .flat_map(|(trial, rec)| {
            rec.first_passage.iter().enumerate().map(move |(robot, fp)| RecordRow {
                trial,
                robot,
                first_passage_s: fp.unwrap_or(rec.duration),
                censored: fp.is_none(),
                target_x: rec.target.x,
                target_y: rec.target.y,
            })
        })
        .collect()
}

pub fn rows_to_dataset(rows: &[RecordRow]) -> Result<SurvivalDataset> {
    Ok(SurvivalDataset::new(
        rows.iter().map(|r| r.first_passage_s).collect(),
        rows.iter().map(|r| !r.censored).collect(),
    )?)
}

/// CSV text with a provenance comment line followed by a header row.
pub fn csv_text<T: Serialize>(provenance: &Provenance, rows: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| LabError::Runtime(format!("csv encoding: {e}")))?;
    }
    let body = w
        .into_inner()
        .map_err(|e| LabError::Runtime(format!("csv encoding: {e}")))?;
    let mut out = provenance.comment_line();
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(out)
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| LabError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| LabError::data(path, format!("row {}: {e}", i + 1))))
        .collect()
}

/// Provenance stamped on the first line of a CSV file.
pub fn read_csv_provenance(path: &Path) -> Result<Provenance> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let first = text.lines().next().unwrap_or_default();
    let mut hash = None;
    let mut seed = None;
    for part in first.trim_start_matches('#').split_whitespace() {
        if let Some(v) = part.strip_prefix("config_hash=") {
            hash = Some(v.to_string());
        } else if let Some(v) = part.strip_prefix("base_seed=") {
            seed = v.parse().ok();
        }
    }
    match (hash, seed) {
        (Some(config_hash), Some(base_seed)) => Ok(Provenance { config_hash, base_seed }),
        _ => Err(LabError::data(path, "missing provenance line")),
    }
}

/// Weibull fit of one evaluation; parameters are null for the sentinel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub lambda: Option<f64>,
    pub k: Option<f64>,
    /// Null when no fit was possible (infinite first-passage time).
    pub mean_fpt: Option<f64>,
    pub residual: Option<f64>,
    pub n_events: usize,
    pub n_censored: usize,
}

impl FitRecord {
    pub fn from_estimate(est: &FptEstimate) -> Self {
        Self {
            lambda: est.fit.map(|f| f.scale),
            k: est.fit.map(|f| f.shape),
            mean_fpt: est.fit.map(|f| f.mean_fpt),
            residual: est.fit.map(|f| f.residual),
            n_events: est.n_events,
            n_censored: est.n_censored,
        }
    }

    pub fn tf(&self) -> f64 {
        self.mean_fpt.unwrap_or(f64::INFINITY)
    }
}

pub fn json_text<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| LabError::Runtime(format!("json encoding: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| LabError::data(path, e.to_string()))
}

/// Writes `text` to `dir/name`, creating `dir` as needed.
pub fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
    }
    let mut f = std::fs::File::create(&path).map_err(|e| LabError::io(&path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| LabError::io(&path, e))
}

/// Raster of node states, one row per step.
pub fn raster_csv(provenance: &Provenance, size: usize, rows: &[u64]) -> String {
    let mut out = provenance.comment_line();
    let header: Vec<String> = (0..size).map(|i| format!("n{i}")).collect();
    let _ = writeln!(out, "step,{}", header.join(","));
    for (t, bits) in rows.iter().enumerate() {
        let cells: Vec<&str> = (0..size)
            .map(|i| if (bits >> i) & 1 == 1 { "1" } else { "0" })
            .collect();
        let _ = writeln!(out, "{t},{}", cells.join(","));
    }
    out
}
