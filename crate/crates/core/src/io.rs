//! Dataset, fit-result and summary file formats.
//!
//! Datasets and results are JSON lines. Floats are written as shortest
//! round-trip decimals, so `read(write(x)) == x` bit for bit. Every reader
//! reports errors with 1-based line numbers and never skips a bad line.
//!
//! Summary tables are tab-separated with publication-style cells: percentages with
//! two decimals and errors as `2.5E-1 ± 2.2E-1`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{FitResult, ScaleSeries};
use crate::stats::{self, ArmOutcomes, GroupKey, MeanSd, PairedSummary};
use crate::synth::ExperimentRecord;

pub const SCHEMA_VERSION: &str = "1";
pub const SCHEMA_KEY: &str = "schema_version";
/// Placeholder for a grouping dimension that was not selected.
pub const ANY: &str = "*";
pub const MISSING: &str = "NA";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: invalid: {reason}")]
    Invariant { line: usize, reason: String },
}

impl IoError {
    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Why one line was rejected; the caller attaches the line number.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LineError {
    #[error("malformed: {0}")]
    Malformed(String),
    #[error("invalid: {0}")]
    Invariant(String),
}

impl LineError {
    fn at(self, line: usize) -> IoError {
        match self {
            Self::Malformed(reason) => IoError::Malformed { line, reason },
            Self::Invariant(reason) => IoError::Invariant { line, reason },
        }
    }
}

fn invariant(msg: impl Into<String>) -> LineError {
    LineError::Invariant(msg.into())
}

fn check_expectations(values: &[f64]) -> Result<(), LineError> {
    match values.iter().position(|v| !(-1.0..=1.0).contains(v)) {
        Some(i) => Err(invariant(format!("expectation {} at index {i} outside [-1, 1]", values[i]))),
        None => Ok(()),
    }
}

/// Parses and validates one dataset line. The schema-version key is checked
/// and removed from `meta`.
pub fn parse_record_line(line: &str) -> Result<ExperimentRecord, LineError> {
    let mut record: ExperimentRecord =
        serde_json::from_str(line).map_err(|e| LineError::Malformed(e.to_string()))?;
    if let Some(version) = record.meta.remove(SCHEMA_KEY) {
        if version != SCHEMA_VERSION {
            return Err(invariant(format!("unsupported schema version `{version}`")));
        }
    }
    if record.lambdas.len() != record.expectations.len() {
        return Err(invariant(format!(
            "{} lambdas but {} expectations",
            record.lambdas.len(),
            record.expectations.len()
        )));
    }
    check_expectations(&record.expectations)?;
    record.series().map_err(|e| invariant(e.to_string()))?;
    if !record.ideal.is_finite() {
        return Err(invariant("ideal value is not finite"));
    }
    if record.shots == 0 {
        return Err(invariant("shots must be positive"));
    }
    Ok(record)
}

fn record_line(record: &ExperimentRecord) -> String {
    let mut record = record.clone();
    record.meta.insert(SCHEMA_KEY.into(), SCHEMA_VERSION.into());
    serde_json::to_string(&record).expect("records serialize")
}

fn read_lines<T>(
    reader: impl BufRead,
    parse: impl Fn(&str) -> Result<T, LineError>,
) -> Result<Vec<T>, IoError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| IoError::Malformed {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse(&line).map_err(|e| e.at(i + 1))?);
    }
    Ok(out)
}

fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path).map(BufReader::new).map_err(|e| IoError::io(path, e))
}

fn write_file(path: &Path, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write(&mut w).and_then(|_| w.flush()).map_err(|e| IoError::io(path, e))
}

pub fn read_dataset_from(reader: impl BufRead) -> Result<Vec<ExperimentRecord>, IoError> {
    read_lines(reader, parse_record_line)
}

pub fn read_dataset(path: &Path) -> Result<Vec<ExperimentRecord>, IoError> {
    read_dataset_from(open(path)?)
}

pub fn write_dataset_to(records: &[ExperimentRecord], w: &mut dyn Write) -> io::Result<()> {
    for r in records {
        writeln!(w, "{}", record_line(r))?;
    }
    Ok(())
}

pub fn write_dataset(records: &[ExperimentRecord], path: &Path) -> Result<(), IoError> {
    write_file(path, |w| write_dataset_to(records, w))
}

/// One fit of one record, as written by `benchmark`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub record_id: String,
    pub backend: String,
    pub lambda_set: String,
    pub width: String,
    pub ideal: f64,
    pub fit: FitResult,
}

impl ResultRow {
    pub fn new(record: &ExperimentRecord, fit: FitResult) -> Self {
        Self {
            record_id: record.id.clone(),
            backend: record.backend.clone(),
            lambda_set: record.lambda_label(),
            width: record.width_label(),
            ideal: record.ideal,
            fit,
        }
    }
}

pub fn parse_result_line(line: &str) -> Result<ResultRow, LineError> {
    let row: ResultRow = serde_json::from_str(line).map_err(|e| LineError::Malformed(e.to_string()))?;
    if row.fit.is_converged() && row.fit.finite_estimate().is_none() {
        return Err(invariant("converged fit without a finite estimate"));
    }
    Ok(row)
}

pub fn read_results_from(reader: impl BufRead) -> Result<Vec<ResultRow>, IoError> {
    read_lines(reader, parse_result_line)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, IoError> {
    read_results_from(open(path)?)
}

pub fn write_results_to(rows: &[ResultRow], w: &mut dyn Write) -> io::Result<()> {
    for row in rows {
        writeln!(w, "{}", serde_json::to_string(row).expect("results serialize"))?;
    }
    Ok(())
}

pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<(), IoError> {
    write_file(path, |w| write_results_to(rows, w))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonSeries {
    Columns { lambdas: Vec<f64>, values: Vec<f64> },
    Pairs(Vec<(f64, f64)>),
}

/// Parses a single series: a JSON object `{"lambdas": [..], "values": [..]}`,
/// a JSON array of `[λ, y]` pairs, or text with one `λ y` pair per line
/// (comma or whitespace separated, `#` starts a comment).
pub fn parse_series(input: &str) -> Result<ScaleSeries, LineError> {
    let trimmed = input.trim_start();
    let (lambdas, values) = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        match serde_json::from_str::<JsonSeries>(trimmed).map_err(|e| LineError::Malformed(e.to_string()))? {
            JsonSeries::Columns { lambdas, values } => (lambdas, values),
            JsonSeries::Pairs(pairs) => pairs.into_iter().unzip(),
        }
    } else {
        let mut lambdas = Vec::new();
        let mut values = Vec::new();
        for (i, raw) in input.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            let [l, y] = fields[..] else {
                return Err(LineError::Malformed(format!("line {}: expected two columns", i + 1)));
            };
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| LineError::Malformed(format!("line {}: `{s}`: {e}", i + 1)))
            };
            lambdas.push(num(l)?);
            values.push(num(y)?);
        }
        (lambdas, values)
    };
    if lambdas.len() != values.len() {
        return Err(invariant(format!("{} lambdas but {} values", lambdas.len(), values.len())));
    }
    check_expectations(&values)?;
    ScaleSeries::new(lambdas, values).map_err(|e| invariant(e.to_string()))
}

/// Parses `"1,2,3;1,3,5"` into λ sets, each strictly increasing and ≥ 1.
pub fn parse_lambda_sets(input: &str) -> Result<Vec<Vec<f64>>, LineError> {
    let sets = input
        .split(';')
        .map(|set| {
            let lambdas = set
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| LineError::Malformed(format!("`{}`: {e}", v.trim())))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            ScaleSeries::new(lambdas.clone(), vec![0.0; lambdas.len()])
                .map_err(|e| invariant(format!("lambda set `{}`: {e}", set.trim())))?;
            Ok(lambdas)
        })
        .collect::<Result<Vec<_>, LineError>>()?;
    Ok(sets)
}

/// Which record attributes split the comparison into groups. The model
/// family always does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GroupBy {
    pub lambda_set: bool,
    pub backend: bool,
    pub width: bool,
}

impl GroupBy {
    pub const ALL: Self = Self {
        lambda_set: true,
        backend: true,
        width: true,
    };

    pub fn parse(input: &str) -> Result<Self, LineError> {
        let mut g = Self::default();
        for part in input.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "lambda_set" => g.lambda_set = true,
                "backend" => g.backend = true,
                "width" => g.width = true,
                other => return Err(LineError::Malformed(format!("unknown group-by key `{other}`"))),
            }
        }
        Ok(g)
    }

    fn key(&self, row: &ResultRow) -> GroupKey {
        let pick = |on: bool, v: &str| if on { v.to_string() } else { ANY.to_string() };
        GroupKey {
            family: row.fit.spec.family_key(),
            lambda_set: pick(self.lambda_set, &row.lambda_set),
            backend: pick(self.backend, &row.backend),
            width: pick(self.width, &row.width),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryTable {
    /// Sorted by group key.
    pub rows: Vec<PairedSummary>,
}

/// Pairs bounded and unbounded fits by record id within each group, then
/// applies Holm across all groups. `max_count` per group is the number of
/// distinct records seen in that group.
pub fn summarize_results(rows: &[ResultRow], group_by: GroupBy) -> Result<SummaryTable, LineError> {
    #[derive(Default)]
    struct Acc {
        bounded: ArmOutcomes,
        unbounded: ArmOutcomes,
        ideals: BTreeMap<String, f64>,
        records: BTreeSet<String>,
    }
    let mut groups: BTreeMap<GroupKey, Acc> = BTreeMap::new();
    for row in rows {
        let acc = groups.entry(group_by.key(row)).or_default();
        let arm = if row.fit.spec.bounded { &mut acc.bounded } else { &mut acc.unbounded };
        if arm.insert(row.record_id.clone(), row.fit.finite_estimate()).is_some() {
            return Err(invariant(format!(
                "duplicate result for record `{}` and model `{}`",
                row.record_id, row.fit.spec
            )));
        }
        if let Some(prev) = acc.ideals.insert(row.record_id.clone(), row.ideal) {
            if prev != row.ideal {
                return Err(invariant(format!("conflicting ideal values for record `{}`", row.record_id)));
            }
        }
        acc.records.insert(row.record_id.clone());
    }
    let mut summaries: Vec<PairedSummary> = groups
        .into_iter()
        .map(|(key, acc)| stats::summarize_pairs(key, &acc.bounded, &acc.unbounded, &acc.ideals, acc.records.len()))
        .collect();
    stats::apply_holm(&mut summaries);
    Ok(SummaryTable { rows: summaries })
}

/// Two significant digits with a signed exponent: `2.5E-1`, `1.3E+0`.
pub fn format_sci(value: f64) -> String {
    if !value.is_finite() {
        return MISSING.into();
    }
    let s = format!("{value:.1E}");
    match s.split_once('E') {
        Some((mantissa, exp)) if !exp.starts_with('-') => format!("{mantissa}E+{exp}"),
        _ => s,
    }
}

pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}

/// `mean ± sd`; the sd part is omitted for a single value.
pub fn format_mean_sd(m: Option<MeanSd>) -> String {
    match m {
        Some(MeanSd { mean, sd: Some(sd) }) => format!("{} ± {}", format_sci(mean), format_sci(sd)),
        Some(MeanSd { mean, sd: None }) => format_sci(mean),
        None => MISSING.into(),
    }
}

/// Integer with comma thousands separators.
pub fn format_count(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// One table cell in the layout
/// `k=13 (93.33% / 86.67% / 86.67%) MAE: b / u MSE: b / u`.
pub fn render_cell(s: &PairedSummary) -> String {
    format!(
        "k={} ({} / {} / {}) MAE: {} / {} MSE: {} / {}",
        format_count(s.k),
        format_percent(s.coverage_bounded),
        format_percent(s.coverage_unbounded),
        format_percent(s.coverage_matched),
        format_mean_sd(s.mae_bounded),
        format_mean_sd(s.mae_unbounded),
        format_mean_sd(s.mse_bounded),
        format_mean_sd(s.mse_unbounded),
    )
}

pub const SUMMARY_COLUMNS: [&str; 18] = [
    "family",
    "lambda_set",
    "backend",
    "width",
    "k",
    "max_count",
    "cov_bounded",
    "cov_unbounded",
    "cov_matched",
    "mae_bounded",
    "mae_unbounded",
    "mse_bounded",
    "mse_unbounded",
    "wilcoxon_p",
    "holm_p",
    "significant",
    "cohens_d",
    "d_category",
];

pub fn render_summary(table: &SummaryTable, alpha: f64) -> String {
    let mut out = SUMMARY_COLUMNS.join("\t");
    out.push('\n');
    let opt = |v: Option<String>| v.unwrap_or_else(|| MISSING.into());
    for s in &table.rows {
        let effect = s.effect.as_ref();
        let cells = [
            s.group.family.clone(),
            s.group.lambda_set.clone(),
            s.group.backend.clone(),
            s.group.width.clone(),
            s.k.to_string(),
            s.max_count.to_string(),
            format_percent(s.coverage_bounded),
            format_percent(s.coverage_unbounded),
            format_percent(s.coverage_matched),
            format_mean_sd(s.mae_bounded),
            format_mean_sd(s.mae_unbounded),
            format_mean_sd(s.mse_bounded),
            format_mean_sd(s.mse_unbounded),
            opt(s.wilcoxon_p().map(format_sci)),
            opt(s.holm_p.map(format_sci)),
            opt(s.holm_p.map(|p| if p < alpha { "yes".into() } else { "no".into() })),
            opt(effect.and_then(|e| e.d).map(|d| format!("{d:.3}"))),
            opt(effect.and_then(|e| e.category).map(|c| c.to_string())),
        ];
        let _ = writeln!(out, "{}", cells.join("\t"));
    }
    out
}

pub fn write_summary(table: &SummaryTable, alpha: f64, path: &Path) -> Result<(), IoError> {
    write_file(path, |w| w.write_all(render_summary(table, alpha).as_bytes()))
}

/// Per-group improvement vectors, written next to a summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub group: GroupKey,
    pub holm_p: Option<f64>,
    pub delta: Vec<f64>,
}

pub fn deltas_path(summary: &Path) -> PathBuf {
    let mut name = summary.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".deltas.jsonl");
    summary.with_file_name(name)
}

pub fn delta_rows(table: &SummaryTable) -> Vec<DeltaRow> {
    table
        .rows
        .iter()
        .map(|s| DeltaRow {
            group: s.group.clone(),
            holm_p: s.holm_p,
            delta: s.delta.clone(),
        })
        .collect()
}

pub fn write_deltas(rows: &[DeltaRow], path: &Path) -> Result<(), IoError> {
    write_file(path, |w| {
        for row in rows {
            writeln!(w, "{}", serde_json::to_string(row).expect("deltas serialize"))?;
        }
        Ok(())
    })
}

pub fn parse_delta_line(line: &str) -> Result<DeltaRow, LineError> {
    let row: DeltaRow = serde_json::from_str(line).map_err(|e| LineError::Malformed(e.to_string()))?;
    if row.delta.iter().any(|d| !d.is_finite()) {
        return Err(invariant("non-finite improvement value"));
    }
    Ok(row)
}

pub fn read_deltas(path: &Path) -> Result<Vec<DeltaRow>, IoError> {
    read_lines(open(path)?, parse_delta_line)
}
