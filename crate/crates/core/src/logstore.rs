//! Historical transfer log schema, CSV ingestion/emission and validation.
//!
//! Every other module works off the [`TransferLogEntry`] record: five
//! context attributes identifying the transfer environment, the five
//! tunable parameters that were used, and the achieved throughput and
//! energy. The on-disk format is a single CSV schema (see [`CSV_HEADER`]).

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;
use thiserror::Error;

/// Canonical CSV column names, in file order.
pub const CSV_HEADER: [&str; 13] = [
    "entry_no",
    "file_size_kb",
    "num_files",
    "rtt_ms",
    "buf_size_mb",
    "bandwidth_mbps",
    "throughput_mbps",
    "energy_j",
    "cc",
    "p",
    "pp",
    "cpu_num",
    "cpu_freq_ghz",
];

#[derive(Debug, Error)]
pub enum LogError {
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("row {row}: non-numeric value for `{column}`")]
    NonNumericField { row: usize, column: String },
    #[error("row {row}: non-positive value {value} for `{column}`")]
    NonPositiveField {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("duplicate entry_no {0}")]
    DuplicateEntryNo(u64),
    #[error("log table has no data rows")]
    EmptyTable,
    #[error("empty input")]
    EmptyInput,
    #[error("non-positive value {0}")]
    NonPositiveValue(f64),
    #[error("dataset spec inconsistent: {num_files} files x {avg_bytes} avg bytes vs total {total_bytes}")]
    InconsistentDataset {
        num_files: u64,
        avg_bytes: f64,
        total_bytes: u64,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// The five search attributes, in the canonical tie-break order used
/// everywhere an ordering between attributes matters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attribute {
    FileSize,
    NumFiles,
    Rtt,
    BufSize,
    Bandwidth,
}

impl Attribute {
    pub const ALL: [Attribute; 5] = [
        Attribute::FileSize,
        Attribute::NumFiles,
        Attribute::Rtt,
        Attribute::BufSize,
        Attribute::Bandwidth,
    ];

    /// Column name in the CSV schema.
    pub fn column_name(&self) -> &'static str {
        match self {
            Attribute::FileSize => "file_size_kb",
            Attribute::NumFiles => "num_files",
            Attribute::Rtt => "rtt_ms",
            Attribute::BufSize => "buf_size_mb",
            Attribute::Bandwidth => "bandwidth_mbps",
        }
    }

    pub fn index(&self) -> usize {
        Attribute::ALL.iter().position(|a| a == self).unwrap()
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column_name())
    }
}

/// The tunable parameter vector: three application-layer knobs
/// (concurrency, parallelism, pipelining) and two kernel-layer knobs
/// (active CPU cores, CPU frequency level).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunableParams {
    pub cc: u32,
    pub p: u32,
    pub pp: u32,
    pub cpu_num: u32,
    pub cpu_freq_ghz: f64,
}

impl TunableParams {
    pub fn new(cc: u32, p: u32, pp: u32, cpu_num: u32, cpu_freq_ghz: f64) -> Self {
        Self {
            cc,
            p,
            pp,
            cpu_num,
            cpu_freq_ghz,
        }
    }

    /// Total TCP streams opened by this setting.
    pub fn streams(&self) -> u32 {
        self.cc * self.p
    }
}

impl fmt::Display for TunableParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(cc={}, p={}, pp={}, cpu_num={}, cpu_freq={})",
            self.cc, self.p, self.pp, self.cpu_num, self.cpu_freq_ghz
        )
    }
}

/// One historical transfer observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferLogEntry {
    pub entry_no: u64,
    pub file_size_kb: f64,
    pub num_files: f64,
    pub rtt_ms: f64,
    pub buf_size_mb: f64,
    pub bandwidth_mbps: f64,
    pub throughput_mbps: f64,
    pub energy_j: f64,
    pub params: TunableParams,
}

impl TransferLogEntry {
    pub fn attribute(&self, attr: Attribute) -> f64 {
        match attr {
            Attribute::FileSize => self.file_size_kb,
            Attribute::NumFiles => self.num_files,
            Attribute::Rtt => self.rtt_ms,
            Attribute::BufSize => self.buf_size_mb,
            Attribute::Bandwidth => self.bandwidth_mbps,
        }
    }
}

/// The five-attribute context identifying a transfer environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeKey {
    pub file_size_kb: f64,
    pub num_files: f64,
    pub rtt_ms: f64,
    pub buf_size_mb: f64,
    pub bandwidth_mbps: f64,
}

impl AttributeKey {
    pub fn new(
        file_size_kb: f64,
        num_files: f64,
        rtt_ms: f64,
        buf_size_mb: f64,
        bandwidth_mbps: f64,
    ) -> Self {
        Self {
            file_size_kb,
            num_files,
            rtt_ms,
            buf_size_mb,
            bandwidth_mbps,
        }
    }

    pub fn get(&self, attr: Attribute) -> f64 {
        match attr {
            Attribute::FileSize => self.file_size_kb,
            Attribute::NumFiles => self.num_files,
            Attribute::Rtt => self.rtt_ms,
            Attribute::BufSize => self.buf_size_mb,
            Attribute::Bandwidth => self.bandwidth_mbps,
        }
    }

    /// Same key with the RTT slot replaced by a live measurement.
    pub fn with_rtt(mut self, rtt_ms: f64) -> Self {
        self.rtt_ms = rtt_ms;
        self
    }
}

/// Projection of a log entry onto its five search attributes.
pub fn attribute_key(entry: &TransferLogEntry) -> AttributeKey {
    AttributeKey {
        file_size_kb: entry.file_size_kb,
        num_files: entry.num_files,
        rtt_ms: entry.rtt_ms,
        buf_size_mb: entry.buf_size_mb,
        bandwidth_mbps: entry.bandwidth_mbps,
    }
}

/// An ordered collection of log entries with unique `entry_no` ids.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "LogTableWire", into = "LogTableWire")]
pub struct LogTable {
    entries: Vec<TransferLogEntry>,
    provenance: String,
    // entry_no -> position, kept in sync with `entries`
    index: HashMap<u64, usize>,
}

#[derive(Serialize, Deserialize, Clone)]
struct LogTableWire {
    entries: Vec<TransferLogEntry>,
    provenance: String,
}

impl From<LogTableWire> for LogTable {
    fn from(wire: LogTableWire) -> Self {
        let index = build_index(&wire.entries);
        Self {
            entries: wire.entries,
            provenance: wire.provenance,
            index,
        }
    }
}

impl From<LogTable> for LogTableWire {
    fn from(table: LogTable) -> Self {
        Self {
            entries: table.entries,
            provenance: table.provenance,
        }
    }
}

impl PartialEq for LogTable {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.provenance == other.provenance
    }
}

fn build_index(entries: &[TransferLogEntry]) -> HashMap<u64, usize> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.entry_no, i))
        .collect()
}

impl LogTable {
    pub fn new(
        entries: Vec<TransferLogEntry>,
        provenance: impl Into<String>,
    ) -> Result<Self, LogError> {
        let index = build_index(&entries);
        if index.len() != entries.len() {
            let mut seen = HashSet::with_capacity(entries.len());
            for e in &entries {
                if !seen.insert(e.entry_no) {
                    return Err(LogError::DuplicateEntryNo(e.entry_no));
                }
            }
        }
        Ok(Self {
            entries,
            provenance: provenance.into(),
            index,
        })
    }

    pub fn entries(&self) -> &[TransferLogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn by_entry_no(&self, entry_no: u64) -> Option<&TransferLogEntry> {
        self.index.get(&entry_no).map(|&i| &self.entries[i])
    }

    /// One attribute column, in row order.
    pub fn column(&self, attr: Attribute) -> Vec<f64> {
        self.entries.iter().map(|e| e.attribute(attr)).collect()
    }
}

fn parse_field<T: std::str::FromStr>(raw: &str, row: usize, column: &str) -> Result<T, LogError> {
    raw.trim().parse().map_err(|_| LogError::NonNumericField {
        row,
        column: column.to_string(),
    })
}

fn check_positive(value: f64, row: usize, column: &str) -> Result<f64, LogError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(LogError::NonPositiveField {
            row,
            column: column.to_string(),
            value,
        })
    }
}

/// Parses the canonical CSV schema into a [`LogTable`].
///
/// Columns may appear in any order but all thirteen must be present.
/// Rows keep their file order; `entry_no` must be unique.
pub fn parse_logs(csv_text: &str) -> Result<LogTable, LogError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());

    let headers = reader.headers()?.clone();
    let mut positions = [0usize; 13];
    for (i, name) in CSV_HEADER.iter().enumerate() {
        positions[i] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| LogError::MissingColumn(name.to_string()))?;
    }

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        // Row numbers are 1-based and count the header.
        let row = i + 2;
        let field = |col: usize| record.get(positions[col]).unwrap_or("");

        let entry_no: u64 = parse_field(field(0), row, CSV_HEADER[0])?;
        if entry_no == 0 {
            return Err(LogError::NonPositiveField {
                row,
                column: CSV_HEADER[0].to_string(),
                value: 0.0,
            });
        }
        if !seen.insert(entry_no) {
            return Err(LogError::DuplicateEntryNo(entry_no));
        }

        let mut reals = [0f64; 7];
        for (k, slot) in reals.iter_mut().enumerate() {
            let col = k + 1;
            let v: f64 = parse_field(field(col), row, CSV_HEADER[col])?;
            *slot = check_positive(v, row, CSV_HEADER[col])?;
        }

        let mut ints = [0u32; 4];
        for (k, slot) in ints.iter_mut().enumerate() {
            let col = k + 8;
            let v: u32 = parse_field(field(col), row, CSV_HEADER[col])?;
            if v == 0 {
                return Err(LogError::NonPositiveField {
                    row,
                    column: CSV_HEADER[col].to_string(),
                    value: 0.0,
                });
            }
            *slot = v;
        }

        let freq: f64 = parse_field(field(12), row, CSV_HEADER[12])?;
        let freq = check_positive(freq, row, CSV_HEADER[12])?;

        entries.push(TransferLogEntry {
            entry_no,
            file_size_kb: reals[0],
            num_files: reals[1],
            rtt_ms: reals[2],
            buf_size_mb: reals[3],
            bandwidth_mbps: reals[4],
            throughput_mbps: reals[5],
            energy_j: reals[6],
            params: TunableParams::new(ints[0], ints[1], ints[2], ints[3], freq),
        });
    }

    if entries.is_empty() {
        return Err(LogError::EmptyTable);
    }
    LogTable::new(entries, "csv")
}

/// Emits a table back to the canonical CSV schema.
///
/// Real values are written in Rust's shortest exact decimal form, so
/// `parse_logs(write_logs(t))` reproduces every numeric value.
pub fn write_logs(table: &LogTable) -> String {
    let mut out = String::new();
    out.push_str(&CSV_HEADER.join(","));
    out.push('\n');
    for e in table.entries() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            e.entry_no,
            e.file_size_kb,
            e.num_files,
            e.rtt_ms,
            e.buf_size_mb,
            e.bandwidth_mbps,
            e.throughput_mbps,
            e.energy_j,
            e.params.cc,
            e.params.p,
            e.params.pp,
            e.params.cpu_num,
            e.params.cpu_freq_ghz,
        ));
    }
    out
}

/// A suspicious-but-accepted row found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationFlag {
    pub entry_no: u64,
    pub message: String,
}

/// Flags rows whose achieved throughput exceeds the link bandwidth.
/// Logs are treated as noisy observations, so such rows are kept.
pub fn validate(table: &LogTable) -> Vec<ValidationFlag> {
    table
        .entries()
        .iter()
        .filter(|e| e.throughput_mbps > e.bandwidth_mbps)
        .map(|e| ValidationFlag {
            entry_no: e.entry_no,
            message: format!(
                "throughput {} Mbps exceeds bandwidth {} Mbps",
                e.throughput_mbps, e.bandwidth_mbps
            ),
        })
        .collect()
}

/// Divides every value by the column maximum, mapping the column into
/// `(0, 1]` with at least one value equal to 1.
pub fn normalize_column(values: &[f64]) -> Result<Vec<f64>, LogError> {
    if values.is_empty() {
        return Err(LogError::EmptyInput);
    }
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        if v <= 0.0 {
            return Err(LogError::NonPositiveValue(v));
        }
        max = max.max(v);
    }
    Ok(values.iter().map(|v| v / max).collect())
}

/// Size class of a dataset, derived from its average file size. The class
/// drives the online tuner's adjustment cadence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SizeClass::Small => "small",
            SizeClass::Medium => "medium",
            SizeClass::Large => "large",
        };
        f.write_str(s)
    }
}

const MB: f64 = 1_000_000.0;

/// A dataset to transfer: file count, total volume and average file size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub num_files: u64,
    pub total_size_bytes: u64,
    pub avg_file_size_bytes: f64,
}

impl DatasetSpec {
    /// Builds a spec from file count and total size; the average is derived.
    pub fn new(num_files: u64, total_size_bytes: u64) -> Self {
        let avg = if num_files == 0 {
            0.0
        } else {
            total_size_bytes as f64 / num_files as f64
        };
        Self {
            num_files,
            total_size_bytes,
            avg_file_size_bytes: avg,
        }
    }

    /// Builds a spec from all three fields, checking that the average and
    /// count agree with the total to within 1%.
    pub fn from_parts(
        num_files: u64,
        total_size_bytes: u64,
        avg_file_size_bytes: f64,
    ) -> Result<Self, LogError> {
        let implied = avg_file_size_bytes * num_files as f64;
        let total = total_size_bytes as f64;
        if total > 0.0 && (implied - total).abs() > 0.01 * total {
            return Err(LogError::InconsistentDataset {
                num_files,
                avg_bytes: avg_file_size_bytes,
                total_bytes: total_size_bytes,
            });
        }
        Ok(Self {
            num_files,
            total_size_bytes,
            avg_file_size_bytes,
        })
    }

    pub fn size_class(&self) -> SizeClass {
        classify_dataset(self)
    }
}

/// Small below 1 MB average file size, Medium below 64 MB, Large above.
pub fn classify_dataset(spec: &DatasetSpec) -> SizeClass {
    if spec.avg_file_size_bytes < MB {
        SizeClass::Small
    } else if spec.avg_file_size_bytes < 64.0 * MB {
        SizeClass::Medium
    } else {
        SizeClass::Large
    }
}
