//! Sweep execution, seeding and table output.
//!
//! Dynamics modules describe a grid point as a pure function of its
//! parameters and a derived seed; [`run_parallel`] evaluates the grid on a
//! dedicated thread pool and hands back rows in grid order, so the output is
//! identical whatever the thread count.

pub mod csv;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt;
use std::panic::{self, AssertUnwindSafe};

use chrono::{DateTime, SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv::{format_real, parse_csv, read_csv, render_csv, write_csv, ParsedTable};
pub use self::svg::{render_heatmap_svg, write_heatmap_svg, ColorRamp};

/// Name of the generator behind every stochastic run.
pub const RNG_ALGORITHM: &str =
    "ChaCha8Rng (rand_chacha 0.3, seed_from_u64); streams splitmix64 mix(base, grid, replicate)";

/// Column appended to a sweep when at least one row failed.
pub const ERROR_COLUMN: &str = "error";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replicate `replicate` of grid point `grid_index`.
///
/// `splitmix64(splitmix64(splitmix64(base) ^ grid_index) ^ replicate)`.
/// Each row's stream depends only on its own coordinates, so growing a grid
/// leaves existing rows untouched.
pub fn mix_seed(base: u64, grid_index: u64, replicate: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ grid_index) ^ replicate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    UInt(u64),
    Real(f64),
    Bool(bool),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::UInt(v) => write!(f, "{v}"),
            Value::Real(v) => f.write_str(&format_real(*v)),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Text(v) => f.write_str(v),
        }
    }
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::UInt(v) => Some(*v as f64),
            Value::Real(v) => Some(*v),
            Value::Bool(v) => Some(if *v { 1.0 } else { 0.0 }),
            Value::Text(_) => None,
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::UInt(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

/// Provenance block written ahead of every table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub timestamp: String,
    pub command: String,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    pub scalar: String,
    /// Constant added to payoffs before use, when a module needs one.
    pub payoff_shift: Option<i64>,
    pub config: serde_json::Value,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl RunMetadata {
    pub fn new(command: impl Into<String>, config: &impl Serialize) -> Self {
        RunMetadata {
            tool_version: version_string(),
            timestamp: reproducible_timestamp(),
            command: command.into(),
            seed: None,
            rng: None,
            scalar: "f64".to_owned(),
            payoff_shift: None,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            extra: BTreeMap::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self.rng = Some(RNG_ALGORITHM.to_owned());
        self
    }

    pub fn with_shift(mut self, shift: i64) -> Self {
        self.payoff_shift = Some(shift);
        self
    }

    pub fn with_scalar(mut self, name: &str) -> Self {
        self.scalar = name.to_owned();
        self
    }

    pub fn with_extra(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.extra.insert(key.to_owned(), value.to_string());
        self
    }

    /// Stamp with the current wall-clock time. Output then differs between
    /// otherwise identical runs.
    pub fn with_wallclock(mut self) -> Self {
        self.timestamp = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
        self
    }

    pub fn config_as<C: for<'de> Deserialize<'de>>(&self) -> Result<C> {
        serde_json::from_value(self.config.clone())
            .map_err(|e| Error::Format(format!("config block does not match: {e}")))
    }
}

pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

/// `SOURCE_DATE_EPOCH` if set, the Unix epoch otherwise.
pub fn reproducible_timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .unwrap_or(0);
    DateTime::<Utc>::from_timestamp(secs, 0)
        .unwrap_or(DateTime::<Utc>::UNIX_EPOCH)
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Rectangular table of sweep rows plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub metadata: RunMetadata,
}

impl SweepResult {
    pub fn new(columns: &[&str], metadata: RunMetadata) -> Self {
        SweepResult {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            metadata,
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the column set");
        self.rows.push(row);
    }

    /// Builds a table from per-row outcomes. Failed rows keep their
    /// parameter columns, leave the rest blank and gain an `error` entry.
    pub fn from_outcomes(
        columns: &[&str],
        key_width: usize,
        keys: Vec<Vec<Value>>,
        outcomes: Vec<std::result::Result<Vec<Value>, String>>,
        metadata: RunMetadata,
    ) -> Self {
        let any_failed = outcomes.iter().any(|o| o.is_err());
        let mut table = SweepResult::new(columns, metadata);
        if any_failed {
            table.columns.push(ERROR_COLUMN.to_owned());
        }
        for (key, outcome) in keys.into_iter().zip(outcomes) {
            debug_assert_eq!(key.len(), key_width);
            let mut row = key;
            match outcome {
                Ok(values) => {
                    row.extend(values);
                    if any_failed {
                        row.push(Value::Text(String::new()));
                    }
                }
                Err(message) => {
                    row.extend((key_width..columns.len()).map(|_| Value::Text(String::new())));
                    row.push(Value::Text(message));
                }
            }
            table.rows.push(row);
        }
        table
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let idx = self.column_index(name)?;
        Some(self.rows.iter().map(|r| &r[idx]).collect())
    }

    pub fn failed_rows(&self) -> usize {
        match self.column_index(ERROR_COLUMN) {
            Some(idx) => self
                .rows
                .iter()
                .filter(|r| !matches!(&r[idx], Value::Text(t) if t.is_empty()))
                .count(),
            None => 0,
        }
    }
}

/// Evaluates `worker(index, point)` for every grid point on `threads`
/// threads. The result vector is in grid order; a panic or error in one
/// worker is confined to its own slot.
pub fn run_parallel<P, R, F>(
    grid: &[P],
    threads: usize,
    worker: F,
) -> Vec<std::result::Result<R, String>>
where
    P: Sync,
    R: Send,
    F: Fn(usize, &P) -> std::result::Result<R, String> + Sync,
{
    let call = |(index, point): (usize, &P)| {
        match panic::catch_unwind(AssertUnwindSafe(|| worker(index, point))) {
            Ok(outcome) => outcome,
            Err(payload) => Err(panic_message(payload.as_ref())),
        }
    };
    if threads <= 1 {
        return grid.iter().enumerate().map(call).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| grid.par_iter().enumerate().map(call).collect()),
        Err(_) => grid.iter().enumerate().map(call).collect(),
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("worker panicked: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("worker panicked: {s}")
    } else {
        "worker panicked".to_owned()
    }
}
