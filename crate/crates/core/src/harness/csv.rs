//! Comment-headed CSV tables.
//!
//! Layout: `# key: value` provenance lines, one column-name row, data rows.
//! Reals carry 17 significant digits, integers are plain decimal.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{RunMetadata, SweepResult};
use crate::error::{Error, Result};

/// 17 significant digits in scientific notation; enough to round-trip f64.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_owned()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else {
        format!("{x:.16e}")
    }
}

fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

fn header_lines(meta: &RunMetadata) -> Vec<String> {
    let mut lines = vec![
        format!("# tool: tddyn {}", meta.tool_version),
        format!("# timestamp: {}", meta.timestamp),
        format!("# command: {}", meta.command),
        format!(
            "# seed: {}",
            meta.seed.map_or_else(|| "none".to_owned(), |s| s.to_string())
        ),
        format!("# rng: {}", meta.rng.as_deref().unwrap_or("none")),
        format!("# scalar: {}", meta.scalar),
        format!(
            "# payoff_shift: {}",
            meta.payoff_shift
                .map_or_else(|| "none".to_owned(), |s| s.to_string())
        ),
    ];
    for (k, v) in &meta.extra {
        lines.push(format!("# extra.{k}: {v}"));
    }
    lines.push(format!(
        "# config: {}",
        serde_json::to_string(&meta.config).unwrap_or_else(|_| "null".to_owned())
    ));
    lines
}

pub fn render_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    for line in header_lines(&result.metadata) {
        out.push_str(&line);
        out.push('\n');
    }
    let header: Vec<String> = result.columns.iter().map(|c| escape(c)).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in &result.rows {
        let fields: Vec<String> = row.iter().map(|v| escape(&v.to_string())).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_csv(result)).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// A table read back from disk. Cells stay textual.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTable {
    pub metadata: RunMetadata,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn split_record(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                current.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    fields.push(current);
    fields
}

pub fn parse_csv(text: &str) -> Result<ParsedTable> {
    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    let mut extra = BTreeMap::new();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.next_if(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim_start();
        let (key, value) = body
            .split_once(": ")
            .ok_or_else(|| Error::Format(format!("bad header line `{line}`")))?;
        match key.strip_prefix("extra.") {
            Some(k) => {
                extra.insert(k.to_owned(), value.to_owned());
            }
            None => {
                fields.insert(key.to_owned(), value.to_owned());
            }
        }
    }
    let take = |k: &str| -> Result<String> {
        fields
            .get(k)
            .cloned()
            .ok_or_else(|| Error::Format(format!("missing header `{k}`")))
    };
    let none_or = |s: String| if s == "none" { None } else { Some(s) };
    let tool = take("tool")?;
    let metadata = RunMetadata {
        tool_version: tool.trim_start_matches("tddyn ").to_owned(),
        timestamp: take("timestamp")?,
        command: take("command")?,
        seed: none_or(take("seed")?)
            .map(|s| s.parse().map_err(|_| Error::Format(format!("bad seed `{s}`"))))
            .transpose()?,
        rng: none_or(take("rng")?),
        scalar: take("scalar")?,
        payoff_shift: none_or(take("payoff_shift")?)
            .map(|s| s.parse().map_err(|_| Error::Format(format!("bad shift `{s}`"))))
            .transpose()?,
        config: serde_json::from_str(&take("config")?)
            .map_err(|e| Error::Format(format!("bad config block: {e}")))?,
        extra,
    };
    let columns = lines
        .next()
        .map(split_record)
        .ok_or_else(|| Error::Format("missing column row".to_owned()))?;
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(split_record)
        .collect::<Vec<_>>();
    if let Some(bad) = rows.iter().position(|r| r.len() != columns.len()) {
        return Err(Error::Format(format!("row {bad} has the wrong width")));
    }
    Ok(ParsedTable {
        metadata,
        columns,
        rows,
    })
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<ParsedTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_csv(&text)
}

impl ParsedTable {
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }
}
