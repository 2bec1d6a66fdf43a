//! On-disk dataset record schema (JSONL), manifest, and corpus statistics.
//!
//! Field order is fixed by struct declaration order so that two runs with
//! the same inputs produce byte-identical files. No timestamps anywhere.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One verified problem/solution pair plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    /// `<template_id>#<instance_index>`
    pub id: String,
    pub template_id: String,
    pub instance_index: u64,
    pub seed: u64,
    pub problem: String,
    pub solution_code: String,
    pub solution_nl: String,
    /// Rounded integer result of the code solution.
    pub result: i64,
    pub verified: bool,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("record `{0}` violates invariants: {1}")]
    InvariantViolation(String, String),
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("empty corpus")]
    EmptyCorpus,
}

impl DatasetRecord {
    fn check_invariants(&self) -> Result<(), String> {
        if !self.verified {
            return Err("verified must be true".into());
        }
        if self.id != format!("{}#{}", self.template_id, self.instance_index) {
            return Err("id must be `<template_id>#<instance_index>`".into());
        }
        if self.solution_nl.is_empty() {
            return Err("NL solution must be nonempty".into());
        }
        Ok(())
    }
}

/// Write records as JSONL in the fixed field order. Returns the count.
pub fn write_records<'a, W: Write>(
    records: impl IntoIterator<Item = &'a DatasetRecord>,
    out: &mut W,
) -> Result<u64, DatasetError> {
    let mut count = 0;
    let mut seen = std::collections::HashSet::new();
    for record in records {
        record
            .check_invariants()
            .map_err(|m| DatasetError::InvariantViolation(record.id.clone(), m))?;
        if !seen.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId(record.id.clone()));
        }
        // serde_json keeps struct field order
        serde_json::to_writer(&mut *out, record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        count += 1;
    }
    Ok(count)
}

pub fn write_records_to_path<'a>(
    records: impl IntoIterator<Item = &'a DatasetRecord>,
    path: &Path,
) -> Result<u64, DatasetError> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    let n = write_records(records, &mut out)?;
    out.flush()?;
    Ok(n)
}

/// Read a JSONL dataset with strict per-line schema validation.
/// Blank lines are skipped.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord =
            serde_json::from_str(&line).map_err(|e| DatasetError::Schema {
                line: idx + 1,
                message: e.to_string(),
            })?;
        record
            .check_invariants()
            .map_err(|m| DatasetError::Schema {
                line: idx + 1,
                message: m,
            })?;
        if !seen.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

/// Streaming JSONL writer with the same bytes-per-record as
/// [`write_records`], for sinks that cannot hold the corpus in memory.
pub struct JsonlWriter<W: Write> {
    out: W,
    seen: std::collections::HashSet<String>,
    count: u64,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(out: W) -> Self {
        JsonlWriter {
            out,
            seen: std::collections::HashSet::new(),
            count: 0,
        }
    }

    pub fn write(&mut self, record: &DatasetRecord) -> Result<(), DatasetError> {
        record
            .check_invariants()
            .map_err(|m| DatasetError::InvariantViolation(record.id.clone(), m))?;
        if !self.seen.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId(record.id.clone()));
        }
        serde_json::to_writer(&mut self.out, record).map_err(std::io::Error::from)?;
        self.out.write_all(b"\n")?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(mut self) -> Result<W, DatasetError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn read_records_from_path(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let file = std::fs::File::open(path)?;
    read_records(std::io::BufReader::new(file))
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// Per-field length statistics over whitespace tokens and characters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldStats {
    pub tokens_min: u64,
    pub tokens_max: u64,
    pub tokens_mean: f64,
    pub tokens_std: f64,
    pub chars_min: u64,
    pub chars_max: u64,
    pub chars_mean: f64,
    pub chars_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub record_count: u64,
    pub template_count: u64,
    pub problem: FieldStats,
    pub solution_code: FieldStats,
    pub solution_nl: FieldStats,
}

/// Streaming single-pass mean/variance (Welford's algorithm).
#[derive(Debug, Clone, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
    min: u64,
    max: u64,
}

impl Welford {
    pub fn push(&mut self, x: u64) {
        if self.n == 0 {
            self.min = x;
            self.max = x;
        } else {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
        self.n += 1;
        let xf = x as f64;
        let delta = xf - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (xf - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).sqrt()
        }
    }

    pub fn min(&self) -> u64 {
        self.min
    }

    pub fn max(&self) -> u64 {
        self.max
    }
}

pub fn whitespace_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

pub fn compute_stats<'a>(
    records: impl IntoIterator<Item = &'a DatasetRecord>,
) -> Result<CorpusStats, DatasetError> {
    let mut count = 0u64;
    let mut templates = std::collections::HashSet::new();
    let mut acc = [
        (Welford::default(), Welford::default()), // problem (tokens, chars)
        (Welford::default(), Welford::default()), // solution_code
        (Welford::default(), Welford::default()), // solution_nl
    ];
    for r in records {
        count += 1;
        templates.insert(r.template_id.clone());
        for (i, text) in [&r.problem, &r.solution_code, &r.solution_nl]
            .into_iter()
            .enumerate()
        {
            acc[i].0.push(whitespace_tokens(text));
            acc[i].1.push(text.chars().count() as u64);
        }
    }
    if count == 0 {
        return Err(DatasetError::EmptyCorpus);
    }
    let field = |(tok, ch): &(Welford, Welford)| FieldStats {
        tokens_min: tok.min(),
        tokens_max: tok.max(),
        tokens_mean: tok.mean(),
        tokens_std: tok.std(),
        chars_min: ch.min(),
        chars_max: ch.max(),
        chars_mean: ch.mean(),
        chars_std: ch.std(),
    };
    Ok(CorpusStats {
        record_count: count,
        template_count: templates.len() as u64,
        problem: field(&acc[0]),
        solution_code: field(&acc[1]),
        solution_nl: field(&acc[2]),
    })
}
