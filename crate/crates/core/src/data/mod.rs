//! CSV ingestion and train/valid/test splitting.

mod split;

pub use split::{random_split, random_split_n, scaffold_split, scaffold_split_keys, DatasetSplit, SplitManifest, SplitMethod};

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chem::{parse_smiles, scaffold_key, MolecularGraph};
use crate::model::TaskType;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("column '{0}' not found in header")]
    MissingColumn(String),
    #[error("no usable rows")]
    EmptyDataset,
    #[error("row {row}, column '{column}': invalid label '{value}'")]
    InvalidLabel { row: usize, column: String, value: String },
    #[error("{n} records is too few to split (need at least {min})")]
    TooSmall { n: usize, min: usize },
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
}

#[derive(Debug, Clone)]
pub struct Record {
    /// 1-based line number in the source file (the header is line 1).
    pub row: usize,
    pub smiles: String,
    pub labels: Vec<Option<f64>>,
    pub graph: MolecularGraph,
}

/// A row that was not loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub task_names: Vec<String>,
    pub task_type: TaskType,
    pub source_path: String,
    /// Hex SHA-256 of the file bytes.
    pub checksum: String,
    pub skipped: Vec<Skipped>,
}

pub fn checksum_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_label(raw: &str, task: TaskType, row: usize, column: &str) -> Result<Option<f64>, DataError> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(None);
    }
    let bad = || DataError::InvalidLabel {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    };
    let v: f64 = s.parse().map_err(|_| bad())?;
    if !v.is_finite() {
        return Err(bad());
    }
    if task == TaskType::Classification && v != 0.0 && v != 1.0 {
        return Err(bad());
    }
    Ok(Some(v))
}

/// Loads a dataset. `task_columns = None` takes every column except the
/// SMILES column. Rows whose SMILES fail to parse, or whose labels are all
/// blank, are skipped and logged.
pub fn load_csv(path: &Path, smiles_column: &str, task_columns: Option<&[String]>, task_type: TaskType) -> Result<Dataset, DataError> {
    let bytes = fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut ds = load_csv_bytes(&bytes, smiles_column, task_columns, task_type)?;
    ds.source_path = path.display().to_string();
    Ok(ds)
}

pub fn load_csv_bytes(bytes: &[u8], smiles_column: &str, task_columns: Option<&[String]>, task_type: TaskType) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let smiles_idx = find(smiles_column)?;
    let task_names: Vec<String> = match task_columns {
        Some(cols) => cols.to_vec(),
        None => header.iter().filter(|h| h.as_str() != smiles_column).cloned().collect(),
    };
    if task_names.is_empty() {
        return Err(DataError::MissingColumn("<label>".into()));
    }
    let task_idx = task_names.iter().map(|t| find(t)).collect::<Result<Vec<_>, _>>()?;

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let smiles = row.get(smiles_idx).unwrap_or("").trim().to_string();
        let labels = task_idx
            .iter()
            .zip(&task_names)
            .map(|(&c, name)| parse_label(row.get(c).unwrap_or(""), task_type, line, name))
            .collect::<Result<Vec<_>, _>>()?;
        let graph = match parse_smiles(&smiles) {
            Ok(g) => g,
            Err(e) => {
                skipped.push(Skipped {
                    row: line,
                    reason: format!("SMILES '{smiles}': {e}"),
                });
                continue;
            }
        };
        if labels.iter().all(Option::is_none) {
            skipped.push(Skipped {
                row: line,
                reason: "no labels".into(),
            });
            continue;
        }
        records.push(Record {
            row: line,
            smiles,
            labels,
            graph,
        });
    }
    if !skipped.is_empty() {
        log::warn!("skipped {} row(s)", skipped.len());
        for s in &skipped {
            log::debug!("row {}: {}", s.row, s.reason);
        }
    }
    if records.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    Ok(Dataset {
        records,
        task_names,
        task_type,
        source_path: String::new(),
        checksum: checksum_bytes(bytes),
        skipped,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_tasks(&self) -> usize {
        self.task_names.len()
    }

    /// Hex scaffold key of every record. Failures share the empty-scaffold key.
    pub fn scaffold_keys(&self) -> Vec<String> {
        let empty = format!("{:016x}", MolecularGraph::empty().graph_hash());
        self.records
            .iter()
            .map(|r| scaffold_key(&r.graph).unwrap_or_else(|_| empty.clone()))
            .collect()
    }

    /// A dataset holding `indices` in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            task_names: self.task_names.clone(),
            task_type: self.task_type,
            source_path: self.source_path.clone(),
            checksum: self.checksum.clone(),
            skipped: Vec::new(),
        }
    }
}
