//! CSV ingestion: comparison tables with string labels, per-edge weight
//! files and constraint vectors.
//!
//! The comparison table needs a header row; the first two columns are item
//! labels, the third is the outcome oriented first-column-minus-second-column,
//! and any further columns are covariates. Labels are mapped to dense indices
//! in order of first appearance.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{ComparisonRecord, EdgeWeights};

/// Which trailing CSV columns to treat as covariates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CovariateSelection {
    /// Every column after the outcome.
    All,
    /// Ignore covariate columns entirely.
    None,
    /// The named columns, in the given order.
    Columns(Vec<String>),
}

/// A parsed comparison table.
#[derive(Debug, Clone)]
pub struct GameTable {
    /// Dense index to label, in order of first appearance.
    pub labels: Vec<String>,
    pub records: Vec<ComparisonRecord>,
    /// Names of the ingested covariate columns (empty when none).
    pub covariate_names: Vec<String>,
}

impl GameTable {
    pub fn item_count(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn csv_error(row: usize, message: impl Into<String>) -> Error {
    Error::Csv {
        row,
        message: message.into(),
    }
}

/// Reads a comparison table from `path`.
pub fn read_game_table(path: &Path, selection: &CovariateSelection) -> Result<GameTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(1, e.to_string()))?;

    let headers = reader
        .headers()
        .map_err(|e| csv_error(1, e.to_string()))?
        .clone();
    if headers.len() < 3 {
        return Err(csv_error(
            1,
            format!(
                "expected at least 3 columns (item_i, item_j, outcome), got {}",
                headers.len()
            ),
        ));
    }

    let covariate_columns: Vec<(usize, String)> = match selection {
        CovariateSelection::None => Vec::new(),
        CovariateSelection::All => headers
            .iter()
            .enumerate()
            .skip(3)
            .map(|(i, name)| (i, name.to_string()))
            .collect(),
        CovariateSelection::Columns(names) => {
            let mut columns = Vec::with_capacity(names.len());
            for name in names {
                let position = headers.iter().position(|h| h == name).ok_or_else(|| {
                    csv_error(1, format!("covariate column '{name}' not found in header"))
                })?;
                if position < 3 {
                    return Err(csv_error(
                        1,
                        format!("column '{name}' is part of the comparison triple"),
                    ));
                }
                columns.push((position, name.clone()));
            }
            columns
        }
    };

    let mut labels: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut intern = |label: &str| -> usize {
        if let Some(&i) = index.get(label) {
            return i;
        }
        let i = labels.len();
        labels.push(label.to_string());
        index.insert(label.to_string(), i);
        i
    };

    let mut records = Vec::new();
    // Row numbers are 1-based file lines; the header is line 1.
    for (offset, row) in reader.records().enumerate() {
        let line = offset + 2;
        let row = row.map_err(|e| csv_error(line, e.to_string()))?;
        if row.len() < 3 {
            return Err(csv_error(line, "row has fewer than 3 fields"));
        }
        let label_i = row.get(0).unwrap_or("");
        let label_j = row.get(1).unwrap_or("");
        if label_i.is_empty() || label_j.is_empty() {
            return Err(csv_error(line, "empty item label"));
        }
        let outcome: f64 = row
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|e| csv_error(line, format!("outcome: {e}")))?;
        let i = intern(label_i);
        let j = intern(label_j);
        if i == j {
            return Err(csv_error(
                line,
                format!("item '{label_i}' compared with itself"),
            ));
        }
        let record = if covariate_columns.is_empty() {
            ComparisonRecord::new(i, j, outcome)
        } else {
            let mut x = Vec::with_capacity(covariate_columns.len());
            for (col, name) in &covariate_columns {
                let value: f64 = row
                    .get(*col)
                    .ok_or_else(|| csv_error(line, format!("missing value for '{name}'")))?
                    .parse()
                    .map_err(|e| csv_error(line, format!("covariate '{name}': {e}")))?;
                x.push(value);
            }
            ComparisonRecord::with_covariates(i, j, outcome, x)
        };
        records.push(record);
    }

    if records.is_empty() {
        return Err(csv_error(2, "no data rows"));
    }
    if labels.len() < 2 {
        return Err(csv_error(2, "fewer than 2 distinct items"));
    }

    Ok(GameTable {
        labels,
        records,
        covariate_names: covariate_columns.into_iter().map(|(_, n)| n).collect(),
    })
}

/// Reads per-edge weights: CSV with header and columns
/// `item_i,item_j,weight`, labels resolved against the comparison table.
pub fn read_weights(path: &Path, table: &GameTable) -> Result<EdgeWeights> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(1, e.to_string()))?;
    let mut weights = EdgeWeights::new();
    for (offset, row) in reader.records().enumerate() {
        let line = offset + 2;
        let row = row.map_err(|e| csv_error(line, e.to_string()))?;
        if row.len() < 3 {
            return Err(csv_error(line, "expected item_i,item_j,weight"));
        }
        let resolve = |label: &str| {
            table
                .index_of(label)
                .ok_or_else(|| csv_error(line, format!("unknown item '{label}'")))
        };
        let i = resolve(row.get(0).unwrap_or(""))?;
        let j = resolve(row.get(1).unwrap_or(""))?;
        let w: f64 = row
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|e| csv_error(line, format!("weight: {e}")))?;
        weights.set(i, j, w)?;
    }
    Ok(weights)
}

/// Reads a constraint vector: one number per line (blank lines ignored).
pub fn read_constraint_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: f64 = trimmed
            .parse()
            .map_err(|e| csv_error(idx + 1, format!("constraint entry: {e}")))?;
        values.push(value);
    }
    if values.is_empty() {
        return Err(csv_error(1, "constraint file is empty"));
    }
    Ok(values)
}
