use std::collections::HashSet;
use std::fmt;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Origin of a feature column; drives report colouring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Text,
    Metadata,
    Embedding,
}

impl FeatureGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Text => "text",
            FeatureGroup::Metadata => "metadata",
            FeatureGroup::Embedding => "embedding",
        }
    }

    /// Prefix used by [`assemble`] to keep names unique across blocks.
    pub fn prefix(self) -> &'static str {
        match self {
            FeatureGroup::Text => "text:",
            FeatureGroup::Metadata => "meta:",
            FeatureGroup::Embedding => "emb:",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureGroup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(FeatureGroup::Text),
            "metadata" => Ok(FeatureGroup::Metadata),
            "embedding" => Ok(FeatureGroup::Embedding),
            other => Err(format!("unknown feature group {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub group: FeatureGroup,
}

impl Column {
    pub fn new(name: impl Into<String>, group: FeatureGroup) -> Self {
        Column {
            name: name.into(),
            group,
        }
    }
}

/// Dense, named, group-tagged feature matrix aligned to policy ids.
///
/// Invariants: every cell finite, column names unique, row ids unique.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    row_ids: Vec<String>,
    columns: Vec<Column>,
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(row_ids: Vec<String>, columns: Vec<Column>, values: Array2<f64>) -> Result<Self, FeatureError> {
        if values.nrows() != row_ids.len() || values.ncols() != columns.len() {
            return Err(FeatureError::Shape(format!(
                "{}x{} values for {} rows and {} columns",
                values.nrows(),
                values.ncols(),
                row_ids.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(FeatureError::DuplicateColumn(c.name.clone()));
            }
        }
        let mut seen = HashSet::new();
        for id in &row_ids {
            if !seen.insert(id.as_str()) {
                return Err(FeatureError::DuplicateId(id.clone()));
            }
        }
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                row: row_ids[r].clone(),
                column: columns[c].name.clone(),
                value: *v,
            });
        }
        Ok(FeatureMatrix {
            row_ids,
            columns,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[[row, col]]
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Row `i` as an owned vector.
    pub fn row_vec(&self, i: usize) -> Vec<f64> {
        self.values.row(i).to_vec()
    }

    /// Rows in `ids` order; every id must be present.
    pub fn select_rows(&self, ids: &[String]) -> Result<FeatureMatrix, FeatureError> {
        let index: std::collections::HashMap<&str, usize> = self
            .row_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let positions = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| FeatureError::MissingId(id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        FeatureMatrix::new(
            ids.to_vec(),
            self.columns.clone(),
            self.values.select(Axis(0), &positions),
        )
    }

    /// Rows at `positions`, in that order. Repeated positions are rejected
    /// because row ids must stay unique.
    pub fn take_rows(&self, positions: &[usize]) -> Result<FeatureMatrix, FeatureError> {
        let ids = positions.iter().map(|&p| self.row_ids[p].clone()).collect();
        FeatureMatrix::new(ids, self.columns.clone(), self.values.select(Axis(0), positions))
    }

    /// Same shape and names with different values (used for perturbed copies).
    pub fn with_values(&self, values: Array2<f64>) -> Result<FeatureMatrix, FeatureError> {
        FeatureMatrix::new(self.row_ids.clone(), self.columns.clone(), values)
    }

    /// Copy with every column name prefixed.
    pub fn prefixed(&self, prefix: &str) -> FeatureMatrix {
        FeatureMatrix {
            row_ids: self.row_ids.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| Column::new(format!("{prefix}{}", c.name), c.group))
                .collect(),
            values: self.values.clone(),
        }
    }
}

/// Concatenate blocks horizontally.
///
/// With more than one block every column name is prefixed by its group
/// (`text:`, `meta:`, `emb:`); a single block is returned unchanged.
pub fn assemble(blocks: &[FeatureMatrix]) -> Result<FeatureMatrix, FeatureError> {
    let first = blocks.first().ok_or(FeatureError::NoBlocks)?;
    if blocks.len() == 1 {
        return Ok(first.clone());
    }
    for block in &blocks[1..] {
        if block.row_ids != first.row_ids {
            let differing = first
                .row_ids
                .iter()
                .zip(&block.row_ids)
                .find(|(a, b)| a != b)
                .map(|(a, _)| a.clone())
                .unwrap_or_else(|| "<row count differs>".to_string());
            return Err(FeatureError::RowMismatch(differing));
        }
    }
    let columns: Vec<Column> = blocks
        .iter()
        .flat_map(|b| {
            b.columns
                .iter()
                .map(|c| Column::new(format!("{}{}", c.group.prefix(), c.name), c.group))
        })
        .collect();
    let views: Vec<_> = blocks.iter().map(|b| b.values.view()).collect();
    let values = ndarray::concatenate(Axis(1), &views).map_err(|e| FeatureError::Shape(e.to_string()))?;
    FeatureMatrix::new(first.row_ids.clone(), columns, values)
}
