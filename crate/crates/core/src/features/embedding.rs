use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;

use super::{Column, FeatureError, FeatureGroup, FeatureMatrix};

/// Dense per-policy text vectors read from a sidecar CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
    /// Free-form provenance, taken from a leading `#` comment line if present,
    /// otherwise the file name.
    pub source_tag: String,
}

impl EmbeddingTable {
    /// Matrix of the vectors for `row_ids`, columns `e0..e{dim-1}`.
    pub fn to_matrix(&self, row_ids: &[String]) -> Result<FeatureMatrix, FeatureError> {
        let mut values = Array2::<f64>::zeros((row_ids.len(), self.dim));
        for (i, id) in row_ids.iter().enumerate() {
            let v = self
                .vectors
                .get(id)
                .ok_or_else(|| FeatureError::MissingId(id.clone()))?;
            values.row_mut(i).assign(&ndarray::ArrayView1::from(v.as_slice()));
        }
        let columns = (0..self.dim)
            .map(|k| Column::new(format!("e{k}"), FeatureGroup::Embedding))
            .collect();
        FeatureMatrix::new(row_ids.to_vec(), columns, values)
    }
}

/// Parse an embedding sidecar: header `policy_id,e0,…,e{d-1}`, one row per
/// policy, decimal cells. Lines starting with `#` are comments.
pub fn parse_embeddings(text: &str, source: &str) -> Result<EmbeddingTable, FeatureError> {
    let fail = |message: String| FeatureError::Embedding {
        file: source.to_string(),
        message,
    };
    let source_tag = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .map(|l| l.trim().to_string())
        .unwrap_or_else(|| source.to_string());
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| fail(e.to_string()))?.clone();
    if header.get(0) != Some("policy_id") {
        return Err(fail("first header column must be `policy_id`".into()));
    }
    let dim = header.len() - 1;
    if dim == 0 {
        return Err(fail("no embedding columns".into()));
    }
    let mut vectors = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        let id = record.get(0).unwrap_or_default().to_string();
        if record.len() - 1 != dim {
            return Err(fail(format!(
                "dimension mismatch on row {} (policy_id {id:?}): {} values, expected {dim}",
                row + 1,
                record.len() - 1
            )));
        }
        let values = record
            .iter()
            .skip(1)
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| fail(format!("row {}: non-numeric cell {cell:?}", row + 1)))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if vectors.insert(id.clone(), values).is_some() {
            return Err(fail(format!("duplicate policy_id {id:?}")));
        }
    }
    Ok(EmbeddingTable {
        dim,
        vectors,
        source_tag,
    })
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable, FeatureError> {
    let text = std::fs::read_to_string(path).map_err(|e| FeatureError::Embedding {
        file: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_embeddings(&text, &path.display().to_string())
}
