use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::eval::rmse;
use crate::features::FeatureMatrix;
use crate::models::TrainedModel;
use crate::seed;

pub const IMPORTANCE_CSV_HEADER: &str = "feature,group,importance,std";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    /// `text`, `metadata`, `embedding`, or a custom group label.
    pub group: String,
    /// Mean RMSE increase over repeats.
    pub importance: f64,
    /// Population standard deviation of the increase over repeats.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// One entry per feature (or feature group), in column order.
    pub entries: Vec<ImportanceEntry>,
    pub repeats: usize,
    pub seed: u64,
    pub baseline_rmse: f64,
}

impl ImportanceReport {
    /// Entries by importance descending, then name.
    pub fn ranked(&self) -> Vec<&ImportanceEntry> {
        let mut out: Vec<&ImportanceEntry> = self.entries.iter().collect();
        out.sort_by(|a, b| {
            b.importance
                .total_cmp(&a.importance)
                .then_with(|| a.feature.cmp(&b.feature))
        });
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(IMPORTANCE_CSV_HEADER.split(','))
            .expect("in-memory write");
        for e in self.ranked() {
            w.write_record([
                e.feature.clone(),
                e.group.clone(),
                e.importance.to_string(),
                e.std.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Parse [`ImportanceReport::to_csv`] output; run metadata is not stored
    /// in the CSV and comes back as zero.
    pub fn from_csv(text: &str) -> Result<ImportanceReport, ExplainError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| ExplainError::Csv(e.to_string()))?;
        if header.iter().collect::<Vec<_>>().join(",") != IMPORTANCE_CSV_HEADER {
            return Err(ExplainError::Csv(format!("expected header {IMPORTANCE_CSV_HEADER:?}")));
        }
        let mut entries = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| ExplainError::Csv(e.to_string()))?;
            let num = |k: usize| {
                rec[k]
                    .parse::<f64>()
                    .map_err(|_| ExplainError::Csv(format!("row {}: bad number {:?}", i + 1, &rec[k])))
            };
            entries.push(ImportanceEntry {
                feature: rec[0].to_string(),
                group: rec[1].to_string(),
                importance: num(2)?,
                std: num(3)?,
            });
        }
        Ok(ImportanceReport {
            entries,
            repeats: 0,
            seed: 0,
            baseline_rmse: 0.0,
        })
    }
}

/// Per-column importance: mean over `repeats` of
/// `RMSE(model, X with column j shuffled) − RMSE(model, X)`.
///
/// The shuffle for (column j, repeat r) comes from a generator seeded by
/// `(seed, j, r)`, so results do not depend on evaluation order or threads.
pub fn permutation_importance(
    model: &TrainedModel,
    x: &FeatureMatrix,
    y: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport, ExplainError> {
    let units: Vec<(String, String, Vec<usize>)> = x
        .columns()
        .iter()
        .enumerate()
        .map(|(j, c)| (c.name.clone(), c.group.as_str().to_string(), vec![j]))
        .collect();
    run(model, x, y, &units, repeats, seed)
}

/// Like [`permutation_importance`], but each named group of columns is
/// shuffled jointly (one row permutation applied to all its columns) and
/// reported as one entry. Columns not covered by a group keep their own entry.
pub fn permutation_importance_grouped(
    model: &TrainedModel,
    x: &FeatureMatrix,
    y: &[f64],
    groups: &[(String, Vec<String>)],
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport, ExplainError> {
    let mut owner: Vec<Option<usize>> = vec![None; x.n_cols()];
    for (g, (label, names)) in groups.iter().enumerate() {
        if names.is_empty() {
            return Err(ExplainError::BadGroup(label.clone()));
        }
        for name in names {
            let j = x
                .column_index(name)
                .ok_or_else(|| ExplainError::BadGroup(label.clone()))?;
            owner[j] = Some(g);
        }
    }
    let mut units: Vec<(String, String, Vec<usize>)> = Vec::new();
    let mut emitted = vec![false; groups.len()];
    for (j, c) in x.columns().iter().enumerate() {
        match owner[j] {
            None => units.push((c.name.clone(), c.group.as_str().to_string(), vec![j])),
            Some(g) if !emitted[g] => {
                emitted[g] = true;
                let cols = (0..x.n_cols()).filter(|&k| owner[k] == Some(g)).collect();
                units.push((groups[g].0.clone(), c.group.as_str().to_string(), cols));
            }
            Some(_) => {}
        }
    }
    run(model, x, y, &units, repeats, seed)
}

fn run(
    model: &TrainedModel,
    x: &FeatureMatrix,
    y: &[f64],
    units: &[(String, String, Vec<usize>)],
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport, ExplainError> {
    model.check_columns(x)?;
    if repeats == 0 {
        return Err(ExplainError::ZeroRepeats);
    }
    let base_pred = model.predict(x)?;
    let baseline = rmse(y, &base_pred)?;
    let original = x.values();
    let n = x.n_rows();

    let entries: Vec<Result<ImportanceEntry, ExplainError>> = units
        .par_iter()
        .enumerate()
        .map(|(u, (name, group, cols))| {
            // private working copy; the caller's matrix is never touched
            let mut work: Array2<f64> = original.to_owned();
            let mut deltas = Vec::with_capacity(repeats);
            for r in 0..repeats {
                let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[u as u64, r as u64]));
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                for &c in cols {
                    for (i, &src) in perm.iter().enumerate() {
                        work[[i, c]] = original[[src, c]];
                    }
                }
                let pred = model.predict_array(work.view());
                deltas.push(rmse(y, &pred)? - baseline);
            }
            let mean = deltas.iter().sum::<f64>() / repeats as f64;
            let var = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / repeats as f64;
            Ok(ImportanceEntry {
                feature: name.clone(),
                group: group.clone(),
                importance: mean,
                std: var.sqrt(),
            })
        })
        .collect();
    Ok(ImportanceReport {
        entries: entries.into_iter().collect::<Result<_, _>>()?,
        repeats,
        seed,
        baseline_rmse: baseline,
    })
}
