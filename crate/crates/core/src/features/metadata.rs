//! Metadata encodings.
//!
//! Emitted columns, in order:
//!
//! | column(s)            | encoding                                                   |
//! |----------------------|------------------------------------------------------------|
//! | `month`, `year`      | raw values                                                 |
//! | `country_<name>`     | number of rapporteurs from that country (≤ 20 columns)     |
//! | `no_rapporteur`      | 1 iff the rapporteur list is empty                         |
//! | `voting_weight`      | mean country voting weight over rapporteurs (0 if none)    |
//! | `party_<name>`       | 1 iff any rapporteur sits in that party group (≤ 7)        |
//! | `no_party`           | 1 iff no rapporteur belongs to a retained party            |
//! | `seat_share`         | mean seat share over rapporteurs' parties (0 if none)      |
//! | `spotlight`          | 1 iff a spotlight tag is present                           |
//! | `spotlight_<tag>`    | one-hot (≤ 5)                                              |
//! | `procedure_year`     | procedure year, falling back to `year` when absent         |
//! | `procedure_<code>`   | one-hot (≤ 4)                                              |
//! | `legislative`        | 0/1                                                        |
//! | sidecar columns      | values as supplied, 0 when a record lacks the column       |

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Column, FeatureError, FeatureGroup, FeatureMatrix};
use crate::corpus::PolicyRecord;

pub const MAX_COUNTRIES: usize = 20;
pub const MAX_PARTIES: usize = 7;
pub const MAX_SPOTLIGHTS: usize = 5;
pub const MAX_PROCEDURES: usize = 4;

pub const DEFAULT_VOTING_WEIGHTS: &str = include_str!("../../data/voting_weights.csv");
pub const DEFAULT_SEAT_SHARES: &str = include_str!("../../data/seat_shares.csv");

/// Country voting weights and party seat shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataLookups {
    pub voting_weights: BTreeMap<String, f64>,
    pub seat_shares: BTreeMap<String, f64>,
}

impl Default for MetadataLookups {
    /// Bundled approximations: Council population shares and European
    /// Parliament seat shares.
    fn default() -> Self {
        MetadataLookups {
            voting_weights: parse_lookup(DEFAULT_VOTING_WEIGHTS, "voting_weights.csv").expect("bundled table parses"),
            seat_shares: parse_lookup(DEFAULT_SEAT_SHARES, "seat_shares.csv").expect("bundled table parses"),
        }
    }
}

impl MetadataLookups {
    /// Load either table from a file, keeping the bundled default for `None`.
    pub fn from_files(voting_weights: Option<&Path>, seat_shares: Option<&Path>) -> Result<Self, FeatureError> {
        let mut lookups = MetadataLookups::default();
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| FeatureError::Lookup {
                file: p.display().to_string(),
                message: e.to_string(),
            })
        };
        if let Some(p) = voting_weights {
            lookups.voting_weights = parse_lookup(&read(p)?, &p.display().to_string())?;
        }
        if let Some(p) = seat_shares {
            lookups.seat_shares = parse_lookup(&read(p)?, &p.display().to_string())?;
            if let Some((k, v)) = lookups.seat_shares.iter().find(|(_, v)| **v > 1.0) {
                return Err(FeatureError::Lookup {
                    file: p.display().to_string(),
                    message: format!("seat share for {k:?} is {v}, above 1"),
                });
            }
        }
        Ok(lookups)
    }
}

/// Two-column CSV with a header row: key, non-negative value.
pub fn parse_lookup(text: &str, source: &str) -> Result<BTreeMap<String, f64>, FeatureError> {
    let fail = |message: String| FeatureError::Lookup {
        file: source.to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        if record.len() != 2 {
            return Err(fail(format!("row {} must have two cells", row + 1)));
        }
        let value: f64 = record[1]
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| fail(format!("row {}: invalid value {:?}", row + 1, &record[1])))?;
        out.insert(record[0].trim().to_string(), value);
    }
    Ok(out)
}

/// Category columns and lookups fitted on training records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataSchema {
    pub country_columns: Vec<String>,
    pub party_columns: Vec<String>,
    pub spotlight_columns: Vec<String>,
    pub procedure_columns: Vec<String>,
    pub sidecar_columns: Vec<String>,
    pub voting_weight_lookup: BTreeMap<String, f64>,
    pub seat_share_lookup: BTreeMap<String, f64>,
}

/// Most frequent categories first, lexicographic tie-break, capped at `cap`.
fn top_categories<'a>(items: impl Iterator<Item = &'a str>, cap: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for item in items {
        *counts.entry(item).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.into_iter().take(cap).map(|(k, _)| k.to_string()).collect()
}

/// Fit category columns from training records. Returns the schema and a list
/// of warnings for categories missing from the lookup tables (encoded as 0).
pub fn fit_metadata_schema(
    train: &[&PolicyRecord],
    lookups: &MetadataLookups,
) -> Result<(MetadataSchema, Vec<String>), FeatureError> {
    if train.is_empty() {
        return Err(FeatureError::EmptyInput("metadata training records"));
    }
    let rapporteurs = || train.iter().flat_map(|r| r.rapporteurs.iter());
    let country_columns = top_categories(rapporteurs().map(|r| r.country.as_str()), MAX_COUNTRIES);
    let party_columns = top_categories(rapporteurs().filter_map(|r| r.party.as_deref()), MAX_PARTIES);
    let spotlight_columns = top_categories(train.iter().filter_map(|r| r.spotlight.as_deref()), MAX_SPOTLIGHTS);
    let procedure_columns = top_categories(train.iter().filter_map(|r| r.procedure_type.as_deref()), MAX_PROCEDURES);
    let sidecar_columns: BTreeSet<&String> = train.iter().flat_map(|r| r.sidecar_scores.keys()).collect();

    let mut warnings = Vec::new();
    let countries: BTreeSet<&str> = rapporteurs().map(|r| r.country.as_str()).collect();
    for c in countries {
        if !lookups.voting_weights.contains_key(c) {
            warnings.push(format!("no voting weight for country {c:?}; encoded as 0"));
        }
    }
    let parties: BTreeSet<&str> = rapporteurs().filter_map(|r| r.party.as_deref()).collect();
    for p in parties {
        if !lookups.seat_shares.contains_key(p) {
            warnings.push(format!("no seat share for party {p:?}; encoded as 0"));
        }
    }
    Ok((
        MetadataSchema {
            country_columns,
            party_columns,
            spotlight_columns,
            procedure_columns,
            sidecar_columns: sidecar_columns.into_iter().cloned().collect(),
            voting_weight_lookup: lookups.voting_weights.clone(),
            seat_share_lookup: lookups.seat_shares.clone(),
        },
        warnings,
    ))
}

impl MetadataSchema {
    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["month".to_string(), "year".to_string()];
        names.extend(self.country_columns.iter().map(|c| format!("country_{c}")));
        names.push("no_rapporteur".into());
        names.push("voting_weight".into());
        names.extend(self.party_columns.iter().map(|p| format!("party_{p}")));
        names.push("no_party".into());
        names.push("seat_share".into());
        names.push("spotlight".into());
        names.extend(self.spotlight_columns.iter().map(|s| format!("spotlight_{s}")));
        names.push("procedure_year".into());
        names.extend(self.procedure_columns.iter().map(|p| format!("procedure_{p}")));
        names.push("legislative".into());
        names.extend(self.sidecar_columns.iter().cloned());
        names
    }

    fn encode_one(&self, r: &PolicyRecord) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.column_names().len());
        row.push(f64::from(r.month));
        row.push(f64::from(r.year));
        for c in &self.country_columns {
            row.push(r.rapporteurs.iter().filter(|x| &x.country == c).count() as f64);
        }
        row.push(if r.rapporteurs.is_empty() { 1.0 } else { 0.0 });
        row.push(mean(
            r.rapporteurs
                .iter()
                .map(|x| self.voting_weight_lookup.get(&x.country).copied().unwrap_or(0.0)),
        ));
        for p in &self.party_columns {
            let any = r.rapporteurs.iter().any(|x| x.party.as_ref() == Some(p));
            row.push(if any { 1.0 } else { 0.0 });
        }
        let retained = r
            .rapporteurs
            .iter()
            .any(|x| x.party.as_ref().is_some_and(|p| self.party_columns.contains(p)));
        row.push(if retained { 0.0 } else { 1.0 });
        row.push(mean(r.rapporteurs.iter().filter_map(|x| {
            x.party
                .as_ref()
                .map(|p| self.seat_share_lookup.get(p).copied().unwrap_or(0.0))
        })));
        row.push(if r.spotlight.is_some() { 1.0 } else { 0.0 });
        for s in &self.spotlight_columns {
            row.push(if r.spotlight.as_ref() == Some(s) { 1.0 } else { 0.0 });
        }
        row.push(f64::from(r.procedure_year.unwrap_or(r.year)));
        for p in &self.procedure_columns {
            row.push(if r.procedure_type.as_ref() == Some(p) { 1.0 } else { 0.0 });
        }
        row.push(if r.legislative { 1.0 } else { 0.0 });
        for name in &self.sidecar_columns {
            row.push(r.sidecar_scores.get(name).copied().unwrap_or(0.0));
        }
        row
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Encode records row by row; each row depends only on its own record.
pub fn encode_metadata(records: &[&PolicyRecord], schema: &MetadataSchema) -> Result<FeatureMatrix, FeatureError> {
    let names = schema.column_names();
    let mut values = Array2::<f64>::zeros((records.len(), names.len()));
    for (i, r) in records.iter().enumerate() {
        for (j, v) in schema.encode_one(r).into_iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    FeatureMatrix::new(
        records.iter().map(|r| r.id.clone()).collect(),
        names
            .into_iter()
            .map(|n| Column::new(n, FeatureGroup::Metadata))
            .collect(),
        values,
    )
}
