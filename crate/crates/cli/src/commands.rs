//! Subcommand implementations. Each takes a resolved [`RunConfig`] and writes
//! human-readable progress to `out`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use polprog_core::corpus::{generate_synthetic, load_sidecar_scores, parse_corpus, split, CorpusError};
use polprog_core::eval::{prepare, run_grid, EvalError, FeatureConfig, GridConfig, PreparedData, Representation};
use polprog_core::explain::{
    permutation_importance, permutation_importance_grouped, sample_background, shap, ImportanceReport, ShapMatrix,
    ShapMethod, ShapOptions, EMBEDDING_GROUP_NAME,
};
use polprog_core::features::{load_embeddings, EmbeddingTable, MetadataLookups};
use polprog_core::models::fit;
use polprog_core::report::{render_grid, render_importance_chart, render_shap_summary, ChartSpec};
use polprog_core::{seed, textprep, Corpus, FeatureGroup, FeatureMatrix, GridResult, ModelKind};
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, RunConfig};
use crate::rundir::{create_run_dir, write_new};
use crate::CliError;

pub const EXPLAIN_FORMAT: &str = "polprog-explain";

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(|e| CliError::Runtime(format!("cannot write output: {e}")))?
    };
}

fn eval_error(e: EvalError) -> CliError {
    match e {
        EvalError::Model { .. } => CliError::Runtime(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus, CliError> {
    let path = cfg
        .corpus
        .as_ref()
        .ok_or_else(|| CliError::Validation("no corpus given: pass --corpus FILE or set \"corpus\"".into()))?;
    let corpus = parse_corpus(path).map_err(|e| match e {
        CorpusError::Io { .. } | CorpusError::Empty | CorpusError::Invalid(_) | CorpusError::Sidecar { .. } => {
            CliError::Validation(format!("{}: {e}", path.display()))
        }
    })?;
    match &cfg.sidecar_scores {
        None => Ok(corpus),
        Some(p) => {
            let scores = load_sidecar_scores(p).map_err(|e| CliError::Validation(e.to_string()))?;
            corpus
                .with_sidecar_scores(&scores)
                .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))
        }
    }
}

pub fn load_lookups(cfg: &RunConfig) -> Result<MetadataLookups, CliError> {
    MetadataLookups::from_files(cfg.voting_weights.as_deref(), cfg.seat_shares.as_deref())
        .map_err(|e| CliError::Validation(e.to_string()))
}

/// Embedding tables for the requested representations (TF-IDF needs none).
pub fn load_embedding_tables(
    cfg: &RunConfig,
    reps: &[Representation],
) -> Result<BTreeMap<Representation, EmbeddingTable>, CliError> {
    let mut tables = BTreeMap::new();
    for &rep in reps {
        if rep == Representation::Tfidf || tables.contains_key(&rep) {
            continue;
        }
        let path = cfg.embeddings.get(&rep).ok_or_else(|| {
            CliError::Validation(format!(
                "representation {rep} needs an embedding file: pass --embedding {rep}=FILE or set \"embeddings.{rep}\""
            ))
        })?;
        if !path.is_file() {
            return Err(CliError::Validation(format!(
                "embedding file for {rep} not found: {}",
                path.display()
            )));
        }
        let table = load_embeddings(path).map_err(|e| CliError::Validation(e.to_string()))?;
        tables.insert(rep, table);
    }
    Ok(tables)
}

pub fn grid_config(cfg: &RunConfig, lookups: MetadataLookups) -> GridConfig {
    GridConfig {
        representations: cfg.representations.clone(),
        kinds: cfg.models.clone(),
        hyperparameters: cfg.hyperparameters.clone(),
        seed: cfg.seed,
        split_seed: cfg.split_seed,
        ratio: cfg.split_ratio,
        stratified: cfg.stratified,
        features: FeatureConfig {
            min_df: cfg.min_df,
            max_features: cfg.max_features,
            lookups,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProvenanceEntry {
    pub name: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub files: Vec<ProvenanceEntry>,
}

fn file_entry(name: &str, path: &Path) -> Result<ProvenanceEntry, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(ProvenanceEntry {
        name: name.to_string(),
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// Hashes of the configuration, bundled data files and every input file the
/// configuration references.
pub fn provenance(cfg: &RunConfig) -> Result<Provenance, CliError> {
    let mut files: Vec<ProvenanceEntry> = textprep::bundled_data_hashes()
        .into_iter()
        .map(|(name, sha256)| ProvenanceEntry {
            name: name.to_string(),
            path: "(bundled)".into(),
            sha256,
        })
        .collect();
    use polprog_core::features::metadata::{DEFAULT_SEAT_SHARES, DEFAULT_VOTING_WEIGHTS};
    for (name, path, bundled) in [
        ("voting_weights.csv", &cfg.voting_weights, DEFAULT_VOTING_WEIGHTS),
        ("seat_shares.csv", &cfg.seat_shares, DEFAULT_SEAT_SHARES),
    ] {
        files.push(match path {
            Some(p) => file_entry(name, p)?,
            None => ProvenanceEntry {
                name: name.to_string(),
                path: "(bundled)".into(),
                sha256: sha256_hex(bundled.as_bytes()),
            },
        });
    }
    if let Some(p) = &cfg.corpus {
        if p.is_file() {
            files.push(file_entry("corpus", p)?);
        }
    }
    if let Some(p) = &cfg.sidecar_scores {
        if p.is_file() {
            files.push(file_entry("sidecar_scores", p)?);
        }
    }
    for (rep, p) in &cfg.embeddings {
        if p.is_file() {
            files.push(file_entry(&format!("embeddings.{rep}"), p)?);
        }
    }
    Ok(Provenance {
        config_sha256: cfg.hash(),
        files,
    })
}

pub fn print_provenance(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let p = provenance(cfg)?;
    say!(out, "config sha256:{}", p.config_sha256);
    for f in &p.files {
        say!(out, "{} {} sha256:{}", f.name, f.path, f.sha256);
    }
    Ok(())
}

fn new_run_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = create_run_dir(&cfg.output, &cfg.hash())?;
    write_new(&dir.join("config.json"), &format!("{}\n", cfg.canonical_json()))?;
    let prov = serde_json::to_string_pretty(&provenance(cfg)?).map_err(runtime)?;
    write_new(&dir.join("provenance.json"), &format!("{prov}\n"))?;
    Ok(dir)
}

// ---------------------------------------------------------------- validate

pub fn validate(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = load_corpus(cfg)?;
    let lookups = load_lookups(cfg)?;
    let configured: Vec<Representation> = cfg.embeddings.keys().copied().collect();
    let tables = load_embedding_tables(cfg, &configured)?;
    say!(
        out,
        "corpus: {}",
        cfg.corpus.as_ref().map_or(String::new(), |p| p.display().to_string())
    );
    say!(out, "records: {}", corpus.len());
    for (label, count) in corpus.label_histogram() {
        say!(out, "  {label}: {count}");
    }
    let ids: Vec<String> = corpus.ids().map(str::to_string).collect();
    for (rep, table) in &tables {
        table
            .to_matrix(&ids)
            .map_err(|e| CliError::Validation(format!("embeddings for {rep}: {e}")))?;
        say!(
            out,
            "{rep}: {} dimensions, {} vectors ({})",
            table.dim,
            table.vectors.len(),
            table.source_tag
        );
    }
    let s = split(&corpus, cfg.split_ratio, cfg.split_seed, cfg.stratified)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let features = FeatureConfig {
        min_df: cfg.min_df,
        max_features: cfg.max_features,
        lookups,
    };
    let data = prepare(&corpus, &s, &features, &tables).map_err(eval_error)?;
    say!(
        out,
        "split: {} train / {} test (ratio {}, {})",
        s.train_ids.len(),
        s.test_ids.len(),
        cfg.split_ratio,
        if cfg.stratified { "stratified" } else { "random" }
    );
    say!(out, "tfidf vocabulary: {} terms", data.tfidf.len());
    say!(out, "metadata columns: {}", data.schema.column_names().len());
    for w in &data.warnings {
        say!(out, "warning: {w}");
    }
    say!(out, "ok");
    Ok(())
}

// ------------------------------------------------------------------- synth

pub fn synth(cfg: &RunConfig, n: usize, vocab: usize, output: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = generate_synthetic(cfg.seed, n, vocab).map_err(|e| CliError::Validation(e.to_string()))?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
    }
    write_new(output, &corpus.to_jsonl())?;
    say!(
        out,
        "wrote {} synthetic policies (seed {}) to {}",
        corpus.len(),
        cfg.seed,
        output.display()
    );
    Ok(())
}

// -------------------------------------------------------------------- grid

fn compute_grid(cfg: &RunConfig) -> Result<GridResult, CliError> {
    let corpus = load_corpus(cfg)?;
    let lookups = load_lookups(cfg)?;
    let tables = load_embedding_tables(cfg, &cfg.representations)?;
    run_grid(&corpus, &grid_config(cfg, lookups), &tables).map_err(eval_error)
}

fn summarize_grid(grid: &GridResult, out: &mut dyn Write) -> Result<(), CliError> {
    for (flag, label) in [(true, "text + metadata"), (false, "text only")] {
        if let Some(best) = grid.best(flag) {
            say!(
                out,
                "best {label}: {} + {}  RMSE {:.4}  R² {:.4}",
                best.representation.display_name(),
                best.model.display_name(),
                best.metrics.rmse,
                best.metrics.r2
            );
        }
    }
    Ok(())
}

fn write_grid(dir: &Path, grid: &GridResult) -> Result<(), CliError> {
    let rendered = render_grid(grid).map_err(runtime)?;
    write_new(&dir.join("grid.csv"), &rendered.csv)?;
    write_new(&dir.join("grid.md"), &rendered.markdown)
}

pub fn grid(cfg: &RunConfig, out: &mut dyn Write) -> Result<PathBuf, CliError> {
    let result = compute_grid(cfg)?;
    let dir = new_run_dir(cfg)?;
    write_grid(&dir, &result)?;
    say!(out, "grid: {} cells", result.rows.len());
    summarize_grid(&result, out)?;
    say!(out, "wrote {}", dir.display());
    Ok(dir)
}

// ----------------------------------------------------------------- explain

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceMeta {
    pub model: ModelKind,
    pub representation: Representation,
    pub with_metadata: bool,
    pub split: String,
    pub repeats: usize,
    pub seed: u64,
    pub baseline_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapMeta {
    pub model: ModelKind,
    pub representation: Representation,
    pub with_metadata: bool,
    pub method: ShapMethod,
    pub base_value: f64,
    pub background_size: usize,
    pub seed: u64,
    pub samples: Option<usize>,
    pub rows: usize,
    pub embeddings_aggregated: bool,
}

/// Contents of `explain.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainMeta {
    pub format: String,
    pub version: u32,
    pub importance: ImportanceMeta,
    pub shap: ShapMeta,
}

pub struct Explanation {
    pub importance: ImportanceReport,
    pub shap: ShapMatrix,
    pub feature_values: FeatureMatrix,
    pub meta: ExplainMeta,
}

/// Permutation importance of the importance model and Shapley values of the
/// SHAP model, both fitted on text + metadata for the configured
/// representation with the same seeds as the matching grid cells, and both
/// evaluated on the test split.
pub fn compute_explanation(cfg: &RunConfig, data: &PreparedData, gc: &GridConfig) -> Result<Explanation, CliError> {
    let rep = cfg.explain.representation;
    let (train, test) = data.design(rep, true).map_err(eval_error)?;
    let fit_cell = |kind: ModelKind| {
        fit(&gc.spec(kind, gc.cell_seed(rep, kind, true)), &train, &data.y_train)
            .map_err(|e| CliError::Runtime(format!("{rep}/{kind}: {e}")))
    };

    let imp_kind = cfg.explain.importance_model;
    let imp_model = fit_cell(imp_kind)?;
    let perm_seed = seed::derive_str(cfg.seed, "explain/permutation");
    // embedding dimensions are shuffled together and reported as one feature
    let embedding_cols: Vec<String> = test
        .columns()
        .iter()
        .filter(|c| c.group == FeatureGroup::Embedding)
        .map(|c| c.name.clone())
        .collect();
    let importance = if embedding_cols.is_empty() {
        permutation_importance(&imp_model, &test, &data.y_test, cfg.explain.repeats, perm_seed)
    } else {
        let groups = [(EMBEDDING_GROUP_NAME.to_string(), embedding_cols)];
        permutation_importance_grouped(&imp_model, &test, &data.y_test, &groups, cfg.explain.repeats, perm_seed)
    }
    .map_err(runtime)?;

    let shap_kind = cfg.explain.shap_model;
    let shap_model = if shap_kind == imp_kind {
        imp_model
    } else {
        fit_cell(shap_kind)?
    };
    let bg_seed = seed::derive_str(cfg.seed, "explain/background");
    let background = sample_background(&train, cfg.explain.background, bg_seed).map_err(runtime)?;
    let options = ShapOptions {
        method: None,
        samples: cfg.explain.samples,
        seed: seed::derive_str(cfg.seed, "explain/shap"),
    };
    let raw = shap(&shap_model, &test, &background, &options).map_err(runtime)?;
    let (matrix, feature_values) = raw.aggregate_embeddings(&test).map_err(runtime)?;
    let aggregated = matrix.columns.len() != raw.columns.len();

    let meta = ExplainMeta {
        format: EXPLAIN_FORMAT.into(),
        version: 1,
        importance: ImportanceMeta {
            model: imp_kind,
            representation: rep,
            with_metadata: true,
            split: "test".into(),
            repeats: importance.repeats,
            seed: importance.seed,
            baseline_rmse: importance.baseline_rmse,
        },
        shap: ShapMeta {
            model: shap_kind,
            representation: rep,
            with_metadata: true,
            method: matrix.method,
            base_value: matrix.base_value,
            background_size: matrix.background_size,
            seed: matrix.seed,
            samples: matrix.samples,
            rows: matrix.row_ids.len(),
            embeddings_aggregated: aggregated,
        },
    };
    Ok(Explanation {
        importance,
        shap: matrix,
        feature_values,
        meta,
    })
}

fn prepared(cfg: &RunConfig, reps: &[Representation]) -> Result<(PreparedData, GridConfig), CliError> {
    let corpus = load_corpus(cfg)?;
    let lookups = load_lookups(cfg)?;
    let tables = load_embedding_tables(cfg, reps)?;
    let gc = grid_config(cfg, lookups);
    let s = split(&corpus, gc.ratio, gc.split_seed, gc.stratified).map_err(|e| CliError::Validation(e.to_string()))?;
    let data = prepare(&corpus, &s, &gc.features, &tables).map_err(eval_error)?;
    Ok((data, gc))
}

fn write_explanation(dir: &Path, ex: &Explanation) -> Result<(), CliError> {
    write_new(&dir.join("importance.csv"), &ex.importance.to_csv())?;
    write_new(
        &dir.join("shap.csv"),
        &ex.shap.to_csv(&ex.feature_values).map_err(runtime)?,
    )?;
    let json = serde_json::to_string_pretty(&ex.meta).map_err(runtime)?;
    write_new(&dir.join("explain.json"), &format!("{json}\n"))
}

fn summarize_explanation(ex: &Explanation, out: &mut dyn Write) -> Result<(), CliError> {
    say!(
        out,
        "permutation importance ({} on {} + metadata, {} repeats), top 5:",
        ex.meta.importance.model.display_name(),
        ex.meta.importance.representation.display_name(),
        ex.meta.importance.repeats
    );
    for e in ex.importance.ranked().into_iter().take(5) {
        say!(out, "  {:<32} {:+.5} ± {:.5}", e.feature, e.importance, e.std);
    }
    say!(
        out,
        "SHAP ({} via {}): {} rows, base value {:.4}",
        ex.meta.shap.model.display_name(),
        ex.meta.shap.method,
        ex.meta.shap.rows,
        ex.meta.shap.base_value
    );
    Ok(())
}

pub fn explain(cfg: &RunConfig, out: &mut dyn Write) -> Result<PathBuf, CliError> {
    let (data, gc) = prepared(cfg, &[cfg.explain.representation])?;
    let ex = compute_explanation(cfg, &data, &gc)?;
    let dir = new_run_dir(cfg)?;
    write_explanation(&dir, &ex)?;
    summarize_explanation(&ex, out)?;
    say!(out, "wrote {}", dir.display());
    Ok(dir)
}

// ------------------------------------------------------------------ report

fn importance_title(meta: Option<&ImportanceMeta>) -> String {
    match meta {
        Some(m) => format!(
            "Permutation importance: {} on {} + metadata",
            m.model.display_name(),
            m.representation.display_name()
        ),
        None => "Permutation importance".into(),
    }
}

fn shap_title(meta: &ShapMeta) -> String {
    format!(
        "SHAP summary: {} on {} + metadata",
        meta.model.display_name(),
        meta.representation.display_name()
    )
}

fn write_charts(
    dir: &Path,
    cfg: &RunConfig,
    importance: Option<(&ImportanceReport, Option<&ImportanceMeta>)>,
    shap_parts: Option<(&ShapMatrix, &FeatureMatrix, &ShapMeta)>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if let Some((report, meta)) = importance {
        let spec = ChartSpec::new(importance_title(meta), cfg.explain.top_k).map_err(runtime)?;
        let (svg, warnings) = render_importance_chart(report, &spec).map_err(runtime)?;
        for w in warnings {
            say!(out, "warning: importance chart: {w}");
        }
        write_new(&dir.join("importance.svg"), &svg)?;
    }
    if let Some((matrix, fv, meta)) = shap_parts {
        let spec = ChartSpec::new(shap_title(meta), cfg.explain.top_k).map_err(runtime)?;
        let (svg, warnings) = render_shap_summary(matrix, fv, &spec).map_err(runtime)?;
        for w in warnings {
            say!(out, "warning: SHAP chart: {w}");
        }
        write_new(&dir.join("shap_summary.svg"), &svg)?;
    }
    Ok(())
}

fn read_optional(dir: &Path, name: &str) -> Result<Option<String>, CliError> {
    let path = dir.join(name);
    if !path.exists() {
        return Ok(None);
    }
    std::fs::read_to_string(&path)
        .map(Some)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

/// Render charts and tables from the CSV outputs of earlier runs into a new
/// run directory. Later inputs take precedence when several hold the same file.
pub fn report(cfg: &RunConfig, inputs: &[PathBuf], out: &mut dyn Write) -> Result<PathBuf, CliError> {
    let mut grid_csv = None;
    let mut importance_csv = None;
    let mut shap_csv = None;
    let mut explain_json = None;
    for dir in inputs {
        if !dir.is_dir() {
            return Err(CliError::Validation(format!("not a run directory: {}", dir.display())));
        }
        grid_csv = read_optional(dir, "grid.csv")?.or(grid_csv);
        importance_csv = read_optional(dir, "importance.csv")?.or(importance_csv);
        shap_csv = read_optional(dir, "shap.csv")?.or(shap_csv);
        explain_json = read_optional(dir, "explain.json")?.or(explain_json);
    }
    if grid_csv.is_none() && importance_csv.is_none() && shap_csv.is_none() {
        return Err(CliError::Validation(
            "no grid.csv, importance.csv or shap.csv found in the given directories".into(),
        ));
    }
    let bad = |name: &str, e: &dyn std::fmt::Display| CliError::Validation(format!("{name}: {e}"));
    let grid = grid_csv
        .as_deref()
        .map(GridResult::from_csv)
        .transpose()
        .map_err(|e| bad("grid.csv", &e))?;
    let meta: Option<ExplainMeta> = explain_json
        .as_deref()
        .map(serde_json::from_str)
        .transpose()
        .map_err(|e| bad("explain.json", &e))?;
    let mut importance = importance_csv
        .as_deref()
        .map(ImportanceReport::from_csv)
        .transpose()
        .map_err(|e| bad("importance.csv", &e))?;
    // run settings live in explain.json, not in the CSV
    if let (Some(r), Some(m)) = (importance.as_mut(), meta.as_ref()) {
        r.repeats = m.importance.repeats;
        r.seed = m.importance.seed;
        r.baseline_rmse = m.importance.baseline_rmse;
    }
    let shap_parts = match (&shap_csv, &meta) {
        (None, _) => None,
        (Some(_), None) => {
            return Err(CliError::Validation(
                "shap.csv needs the explain.json written next to it".into(),
            ))
        }
        (Some(text), Some(m)) => {
            let (matrix, fv) = ShapMatrix::from_csv(
                text,
                m.shap.base_value,
                m.shap.method,
                m.shap.background_size,
                m.shap.seed,
            )
            .map_err(|e| bad("shap.csv", &e))?;
            Some((matrix, fv))
        }
    };

    let mut digest_input = String::new();
    for part in [&grid_csv, &importance_csv, &shap_csv, &explain_json] {
        digest_input.push_str(part.as_deref().unwrap_or(""));
        digest_input.push('\u{1e}');
    }
    let hash = sha256_hex(digest_input.as_bytes());
    let dir = create_run_dir(&cfg.output, &hash)?;
    if let Some(g) = &grid {
        write_grid(&dir, g)?;
        summarize_grid(g, out)?;
    }
    write_charts(
        &dir,
        cfg,
        importance.as_ref().map(|r| (r, meta.as_ref().map(|m| &m.importance))),
        shap_parts
            .as_ref()
            .zip(meta.as_ref())
            .map(|((m, fv), meta)| (m, fv, &meta.shap)),
        out,
    )?;
    say!(out, "wrote {}", dir.display());
    Ok(dir)
}

// --------------------------------------------------------------------- all

/// Grid, explanation and report in one run directory.
pub fn all(cfg: &RunConfig, out: &mut dyn Write) -> Result<PathBuf, CliError> {
    let mut reps = cfg.representations.clone();
    reps.push(cfg.explain.representation);
    let (data, gc) = prepared(cfg, &reps)?;
    let grid = polprog_core::eval::run_prepared(&data, &gc).map_err(eval_error)?;
    let ex = compute_explanation(cfg, &data, &gc)?;
    let dir = new_run_dir(cfg)?;
    write_grid(&dir, &grid)?;
    write_explanation(&dir, &ex)?;
    write_charts(
        &dir,
        cfg,
        Some((&ex.importance, Some(&ex.meta.importance))),
        Some((&ex.shap, &ex.feature_values, &ex.meta.shap)),
        out,
    )?;
    say!(out, "grid: {} cells", grid.rows.len());
    summarize_grid(&grid, out)?;
    summarize_explanation(&ex, out)?;
    say!(out, "wrote {}", dir.display());
    Ok(dir)
}
