//! Markdown/CSV tables and SVG charts.
//!
//! All renderers are pure: identical inputs give identical bytes. SVG is
//! written by hand; coordinates are printed with two decimals.
//!
//! Chart colors follow one rule: text-derived features (`text` and
//! `embedding` groups) are black, metadata features are colored by family
//! (see [`metadata_family`]) from an 8-color palette.

mod charts;
mod grid;

use std::collections::BTreeMap;

pub use charts::{render_importance_chart, render_shap_summary, shap_feature_order};
pub use grid::{render_grid, sorted_rows, RenderedGrid};

pub const TEXT_COLOR: &str = "#000000";

/// Fixed metadata palette; the last entry is used for tags without an
/// assigned color.
pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub const METADATA_FAMILIES: [&str; 7] = [
    "date",
    "country",
    "party",
    "spotlight",
    "procedure",
    "legislative",
    "sidecar",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("nothing to render: {0}")]
    Empty(&'static str),
    #[error("top_k must be at least 1")]
    ZeroTopK,
    #[error("chart size {width}x{height} is too small")]
    TooSmall { width: u32, height: u32 },
    #[error("SHAP matrix and feature values are not aligned: {0}")]
    Misaligned(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartSpec {
    pub title: String,
    pub top_k: usize,
    /// Color per tag (`text`, `embedding`, a metadata family, or a custom
    /// group label). `text` is always drawn black whatever this map says.
    pub group_colors: BTreeMap<String, String>,
    pub width: u32,
    pub height: u32,
}

impl ChartSpec {
    pub fn new(title: impl Into<String>, top_k: usize) -> Result<ChartSpec, ReportError> {
        if top_k == 0 {
            return Err(ReportError::ZeroTopK);
        }
        let mut group_colors = BTreeMap::new();
        group_colors.insert("text".to_string(), TEXT_COLOR.to_string());
        group_colors.insert("embedding".to_string(), TEXT_COLOR.to_string());
        for (family, color) in METADATA_FAMILIES.iter().zip(PALETTE) {
            group_colors.insert(family.to_string(), color.to_string());
        }
        Ok(ChartSpec {
            title: title.into(),
            top_k,
            group_colors,
            width: 900,
            height: 600,
        })
    }

    pub fn with_size(mut self, width: u32, height: u32) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn color(&self, tag: &str) -> &str {
        if tag == "text" {
            return TEXT_COLOR;
        }
        self.group_colors.get(tag).map_or(PALETTE[7], String::as_str)
    }

    fn validate(&self) -> Result<(), ReportError> {
        if self.top_k == 0 {
            return Err(ReportError::ZeroTopK);
        }
        if self.width < 200 || self.height < 120 {
            return Err(ReportError::TooSmall {
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }
}

/// Family of a metadata column name (with or without the `meta:` prefix).
pub fn metadata_family(name: &str) -> &'static str {
    let n = name.strip_prefix("meta:").unwrap_or(name);
    match n {
        "month" | "year" | "procedure_year" => "date",
        "no_rapporteur" | "voting_weight" => "country",
        "no_party" | "seat_share" => "party",
        "spotlight" => "spotlight",
        "legislative" => "legislative",
        _ if n.starts_with("country_") => "country",
        _ if n.starts_with("party_") => "party",
        _ if n.starts_with("spotlight_") => "spotlight",
        _ if n.starts_with("procedure_") => "procedure",
        _ => "sidecar",
    }
}

/// Color tag for a feature: metadata columns map to their family, every
/// other group is its own tag.
pub fn color_tag(feature: &str, group: &str) -> String {
    if group == "metadata" {
        metadata_family(feature).to_string()
    } else {
        group.to_string()
    }
}

pub(crate) fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && c != '\t' && c != '\n' && c != '\r' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}
