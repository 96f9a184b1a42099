use std::fmt::Write;

use super::ReportError;
use crate::eval::{GridResult, GridRow};

/// Markdown shows metric values at this precision; ties at the displayed
/// precision are all bolded.
const DECIMALS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedGrid {
    pub markdown: String,
    pub csv: String,
}

/// Rows ordered for display: with-metadata rows first, then RMSE ascending,
/// R² descending, and finally grid order.
pub fn sorted_rows(result: &GridResult) -> Vec<&GridRow> {
    let mut rows: Vec<&GridRow> = result.rows.iter().collect();
    rows.sort_by(|a, b| {
        b.with_metadata
            .cmp(&a.with_metadata)
            .then(a.metrics.rmse.total_cmp(&b.metrics.rmse))
            .then(b.metrics.r2.total_cmp(&a.metrics.r2))
            .then(a.representation.cmp(&b.representation))
            .then(a.model.cmp(&b.model))
    });
    rows
}

fn fixed(v: f64) -> String {
    let s = format!("{v:.DECIMALS$}");
    // avoid printing "-0.00"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn table(out: &mut String, rows: &[&GridRow]) {
    let with_acc = rows.iter().all(|r| r.snapped_accuracy.is_some());
    let rmse: Vec<String> = rows.iter().map(|r| fixed(r.metrics.rmse)).collect();
    let r2: Vec<String> = rows.iter().map(|r| fixed(r.metrics.r2)).collect();
    let best_rmse = rows
        .iter()
        .zip(&rmse)
        .min_by(|a, b| a.0.metrics.rmse.total_cmp(&b.0.metrics.rmse))
        .map(|(_, s)| s.clone());
    let best_r2 = rows
        .iter()
        .zip(&r2)
        .max_by(|a, b| a.0.metrics.r2.total_cmp(&b.0.metrics.r2))
        .map(|(_, s)| s.clone());
    let bold = |s: &String, best: &Option<String>| {
        if Some(s) == best.as_ref() {
            format!("**{s}**")
        } else {
            s.clone()
        }
    };

    out.push_str("| Feature Representation | Regression Model | RMSE ↓ | R² ↑ |");
    if with_acc {
        out.push_str(" Stage accuracy † |");
    }
    out.push_str("\n|---|---|---|---|");
    if with_acc {
        out.push_str("---|");
    }
    out.push('\n');
    for (k, r) in rows.iter().enumerate() {
        let _ = write!(
            out,
            "| {} | {} | {} | {} |",
            r.representation.display_name(),
            r.model.display_name(),
            bold(&rmse[k], &best_rmse),
            bold(&r2[k], &best_r2)
        );
        if let (true, Some(acc)) = (with_acc, r.snapped_accuracy) {
            let _ = write!(out, " {} |", fixed(acc));
        }
        out.push('\n');
    }
}

/// Markdown with one table per feature set, plus the grid CSV in display
/// order.
pub fn render_grid(result: &GridResult) -> Result<RenderedGrid, ReportError> {
    if result.rows.is_empty() {
        return Err(ReportError::Empty("grid has no rows"));
    }
    let rows = sorted_rows(result);
    let mut md = String::from("# Policy stage prediction\n");
    let n = rows[0].metrics.n;
    let _ = writeln!(md, "\nTest policies: {n}. Best RMSE and best R² per table in bold.");
    for (flag, heading) in [(true, "Text and metadata features"), (false, "Text features only")] {
        let part: Vec<&GridRow> = rows.iter().copied().filter(|r| r.with_metadata == flag).collect();
        if part.is_empty() {
            continue;
        }
        let _ = writeln!(md, "\n## {heading}\n");
        table(&mut md, &part);
    }
    if rows.iter().all(|r| r.snapped_accuracy.is_some()) {
        md.push_str(
            "\n† Supplementary: share of test policies whose prediction, snapped to the \
             nearest stage, equals the true stage. Not an RMSE/R² result.\n",
        );
    }
    let ordered = GridResult {
        rows: rows.into_iter().cloned().collect(),
    };
    Ok(RenderedGrid {
        markdown: md,
        csv: ordered.to_csv(),
    })
}
