use std::collections::BTreeMap;
use std::fmt::Write;

use super::{color_tag, escape_xml, ChartSpec, ReportError};
use crate::explain::{ImportanceReport, ShapMatrix};
use crate::features::FeatureMatrix;

const LOW: (f64, f64, f64) = (0.0, 139.0, 251.0);
const HIGH: (f64, f64, f64) = (255.0, 0.0, 82.0);
const CONSTANT_COLOR: &str = "#808080";
const POINT_R: f64 = 3.0;
const LABEL_CHARS: usize = 36;
const CHAR_W: f64 = 6.6;

fn n2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn shorten(label: &str) -> String {
    if label.chars().count() <= LABEL_CHARS {
        label.to_string()
    } else {
        let head: String = label.chars().take(LABEL_CHARS - 1).collect();
        format!("{head}…")
    }
}

/// Linear map from a data interval onto a pixel interval. A degenerate data
/// interval is widened to unit length.
#[derive(Debug, Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    px0: f64,
    px1: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, px0: f64, px1: f64) -> Self {
        let (lo, hi) = if hi - lo > 0.0 { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Scale { lo, hi, px0, px1 }
    }

    fn at(&self, v: f64) -> f64 {
        self.px0 + (v - self.lo) / (self.hi - self.lo) * (self.px1 - self.px0)
    }
}

/// Round tick positions covering `[lo, hi]`, about five of them.
fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let span = hi - lo;
    if span <= 0.0 || !span.is_finite() {
        return (vec![lo], 2);
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

fn header(out: &mut String, spec: &ChartSpec, subtitle: &str) {
    let (w, h) = (spec.width, spec.height);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="Helvetica, Arial, sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15" font-weight="bold">{}</text>"#,
        n2(w as f64 / 2.0),
        escape_xml(&spec.title)
    );
    if !subtitle.is_empty() {
        let _ = writeln!(
            out,
            r##"<text x="{}" y="38" text-anchor="middle" fill="#555555">{}</text>"##,
            n2(w as f64 / 2.0),
            escape_xml(subtitle)
        );
    }
}

fn x_axis(out: &mut String, scale: &Scale, lo: f64, hi: f64, y: f64, label: &str) {
    let _ = writeln!(
        out,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#333333"/>"##,
        n2(scale.px0),
        n2(y),
        n2(scale.px1),
        n2(y)
    );
    let (ts, decimals) = ticks(lo, hi);
    for t in ts {
        let x = scale.at(t);
        let text = format!("{t:.decimals$}");
        let text = if text.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            text.trim_start_matches('-').to_string()
        } else {
            text
        };
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{y}" x2="{x}" y2="{}" stroke="#333333"/><text x="{x}" y="{}" text-anchor="middle">{text}</text>"##,
            n2(y + 4.0),
            n2(y + 16.0),
            x = n2(x),
            y = n2(y)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        n2((scale.px0 + scale.px1) / 2.0),
        n2(y + 32.0),
        escape_xml(label)
    );
}

/// Horizontal bars for the `top_k` most important entries, colored by tag.
/// Whiskers show one standard deviation over repeats. Returns the SVG and any
/// warnings (a `top_k` above the entry count is clamped).
pub fn render_importance_chart(
    report: &ImportanceReport,
    spec: &ChartSpec,
) -> Result<(String, Vec<String>), ReportError> {
    spec.validate()?;
    if report.entries.is_empty() {
        return Err(ReportError::Empty("importance report has no entries"));
    }
    let mut warnings = Vec::new();
    let k = if spec.top_k > report.entries.len() {
        warnings.push(format!(
            "top_k {} exceeds the {} available features; showing all",
            spec.top_k,
            report.entries.len()
        ));
        report.entries.len()
    } else {
        spec.top_k
    };
    let shown: Vec<_> = report.ranked().into_iter().take(k).collect();
    let tags: Vec<String> = shown.iter().map(|e| color_tag(&e.feature, &e.group)).collect();

    let (w, h) = (spec.width as f64, spec.height as f64);
    let longest = shown
        .iter()
        .map(|e| shorten(&e.feature).chars().count())
        .max()
        .unwrap_or(0);
    let left = (longest as f64 * CHAR_W + 16.0).min(w * 0.45);
    let (right, top, bottom) = (24.0, 52.0, 86.0);
    let row_h = (h - top - bottom) / k as f64;

    let lo = shown
        .iter()
        .map(|e| (e.importance - e.std).min(0.0))
        .fold(0.0, f64::min);
    let hi = shown.iter().map(|e| e.importance + e.std).fold(0.0, f64::max);
    let scale = Scale::new(lo, hi, left, w - right);

    let mut out = String::new();
    let subtitle = format!("permutation importance, {} repeats", report.repeats);
    header(&mut out, spec, if report.repeats > 0 { &subtitle } else { "" });
    out.push_str("<g class=\"bars\">\n");
    for (r, (e, tag)) in shown.iter().zip(&tags).enumerate() {
        let y = top + r as f64 * row_h;
        let x0 = scale.at(e.importance.min(0.0));
        let x1 = scale.at(e.importance.max(0.0));
        let label = escape_xml(&shorten(&e.feature));
        let _ = writeln!(
            out,
            r#"<text class="feature-label" x="{}" y="{}" text-anchor="end" dominant-baseline="middle">{label}</text>"#,
            n2(left - 6.0),
            n2(y + row_h / 2.0)
        );
        let _ = writeln!(
            out,
            r#"<rect class="bar" x="{}" y="{}" width="{}" height="{}" fill="{}"><title>{label}: {}</title></rect>"#,
            n2(x0),
            n2(y + row_h * 0.15),
            n2(x1 - x0),
            n2(row_h * 0.7),
            escape_xml(spec.color(tag)),
            e.importance
        );
        if e.std > 0.0 {
            let cy = n2(y + row_h / 2.0);
            let _ = writeln!(
                out,
                r##"<line x1="{}" y1="{cy}" x2="{}" y2="{cy}" stroke="#444444"/>"##,
                n2(scale.at(e.importance - e.std)),
                n2(scale.at(e.importance + e.std))
            );
        }
    }
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#999999"/>"##,
        n2(top),
        n2(h - bottom),
        x = n2(scale.at(0.0))
    );
    x_axis(
        &mut out,
        &scale,
        lo,
        hi,
        h - bottom + 4.0,
        "Increase in RMSE after shuffling",
    );

    // legend
    let mut seen: Vec<&String> = Vec::new();
    for t in &tags {
        if !seen.contains(&t) {
            seen.push(t);
        }
    }
    let mut x = left;
    let y = h - 16.0;
    for t in seen {
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            n2(x),
            n2(y - 9.0),
            escape_xml(spec.color(t)),
            n2(x + 14.0),
            n2(y),
            escape_xml(t)
        );
        x += 14.0 + t.chars().count() as f64 * CHAR_W + 14.0;
    }
    out.push_str("</svg>\n");
    Ok((out, warnings))
}

/// Column positions ordered by mean |φ| descending, ties by column order.
pub fn shap_feature_order(matrix: &ShapMatrix) -> Vec<usize> {
    let mean_abs = matrix.mean_abs();
    let mut order: Vec<usize> = (0..mean_abs.len()).collect();
    order.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]).then(a.cmp(&b)));
    order
}

fn value_color(v: f64, lo: f64, hi: f64) -> String {
    if hi - lo <= 0.0 {
        return CONSTANT_COLOR.to_string();
    }
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(LOW.0, HIGH.0),
        mix(LOW.1, HIGH.1),
        mix(LOW.2, HIGH.2)
    )
}

/// One strip per feature (top `top_k` by mean |φ|), one point per row at
/// x = φ, colored by the row's feature value scaled to the column's min-max
/// range (blue low, red high, gray for a constant column). Points sharing a
/// horizontal bin are stacked alternately above and below the strip center
/// in row order.
pub fn render_shap_summary(
    matrix: &ShapMatrix,
    feature_values: &FeatureMatrix,
    spec: &ChartSpec,
) -> Result<(String, Vec<String>), ReportError> {
    spec.validate()?;
    let (n, d) = matrix.values.dim();
    if n == 0 || d == 0 {
        return Err(ReportError::Empty("SHAP matrix has no rows or columns"));
    }
    if feature_values.row_ids() != matrix.row_ids.as_slice() {
        return Err(ReportError::Misaligned("row ids differ".into()));
    }
    if feature_values.n_cols() != d {
        return Err(ReportError::Misaligned(format!(
            "{} SHAP columns, {} feature columns",
            d,
            feature_values.n_cols()
        )));
    }
    for (j, (a, b)) in matrix.columns.iter().zip(feature_values.columns()).enumerate() {
        if a.name != b.name {
            return Err(ReportError::Misaligned(format!(
                "column {j} is {:?} in the SHAP matrix and {:?} in the feature values",
                a.name, b.name
            )));
        }
    }
    let mut warnings = Vec::new();
    let k = if spec.top_k > d {
        warnings.push(format!(
            "top_k {} exceeds the {d} available features; showing all",
            spec.top_k
        ));
        d
    } else {
        spec.top_k
    };
    let order: Vec<usize> = shap_feature_order(matrix).into_iter().take(k).collect();

    let (w, h) = (spec.width as f64, spec.height as f64);
    let longest = order
        .iter()
        .map(|&j| shorten(&matrix.columns[j].name).chars().count())
        .max()
        .unwrap_or(0);
    let left = (longest as f64 * CHAR_W + 16.0).min(w * 0.4);
    let (right, top, bottom) = (70.0, 52.0, 56.0);
    let row_h = (h - top - bottom) / k as f64;

    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for &j in &order {
        for &v in matrix.values.column(j) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let pad = (hi - lo) * 0.04;
    let (lo, hi) = (lo - pad, hi + pad);
    let scale = Scale::new(lo, hi, left, w - right);

    let mut out = String::new();
    let subtitle = format!("{} rows, base value {:.4}", n, matrix.base_value);
    header(&mut out, spec, &subtitle);
    let _ = writeln!(
        out,
        r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#999999"/>"##,
        n2(top),
        n2(h - bottom),
        x = n2(scale.at(0.0))
    );
    let max_off = (row_h / 2.0 - POINT_R).max(0.0);
    for (r, &j) in order.iter().enumerate() {
        let center = top + (r as f64 + 0.5) * row_h;
        let col = feature_values.values().column(j);
        let flo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let fhi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let name = &matrix.columns[j].name;
        let _ = writeln!(
            out,
            r#"<text class="feature-label" x="{}" y="{}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            n2(left - 6.0),
            n2(center),
            escape_xml(&shorten(name))
        );
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{c}" x2="{}" y2="{c}" stroke="#eeeeee"/>"##,
            n2(left),
            n2(w - right),
            c = n2(center)
        );
        let _ = writeln!(out, r#"<g class="strip" data-feature="{}">"#, escape_xml(name));
        let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
        for i in 0..n {
            let x = scale.at(matrix.values[[i, j]]);
            let c = bins.entry((x / (2.0 * POINT_R)).floor() as i64).or_insert(0);
            let level = *c;
            *c += 1;
            let step = level.div_ceil(2) as f64 * POINT_R;
            let off = if level % 2 == 1 { step } else { -step };
            let y = center + off.clamp(-max_off, max_off);
            let _ = writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="{}" fill="{}" fill-opacity="0.85"/>"#,
                n2(x),
                n2(y),
                n2(POINT_R),
                value_color(col[i], flo, fhi)
            );
        }
        out.push_str("</g>\n");
    }
    x_axis(
        &mut out,
        &scale,
        lo,
        hi,
        h - bottom + 4.0,
        "SHAP value (contribution to predicted stage)",
    );

    // feature value color bar
    let bx = w - right + 24.0;
    let (by0, by1) = (top + 10.0, h - bottom - 10.0);
    let _ = writeln!(
        out,
        r#"<defs><linearGradient id="feature-value" x1="0" y1="1" x2="0" y2="0"><stop offset="0" stop-color="{}"/><stop offset="1" stop-color="{}"/></linearGradient></defs>"#,
        value_color(0.0, 0.0, 1.0),
        value_color(1.0, 0.0, 1.0)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{}" y="{}" width="10" height="{}" fill="url(#feature-value)"/>"#,
        n2(bx),
        n2(by0),
        n2(by1 - by0)
    );
    let _ = writeln!(
        out,
        r#"<text x="{x}" y="{}" text-anchor="middle">High</text><text x="{x}" y="{}" text-anchor="middle">Low</text>"#,
        n2(by0 - 4.0),
        n2(by1 + 12.0),
        x = n2(bx + 5.0)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">Feature value</text>"#,
        n2(bx + 22.0),
        n2((by0 + by1) / 2.0),
        n2(bx + 22.0),
        n2((by0 + by1) / 2.0)
    );
    out.push_str("</svg>\n");
    Ok((out, warnings))
}
