use std::collections::BTreeMap;
use std::fmt::Write;

use crate::features::FeatureMode;
use crate::label::SentimentLabel;
use crate::model::ModelKind;

use super::metrics::MetricsFile;

/// Row label `"<feature> <model>"`, e.g. `exp M1`. Unrecognized names pass
/// through unchanged.
pub fn row_label(feature: &str, model: &str) -> String {
    let f = feature.parse::<FeatureMode>().map(|m| m.short().to_string());
    let m = model.parse::<ModelKind>().map(|k| k.short().to_string());
    format!(
        "{} {}",
        f.unwrap_or_else(|_| feature.to_string()),
        m.unwrap_or_else(|_| model.to_string())
    )
}

fn row_order(feature: &str, model: &str) -> (usize, usize, String) {
    let f = feature
        .parse::<FeatureMode>()
        .map(|m| FeatureMode::ALL.iter().position(|x| *x == m).unwrap_or(0))
        .unwrap_or(FeatureMode::ALL.len());
    let m = model
        .parse::<ModelKind>()
        .map(|k| ModelKind::ALL.iter().position(|x| *x == k).unwrap_or(0))
        .unwrap_or(ModelKind::ALL.len());
    (f, m, format!("{feature}\u{0}{model}"))
}

/// One markdown grid per dataset: rows are feature × model, columns are the
/// six per-class F1 scores and accuracy, all to three decimals.
pub fn render_report(files: &[MetricsFile]) -> String {
    let mut by_dataset: BTreeMap<&str, Vec<&MetricsFile>> = BTreeMap::new();
    for f in files {
        by_dataset.entry(f.dataset.as_str()).or_default().push(f);
    }
    let mut out = String::new();
    for (k, (dataset, mut rows)) in by_dataset.into_iter().enumerate() {
        rows.sort_by_key(|f| row_order(&f.feature, &f.model));
        if k > 0 {
            out.push('\n');
        }
        writeln!(out, "## D {dataset}\n").unwrap();
        out.push_str("| exp. |");
        for l in SentimentLabel::ALL {
            write!(out, " {}_f1 |", l.tag()).unwrap();
        }
        out.push_str(" A |\n|---|");
        out.push_str(&"---:|".repeat(SentimentLabel::ALL.len() + 1));
        out.push('\n');
        for f in rows {
            write!(out, "| {} |", row_label(&f.feature, &f.model)).unwrap();
            for c in &f.metrics.classes {
                write!(out, " {:.3} |", c.f1).unwrap();
            }
            writeln!(out, " {:.3} |", f.metrics.accuracy).unwrap();
        }
    }
    out
}
