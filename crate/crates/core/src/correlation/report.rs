use std::fmt::Write;

use crate::label::{SentimentLabel, NUM_CLASSES};

use super::{BinaryConfusion, ComboKey, ConfusionMatrix, VoteResult};

/// Heatmap cell for a proportion in [0, 1].
pub fn glyph(v: f64) -> char {
    if v <= 0.0 {
        '.'
    } else if v <= 0.25 {
        '░'
    } else if v <= 0.5 {
        '▒'
    } else if v <= 0.75 {
        '▓'
    } else {
        '█'
    }
}

impl ConfusionMatrix {
    /// 7×7 grid: tag header row and column, rows predicted, columns gold.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["predicted\\gold".to_string()];
        header.extend(SentimentLabel::ALL.iter().map(|l| l.tag().to_string()));
        w.write_record(&header).expect("in-memory write");
        for (a, label) in SentimentLabel::ALL.iter().enumerate() {
            let mut row = vec![label.tag().to_string()];
            row.extend(self.c[a].iter().map(|v| v.to_string()));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    /// Rows predicted, columns gold; `?` marks gold classes without samples.
    pub fn heatmap(&self) -> String {
        let mut out = String::from("pred\\gold");
        for (b, l) in SentimentLabel::ALL.iter().enumerate() {
            write!(out, " {}{}", l.tag(), if self.undefined[b] { '?' } else { ' ' }).unwrap();
        }
        out = out.trim_end().to_string();
        out.push('\n');
        for (a, l) in SentimentLabel::ALL.iter().enumerate() {
            write!(out, "{:>9}", l.tag()).unwrap();
            for b in 0..NUM_CLASSES {
                write!(out, "  {} ", glyph(self.c[a][b])).unwrap();
            }
            out = out.trim_end().to_string();
            out.push('\n');
        }
        out
    }
}

/// One `gold → predicted` pair that passed the vote.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPair {
    pub gold: SentimentLabel,
    pub predicted: SentimentLabel,
    /// Inputs with `Cr = 1` at this pair.
    pub support: usize,
    /// Mean of `C` at this pair over all matrices.
    pub mean_c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    /// Matrix CSV per combination, in input order.
    pub matrix_csv: Vec<(ComboKey, String)>,
    /// Off-diagonal voted pairs, strongest first.
    pub ranked: Vec<RankedPair>,
    /// Markdown document with heatmaps and the vote table.
    pub text: String,
}

/// Ranks voted off-diagonal pairs by support, then mean `C`, then
/// `(gold, predicted)` index.
pub fn correlation_report(
    matrices: &[ConfusionMatrix],
    binaries: &[BinaryConfusion],
    vote: &VoteResult,
) -> CorrelationReport {
    let mut ranked = Vec::new();
    for a in 0..NUM_CLASSES {
        for b in 0..NUM_CLASSES {
            if a == b || vote.t[a][b] == 0 {
                continue;
            }
            let mean_c = if matrices.is_empty() {
                0.0
            } else {
                matrices.iter().map(|m| m.c[a][b]).sum::<f64>() / matrices.len() as f64
            };
            ranked.push(RankedPair {
                gold: SentimentLabel::from_index(b).expect("class index"),
                predicted: SentimentLabel::from_index(a).expect("class index"),
                support: vote.support[a][b],
                mean_c,
            });
        }
    }
    ranked.sort_by(|x, y| {
        y.support
            .cmp(&x.support)
            .then(y.mean_c.total_cmp(&x.mean_c))
            .then((x.gold.index(), x.predicted.index()).cmp(&(y.gold.index(), y.predicted.index())))
    });

    let mut text = String::from("# Inter-sentiment correlation\n\n");
    if let Some(rule) = binaries.first().map(|b| b.rule) {
        writeln!(text, "Binarization: {rule}.").unwrap();
    }
    let n = vote.combos.len();
    writeln!(
        text,
        "Vote: a pair is kept when at least {} of {n} combinations mark it{}.\n",
        vote.quorum,
        if vote.quorum == n { " (all)" } else { "" }
    )
    .unwrap();
    for m in matrices {
        writeln!(
            text,
            "## {}\n\n{} samples.\n\n```text\n{}```\n",
            m.combo,
            m.total(),
            m.heatmap()
        )
        .unwrap();
    }
    text.push_str("## Confusing pairs\n\n");
    if ranked.is_empty() {
        text.push_str("No off-diagonal pair reaches the quorum.\n");
    } else {
        text.push_str("| rank | gold | predicted as | combinations | mean C |\n|---:|---|---|---:|---:|\n");
        for (i, p) in ranked.iter().enumerate() {
            writeln!(
                text,
                "| {} | {} ({}) | {} ({}) | {}/{n} | {:.3} |",
                i + 1,
                p.gold.tag(),
                p.gold.name(),
                p.predicted.tag(),
                p.predicted.name(),
                p.support,
                p.mean_c
            )
            .unwrap();
        }
    }

    CorrelationReport {
        matrix_csv: matrices.iter().map(|m| (m.combo.clone(), m.to_csv())).collect(),
        ranked,
        text,
    }
}
