//! Inter-sentiment correlation: confusion matrices `C`, binarized `Cr`, and
//! the vote `T` across combinations.
//!
//! Orientation everywhere: row `a` is the predicted class, column `b` the
//! gold class, and `C[a][b]` is the fraction of gold-`b` samples predicted
//! as `a` (columns sum to 1).

mod predlog;
mod report;

pub use predlog::{
    group_by_combo, parse_prediction_log, prediction_log_csv, read_prediction_log, write_prediction_log, ComboKey,
    PredictionRecord, PREDICTION_LOG_HEADER,
};
pub use report::{correlation_report, glyph, CorrelationReport, RankedPair};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::NUM_CLASSES;

pub type Grid<T> = [[T; NUM_CLASSES]; NUM_CLASSES];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub combo: ComboKey,
    /// `counts[a][b]`: gold `b` predicted as `a`.
    pub counts: Grid<usize>,
    /// Column-normalized `counts`; all-zero columns where `undefined`.
    pub c: Grid<f64>,
    /// Gold classes with no samples.
    pub undefined: [bool; NUM_CLASSES],
}

impl ConfusionMatrix {
    /// Gold-sample count of class `b`.
    pub fn column_total(&self, b: usize) -> usize {
        (0..NUM_CLASSES).map(|a| self.counts[a][b]).sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

/// Builds `C` for one combination.
pub fn confusion(records: &[PredictionRecord]) -> Result<ConfusionMatrix> {
    let first = records
        .first()
        .ok_or_else(|| Error::Input("confusion matrix needs at least one record".into()))?;
    if let Some(r) = records.iter().find(|r| r.combo != first.combo) {
        return Err(Error::Input(format!(
            "records mix combinations {} and {} (sample {})",
            first.combo, r.combo, r.sample_id
        )));
    }
    let mut counts = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    for r in records {
        counts[r.predicted.index()][r.gold.index()] += 1;
    }
    let mut c = [[0.0; NUM_CLASSES]; NUM_CLASSES];
    let mut undefined = [false; NUM_CLASSES];
    for b in 0..NUM_CLASSES {
        let total: usize = (0..NUM_CLASSES).map(|a| counts[a][b]).sum();
        undefined[b] = total == 0;
        if total > 0 {
            for a in 0..NUM_CLASSES {
                c[a][b] = counts[a][b] as f64 / total as f64;
            }
        }
    }
    Ok(ConfusionMatrix {
        combo: first.combo.clone(),
        counts,
        c,
        undefined,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinarizeRule {
    /// `Cr = 1` iff `C > theta`.
    Fixed { theta: f64 },
    /// The `k` largest positive eligible entries.
    TopK { k: usize, include_diagonal: bool },
}

impl fmt::Display for BinarizeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinarizeRule::Fixed { theta } => write!(f, "C > {theta}"),
            BinarizeRule::TopK { k, include_diagonal } => {
                write!(
                    f,
                    "top {k} {}",
                    if *include_diagonal {
                        "entries"
                    } else {
                        "off-diagonal entries"
                    }
                )
            }
        }
    }
}

impl BinarizeRule {
    pub fn apply(&self, c: &ConfusionMatrix) -> Result<BinaryConfusion> {
        match *self {
            BinarizeRule::Fixed { theta } => binarize_fixed(c, theta),
            BinarizeRule::TopK { k, include_diagonal } => binarize_topk(c, k, include_diagonal),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryConfusion {
    pub combo: ComboKey,
    pub cr: Grid<u8>,
    pub rule: BinarizeRule,
}

pub fn binarize_fixed(c: &ConfusionMatrix, theta: f64) -> Result<BinaryConfusion> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Config(format!("theta must be in [0, 1], got {theta}")));
    }
    let cr = c.c.map(|row| row.map(|v| u8::from(v > theta)));
    Ok(BinaryConfusion {
        combo: c.combo.clone(),
        cr,
        rule: BinarizeRule::Fixed { theta },
    })
}

/// Selects the `k` largest strictly positive entries, off-diagonal unless
/// `include_diagonal`. Ties go to the smaller `(row, column)`.
pub fn binarize_topk(c: &ConfusionMatrix, k: usize, include_diagonal: bool) -> Result<BinaryConfusion> {
    if k == 0 {
        return Err(Error::Config("top-k needs k >= 1".into()));
    }
    let mut candidates: Vec<(usize, usize)> = (0..NUM_CLASSES)
        .flat_map(|a| (0..NUM_CLASSES).map(move |b| (a, b)))
        .filter(|&(a, b)| (include_diagonal || a != b) && c.c[a][b] > 0.0)
        .collect();
    if k > candidates.len() {
        log::warn!(
            "{}: top-{k} requested but only {} positive candidates; selecting all",
            c.combo,
            candidates.len()
        );
    }
    // Stable sort keeps (row, column) order among equal values.
    candidates.sort_by(|&(a1, b1), &(a2, b2)| c.c[a2][b2].total_cmp(&c.c[a1][b1]));
    let mut cr = [[0u8; NUM_CLASSES]; NUM_CLASSES];
    for &(a, b) in candidates.iter().take(k) {
        cr[a][b] = 1;
    }
    Ok(BinaryConfusion {
        combo: c.combo.clone(),
        cr,
        rule: BinarizeRule::TopK { k, include_diagonal },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteResult {
    pub t: Grid<u8>,
    /// How many inputs had `Cr[a][b] = 1`.
    pub support: Grid<usize>,
    pub quorum: usize,
    pub combos: Vec<ComboKey>,
}

/// `T[a][b] = 1` iff at least `quorum` inputs have `Cr[a][b] = 1`.
/// `None` means all inputs (logical AND); `Some(1)` is logical OR.
pub fn vote(inputs: &[BinaryConfusion], quorum: Option<usize>) -> Result<VoteResult> {
    if inputs.is_empty() {
        return Err(Error::Input("vote needs at least one binarized matrix".into()));
    }
    let n = inputs.len();
    let quorum = quorum.unwrap_or(n);
    if !(1..=n).contains(&quorum) {
        return Err(Error::Config(format!("quorum must be in 1..={n}, got {quorum}")));
    }
    let mut support = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    for m in inputs {
        for a in 0..NUM_CLASSES {
            for b in 0..NUM_CLASSES {
                support[a][b] += usize::from(m.cr[a][b]);
            }
        }
    }
    Ok(VoteResult {
        t: support.map(|row| row.map(|s| u8::from(s >= quorum))),
        support,
        quorum,
        combos: inputs.iter().map(|m| m.combo.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::SentimentLabel;
    use crate::tensor::SeededRng;
    use proptest::prelude::*;

    fn key() -> ComboKey {
        ComboKey::new("D1", "explicit", "cnn_lstm2")
    }

    fn rec(i: usize, gold: usize, pred: usize) -> PredictionRecord {
        PredictionRecord {
            sample_id: format!("s{i}"),
            gold: SentimentLabel::from_index(gold).unwrap(),
            predicted: SentimentLabel::from_index(pred).unwrap(),
            combo: key(),
        }
    }

    fn matrix(c: Grid<f64>) -> ConfusionMatrix {
        ConfusionMatrix {
            combo: key(),
            counts: [[0; 6]; 6],
            c,
            undefined: [false; 6],
        }
    }

    fn binary(cr: Grid<u8>) -> BinaryConfusion {
        BinaryConfusion {
            combo: key(),
            cr,
            rule: BinarizeRule::Fixed { theta: 0.5 },
        }
    }

    #[test]
    fn perfect_predictions_give_identity() {
        let recs: Vec<_> = (0..12).map(|i| rec(i, i % 6, i % 6)).collect();
        let m = confusion(&recs).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                assert_eq!(m.c[a][b], if a == b { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn all_predicted_anger() {
        let recs: Vec<_> = (0..10).map(|i| rec(i, i % 4, 5)).collect();
        let m = confusion(&recs).unwrap();
        for b in 0..6 {
            assert_eq!(m.c[5][b], if b < 4 { 1.0 } else { 0.0 });
            assert_eq!(m.undefined[b], b >= 4);
        }
    }

    #[test]
    fn random_log_matches_naive_recount() {
        let mut rng = SeededRng::new(13);
        let recs: Vec<_> = (0..60).map(|i| rec(i, rng.below(6), rng.below(6))).collect();
        let m = confusion(&recs).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                let n = recs
                    .iter()
                    .filter(|r| r.predicted.index() == a && r.gold.index() == b)
                    .count();
                let g = recs.iter().filter(|r| r.gold.index() == b).count();
                assert_eq!(m.counts[a][b], n);
                assert_eq!(m.c[a][b], if g == 0 { 0.0 } else { n as f64 / g as f64 });
            }
        }
        assert_eq!(m.total(), 60);
    }

    #[test]
    fn mixed_or_empty_records_rejected() {
        let mut recs = vec![rec(0, 0, 0), rec(1, 1, 1)];
        recs[1].combo.model = "other".into();
        assert!(matches!(confusion(&recs), Err(Error::Input(_))));
        assert!(confusion(&[]).is_err());
    }

    #[test]
    fn fixed_threshold_is_strict() {
        let mut c = [[0.0; 6]; 6];
        c[0][1] = 0.7;
        c[2][3] = 0.5;
        c[4][4] = 0.25;
        let m = matrix(c);
        let r = binarize_fixed(&m, 0.5).unwrap();
        assert_eq!(r.cr[0][1], 1);
        assert_eq!(r.cr[2][3], 0);
        let z = binarize_fixed(&m, 0.0).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                assert_eq!(z.cr[a][b], u8::from(c[a][b] > 0.0));
            }
        }
        assert!(binarize_fixed(&m, 1.2).is_err());
        assert!(binarize_fixed(&m, -0.1).is_err());
    }

    #[test]
    fn topk_on_identity_selects_nothing_off_diagonal() {
        let mut c = [[0.0; 6]; 6];
        (0..6).for_each(|i| c[i][i] = 1.0);
        let r = binarize_topk(&matrix(c), 3, false).unwrap();
        assert_eq!(r.cr, [[0; 6]; 6]);
        let all = binarize_topk(&matrix([[0.1; 6]; 6]), 36, true).unwrap();
        assert_eq!(all.cr, [[1; 6]; 6]);
        assert!(binarize_topk(&matrix(c), 0, false).is_err());
    }

    #[test]
    fn topk_ties_go_to_lower_row_then_column() {
        let mut c = [[0.0; 6]; 6];
        c[3][1] = 0.2;
        c[1][4] = 0.2;
        c[1][2] = 0.2;
        c[0][5] = 0.1;
        let r = binarize_topk(&matrix(c), 2, false).unwrap();
        assert_eq!((r.cr[1][2], r.cr[1][4], r.cr[3][1]), (1, 1, 0));
    }

    #[test]
    fn topk_matches_sort_oracle() {
        let mut rng = SeededRng::new(5);
        for _ in 0..200 {
            // Coarse values make ties common.
            let c: Grid<f64> = std::array::from_fn(|_| std::array::from_fn(|_| rng.below(5) as f64 / 4.0));
            let k = 1 + rng.below(8);
            let got = binarize_topk(&matrix(c), k, false).unwrap();
            let mut all: Vec<(f64, usize, usize)> = Vec::new();
            for a in 0..6 {
                for b in 0..6 {
                    if a != b && c[a][b] > 0.0 {
                        all.push((c[a][b], a, b));
                    }
                }
            }
            all.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then((x.1, x.2).cmp(&(y.1, y.2))));
            let mut want = [[0u8; 6]; 6];
            for &(_, a, b) in all.iter().take(k) {
                want[a][b] = 1;
            }
            assert_eq!(got.cr, want);
        }
    }

    #[test]
    fn vote_against_brute_force() {
        let mut rng = SeededRng::new(2024);
        for _ in 0..1000 {
            let mats: Vec<BinaryConfusion> = (0..18)
                .map(|_| {
                    binary(std::array::from_fn(|_| {
                        std::array::from_fn(|_| u8::from(rng.next_f64() < 0.9))
                    }))
                })
                .collect();
            let and = vote(&mats, None).unwrap();
            let or = vote(&mats, Some(1)).unwrap();
            for a in 0..6 {
                for b in 0..6 {
                    let mut all = 1u8;
                    let mut any = 0u8;
                    for m in &mats {
                        all &= m.cr[a][b];
                        any |= m.cr[a][b];
                    }
                    assert_eq!(and.t[a][b], all);
                    assert_eq!(or.t[a][b], any);
                }
            }
        }
    }

    #[test]
    fn vote_edge_cases() {
        let ones = binary([[1; 6]; 6]);
        let zeros = binary([[0; 6]; 6]);
        assert_eq!(vote(&[ones.clone(), zeros.clone()], None).unwrap().t, [[0; 6]; 6]);
        let same = vote(&[ones.clone(), ones.clone(), ones.clone()], Some(2)).unwrap();
        assert_eq!(same.t, ones.cr);
        assert!(vote(&[], None).is_err());
        assert!(vote(std::slice::from_ref(&ones), Some(2)).is_err());
        assert!(vote(&[ones], Some(0)).is_err());
    }

    fn grid_u8() -> impl Strategy<Value = Grid<u8>> {
        prop::array::uniform6(prop::array::uniform6(0u8..2))
    }

    proptest! {
        #[test]
        fn columns_are_stochastic(pairs in prop::collection::vec((0usize..6, 0usize..6), 1..120)) {
            let recs: Vec<_> = pairs.iter().enumerate().map(|(i, &(g, p))| rec(i, g, p)).collect();
            let m = confusion(&recs).unwrap();
            for b in 0..6 {
                let total = m.column_total(b);
                let sum: f64 = (0..6).map(|a| m.c[a][b]).sum();
                if total > 0 {
                    prop_assert!((sum - 1.0).abs() < 1e-9);
                    for a in 0..6 {
                        prop_assert_eq!((m.c[a][b] * total as f64).round() as usize, m.counts[a][b]);
                    }
                } else {
                    prop_assert_eq!(sum, 0.0);
                }
            }
        }

        #[test]
        fn correct_only_records_are_diagonal(golds in prop::collection::vec(0usize..6, 1..50)) {
            let recs: Vec<_> = golds.iter().enumerate().map(|(i, &g)| rec(i, g, g)).collect();
            let m = confusion(&recs).unwrap();
            for a in 0..6 {
                for b in 0..6 {
                    if a != b {
                        prop_assert_eq!(m.counts[a][b], 0);
                    }
                }
            }
        }

        #[test]
        fn threshold_monotone(vals in prop::array::uniform6(prop::array::uniform6(0.0f64..=1.0)), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            let m = matrix(vals);
            let a = binarize_fixed(&m, lo).unwrap();
            let b = binarize_fixed(&m, hi).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    prop_assert!(b.cr[i][j] <= a.cr[i][j]);
                }
            }
        }

        #[test]
        fn vote_is_permutation_invariant(grids in prop::collection::vec(grid_u8(), 1..8), quorum_frac in 0.0f64..1.0, seed in any::<u64>()) {
            let mats: Vec<_> = grids.into_iter().map(binary).collect();
            let q = 1 + ((mats.len() - 1) as f64 * quorum_frac) as usize;
            let mut shuffled = mats.clone();
            SeededRng::new(seed).shuffle(&mut shuffled);
            prop_assert_eq!(vote(&mats, Some(q)).unwrap().t, vote(&shuffled, Some(q)).unwrap().t);
        }
    }
}
