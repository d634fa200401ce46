//! Softmax and cross-entropy.

/// Smallest probability fed to the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Max-subtracted softmax. Entries are strictly positive for finite input.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    assert!(!x.is_empty(), "softmax of an empty vector");
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    /// `p[gold]` fell below [`PROB_FLOOR`] and was clamped.
    pub clamped: bool,
}

/// `-ln p[gold]`, clamping `p[gold]` at [`PROB_FLOOR`].
pub fn cross_entropy(p: &[f64], gold: usize) -> CrossEntropy {
    assert!(gold < p.len(), "gold class {gold} out of range");
    let pg = p[gold];
    if pg < PROB_FLOOR {
        log::warn!("cross-entropy: p[gold] = {pg:e} clamped to {PROB_FLOOR:e}");
        return CrossEntropy {
            loss: -PROB_FLOOR.ln(),
            clamped: true,
        };
    }
    CrossEntropy {
        loss: -pg.ln(),
        clamped: false,
    }
}

/// Gradient of `cross_entropy(softmax(z), gold)` with respect to `z`.
pub fn softmax_cross_entropy_grad(p: &[f64], gold: usize) -> Vec<f64> {
    let mut g = p.to_vec();
    g[gold] -= 1.0;
    g
}
