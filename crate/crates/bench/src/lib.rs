//! Seeded inputs shared by the benchmarks.

use sentcorr_core::correlation::{BinarizeRule, BinaryConfusion};
use sentcorr_core::{ComboKey, EncodedSample, SeededRng, SentimentLabel, NUM_CLASSES};

/// `n` samples of length `seq_len` with random ids in `1..vocab` and a
/// random valid prefix of at least one token.
pub fn random_samples(n: usize, seq_len: usize, vocab: usize, seed: u64) -> Vec<EncodedSample> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|i| {
            let valid = 1 + rng.below(seq_len);
            let ids = (0..seq_len)
                .map(|t| if t < valid { 1 + rng.below(vocab - 1) } else { 0 })
                .collect();
            let mask = (0..seq_len).map(|t| u8::from(t < valid)).collect();
            let label = SentimentLabel::from_index(rng.below(NUM_CLASSES)).expect("class index");
            EncodedSample::new(format!("b{i}"), label, "bench", (ids, mask))
        })
        .collect()
}

/// `n` random binary matrices with roughly `density` ones.
pub fn random_binaries(n: usize, density: f64, seed: u64) -> Vec<BinaryConfusion> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|i| BinaryConfusion {
            combo: ComboKey::new("bench", "f", format!("m{i}")),
            cr: std::array::from_fn(|_| std::array::from_fn(|_| u8::from(rng.next_f64() < density))),
            rule: BinarizeRule::Fixed { theta: 0.5 },
        })
        .collect()
}
