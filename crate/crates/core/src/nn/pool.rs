//! Masked mean pooling over the sequence axis.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::tensor::Tensor;

/// Divisor used by [`masked_mean`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanBy {
    /// Divide by the padded length N, so padding dilutes the mean.
    #[default]
    Padded,
    /// Divide by the number of unmasked positions.
    Valid,
}

impl MeanBy {
    /// Divisor for a mask; `None` when nothing is unmasked under `Valid`.
    pub fn divisor(self, mask: &[f64]) -> Option<f64> {
        match self {
            MeanBy::Padded => Some(mask.len() as f64),
            MeanBy::Valid => {
                let count: f64 = mask.iter().sum();
                (count > 0.0).then_some(count)
            }
        }
    }
}

impl fmt::Display for MeanBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeanBy::Padded => "padded",
            MeanBy::Valid => "valid",
        })
    }
}

impl FromStr for MeanBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "padded" => Ok(MeanBy::Padded),
            "valid" => Ok(MeanBy::Valid),
            other => Err(Error::Config(format!(
                "unknown mean_by {other:?} (expected padded|valid)"
            ))),
        }
    }
}

/// `(1/divisor) · Σ_i mask_i · h_i`. An all-zero mask gives the zero vector.
pub fn masked_mean(h: &Tensor, mask: &[f64], mean_by: MeanBy) -> Vec<f64> {
    debug_assert_eq!(h.rows(), mask.len());
    let mut out = vec![0.0; h.cols()];
    let Some(div) = mean_by.divisor(mask) else {
        return out;
    };
    for (i, &m) in mask.iter().enumerate() {
        if m != 0.0 {
            for (o, &v) in out.iter_mut().zip(h.row(i)) {
                *o += m * v;
            }
        }
    }
    out.iter_mut().for_each(|o| *o /= div);
    out
}

/// Routes `grad / divisor` to unmasked rows; masked rows get zero.
pub fn masked_mean_backward(grad: &[f64], mask: &[f64], mean_by: MeanBy) -> Tensor {
    let mut out = Tensor::zeros(&[mask.len(), grad.len()]);
    let Some(div) = mean_by.divisor(mask) else {
        return out;
    };
    for (i, &m) in mask.iter().enumerate() {
        if m != 0.0 {
            for (o, &g) in out.row_mut(i).iter_mut().zip(grad) {
                *o = m * g / div;
            }
        }
    }
    out
}
