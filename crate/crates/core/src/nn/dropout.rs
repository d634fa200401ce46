//! Inverted dropout.

use crate::error::{Error, Result};
use crate::tensor::{SeededRng, Tensor};

/// Result of a dropout pass. `scale` holds the per-element multiplier
/// (0 or `1/(1-rate)`) in training mode and is `None` in eval mode, where
/// the layer is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Dropout {
    pub output: Tensor,
    pub scale: Option<Vec<f64>>,
}

impl Dropout {
    pub fn backward(&self, grad_out: &Tensor) -> Tensor {
        match &self.scale {
            None => grad_out.clone(),
            Some(scale) => {
                let mut g = grad_out.clone();
                for (gi, &s) in g.data_mut().iter_mut().zip(scale) {
                    *gi *= s;
                }
                g
            }
        }
    }
}

/// Zeroes each element with probability `rate` and scales survivors by
/// `1/(1-rate)` when `training`; identity otherwise. Draws one uniform per
/// element from `rng` in training mode only.
pub fn dropout(x: &Tensor, rate: f64, rng: &mut SeededRng, training: bool) -> Result<Dropout> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if !training || rate == 0.0 {
        return Ok(Dropout {
            output: x.clone(),
            scale: None,
        });
    }
    let keep = 1.0 / (1.0 - rate);
    let scale: Vec<f64> = (0..x.len())
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
        .collect();
    let mut output = x.clone();
    for (o, &s) in output.data_mut().iter_mut().zip(&scale) {
        *o *= s;
    }
    Ok(Dropout {
        output,
        scale: Some(scale),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_and_eval_mode_are_identity() {
        let mut rng = SeededRng::new(0);
        let x = Tensor::vector(vec![1.0, -2.0, 3.0]);
        assert_eq!(dropout(&x, 0.0, &mut rng, true).unwrap().output, x);
        assert_eq!(dropout(&x, 0.0, &mut rng, false).unwrap().output, x);
        assert_eq!(dropout(&x, 0.9, &mut rng, false).unwrap().output, x);
    }

    #[test]
    fn rate_one_is_rejected() {
        let mut rng = SeededRng::new(0);
        let x = Tensor::vector(vec![1.0]);
        assert!(matches!(dropout(&x, 1.0, &mut rng, true), Err(Error::Config(_))));
        assert!(dropout(&x, -0.1, &mut rng, true).is_err());
    }

    #[test]
    fn survival_fraction_is_close_to_half() {
        let mut rng = SeededRng::new(123);
        let x = Tensor::from_vec(&[100_000], vec![1.0; 100_000]).unwrap();
        let d = dropout(&x, 0.5, &mut rng, true).unwrap();
        let survivors = d.output.data().iter().filter(|&&v| v != 0.0).count();
        let fraction = survivors as f64 / 1e5;
        assert!((fraction - 0.5).abs() < 0.01, "survival {fraction}");
        assert!(d.output.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn backward_reuses_the_forward_mask() {
        let mut rng = SeededRng::new(8);
        let x = Tensor::vector(vec![1.0; 64]);
        let d = dropout(&x, 0.3, &mut rng, true).unwrap();
        let g = d.backward(&Tensor::vector(vec![1.0; 64]));
        assert_eq!(g, d.output);
    }
}
