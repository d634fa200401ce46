//! Embedding lookup and the sliding context window.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row `i` of the output is `table[ids[i]]`.
pub fn embedding_forward(table: &Tensor, ids: &[usize]) -> Result<Tensor> {
    if table.shape().len() != 2 {
        return Err(Error::Input("embedding table must be a matrix".into()));
    }
    if ids.is_empty() {
        return Err(Error::Input("embedding lookup needs at least one id".into()));
    }
    let (vocab, dim) = (table.rows(), table.cols());
    let mut out = Tensor::zeros(&[ids.len(), dim]);
    for (i, &id) in ids.iter().enumerate() {
        if id >= vocab {
            return Err(Error::IdOutOfRange { id, vocab_size: vocab });
        }
        out.row_mut(i).copy_from_slice(table.row(id));
    }
    Ok(out)
}

/// Scatter-adds `grad_out` rows into `grad_table`; repeated ids accumulate.
pub fn embedding_backward(grad_table: &mut Tensor, ids: &[usize], grad_out: &Tensor) {
    debug_assert_eq!(grad_out.rows(), ids.len());
    for (i, &id) in ids.iter().enumerate() {
        let src = grad_out.row(i);
        for (g, &s) in grad_table.row_mut(id).iter_mut().zip(src) {
            *g += s;
        }
    }
}

/// Concatenates each position with its `window / 2` neighbours on either
/// side. Slots that fall outside the sequence read `none_row`, the
/// embedding of the reserved padding id.
pub fn window_concat(embeds: &Tensor, none_row: &[f64], window: usize) -> Result<Tensor> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Config(format!("window must be odd, got {window}")));
    }
    let (n, d) = (embeds.rows(), embeds.cols());
    if none_row.len() != d {
        return Err(Error::shape("window none row", &[d], &[none_row.len()]));
    }
    let half = (window / 2) as isize;
    let mut out = Tensor::zeros(&[n, window * d]);
    for i in 0..n {
        let row = out.row_mut(i);
        for (slot, offset) in (-half..=half).enumerate() {
            let j = i as isize + offset;
            let src = if j >= 0 && (j as usize) < n {
                embeds.row(j as usize)
            } else {
                none_row
            };
            row[slot * d..(slot + 1) * d].copy_from_slice(src);
        }
    }
    Ok(out)
}

/// Returns `(grad_embeds, grad_none_row)`.
pub fn window_concat_backward(grad_out: &Tensor, window: usize) -> (Tensor, Vec<f64>) {
    let n = grad_out.rows();
    let d = grad_out.cols() / window;
    let half = (window / 2) as isize;
    let mut grad_embeds = Tensor::zeros(&[n, d]);
    let mut grad_none = vec![0.0; d];
    for i in 0..n {
        let row = grad_out.row(i);
        for (slot, offset) in (-half..=half).enumerate() {
            let j = i as isize + offset;
            let src = &row[slot * d..(slot + 1) * d];
            let dst = if j >= 0 && (j as usize) < n {
                grad_embeds.row_mut(j as usize)
            } else {
                &mut grad_none[..]
            };
            for (g, &s) in dst.iter_mut().zip(src) {
                *g += s;
            }
        }
    }
    (grad_embeds, grad_none)
}
