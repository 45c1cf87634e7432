use ndarray::ArrayView1;

use crate::error::{Error, Result};
use crate::transformer::{ForwardTrace, Real};

/// Numerically stable softmax, computed in `f64`.
pub fn softmax<F: Real>(logits: ArrayView1<F>) -> Vec<f64> {
    let max = logits
        .iter()
        .map(|v| v.as_f64())
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v.as_f64() - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Next-token distribution predicted at `position`.
pub fn output_distribution<F: Real>(trace: &ForwardTrace<F>, position: usize) -> Result<Vec<f64>> {
    if position >= trace.logits.nrows() {
        return Err(Error::OutOfBounds(format!(
            "position {position} >= sequence length {}",
            trace.logits.nrows()
        )));
    }
    Ok(softmax(trace.logits.row(position)))
}

/// Overlap of two distributions, `sum_i min(q_i, p_i)`.
pub fn distribution_similarity(q: &[f64], p: &[f64]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::Shape(format!("lengths {} and {}", q.len(), p.len())));
    }
    for (name, v) in [("q", q), ("p", p)] {
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > 1e-4 || v.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "{name} is not a probability vector (sum = {total})"
            )));
        }
    }
    Ok(q.iter().zip(p).map(|(a, b)| a.min(*b)).sum())
}

/// Share of text-to-prefix attention received by each position `j <= n_eoi`,
/// averaged over heads and summed over text queries `i > n_eoi`, normalized
/// per layer to sum to one. Returns one row per layer.
pub fn cross_modal_attention_profile<F: Real>(trace: &ForwardTrace<F>, n_eoi: usize) -> Result<Vec<Vec<f64>>> {
    if trace.attention.is_empty() {
        return Err(Error::InvalidInput("trace was captured without attention".into()));
    }
    let len = trace.logits.nrows();
    if n_eoi + 1 >= len {
        return Err(Error::InvalidInput(format!(
            "no text positions after [EOI] at {n_eoi} (length {len})"
        )));
    }
    trace
        .attention
        .iter()
        .enumerate()
        .map(|(l, heads)| {
            let mut f = vec![0.0; n_eoi + 1];
            for a in heads {
                for i in n_eoi + 1..len {
                    for (j, fj) in f.iter_mut().enumerate() {
                        *fj += a[[i, j]].as_f64();
                    }
                }
            }
            let h = heads.len() as f64;
            f.iter_mut().for_each(|v| *v /= h);
            let c: f64 = f.iter().sum();
            if c <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "layer {l}: text queries put no attention on the image prefix"
                )));
            }
            Ok(f.into_iter().map(|v| v / c).collect())
        })
        .collect()
}
