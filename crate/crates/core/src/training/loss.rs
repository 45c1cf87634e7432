use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::transformer::{KnockoutSpec, Real, SeqInput};

/// A training sequence: `mask[t]` says whether token `t` is a prediction
/// target (it is predicted from position `t - 1`; `mask[0]` is ignored).
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub ids: Vec<u32>,
    pub mask: Vec<bool>,
    pub knockout: Option<KnockoutSpec>,
}

impl Example {
    pub fn input(&self) -> SeqInput<'_> {
        SeqInput {
            tokens: &self.ids,
            knockout: self.knockout.as_ref(),
            patch: None,
        }
    }
}

/// Per-row targets for a packed batch: row `off + t` predicts `ids[t + 1]`.
pub(crate) fn packed_targets(batch: &[Example]) -> (Vec<u32>, Vec<bool>) {
    let mut targets = Vec::new();
    let mut mask = Vec::new();
    for ex in batch {
        let n = ex.ids.len();
        for t in 0..n {
            if t + 1 < n {
                targets.push(ex.ids[t + 1]);
                mask.push(ex.mask[t + 1]);
            } else {
                targets.push(0);
                mask.push(false);
            }
        }
    }
    (targets, mask)
}

fn check<F>(logits: &ArrayView2<F>, targets: &[u32], mask: &[bool]) -> Result<usize> {
    let (rows, v) = logits.dim();
    if targets.len() != rows || mask.len() != rows {
        return Err(Error::Shape(format!(
            "{rows} logit rows, {} targets, {} mask entries",
            targets.len(),
            mask.len()
        )));
    }
    if let Some(t) = targets.iter().zip(mask).find(|(&t, &m)| m && t as usize >= v) {
        return Err(Error::OutOfBounds(format!("target {} >= vocab {v}", t.0)));
    }
    let kept = mask.iter().filter(|&&m| m).count();
    if kept == 0 {
        return Err(Error::InvalidInput("every position is masked".into()));
    }
    Ok(kept)
}

fn log_softmax_row<F: Real>(row: ndarray::ArrayView1<F>) -> (f64, Vec<f64>) {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x.as_f64()));
    let exps: Vec<f64> = row.iter().map(|&x| (x.as_f64() - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    (max + z.ln(), exps.into_iter().map(|e| e / z).collect())
}

/// Mean cross-entropy (nats) over the unmasked rows; row `i` of `logits`
/// scores `targets[i]`.
pub fn loss<F: Real>(logits: ArrayView2<F>, targets: &[u32], mask: &[bool]) -> Result<f64> {
    let kept = check(&logits, targets, mask)?;
    let mut total = 0.0;
    for (i, row) in logits.rows().into_iter().enumerate() {
        if mask[i] {
            let (lse, _) = log_softmax_row(row);
            total += lse - row[targets[i] as usize].as_f64();
        }
    }
    Ok(total / kept as f64)
}

/// Loss together with its gradient with respect to the logits.
pub fn loss_and_grad<F: Real>(logits: ArrayView2<F>, targets: &[u32], mask: &[bool]) -> Result<(f64, Array2<F>)> {
    let kept = check(&logits, targets, mask)?;
    let inv = 1.0 / kept as f64;
    let mut grad = Array2::<F>::zeros(logits.dim());
    let mut total = 0.0;
    for (i, row) in logits.rows().into_iter().enumerate() {
        if !mask[i] {
            continue;
        }
        let (lse, probs) = log_softmax_row(row);
        let t = targets[i] as usize;
        total += lse - row[t].as_f64();
        for (j, (g, p)) in grad.row_mut(i).iter_mut().zip(probs).enumerate() {
            let y = if j == t { 1.0 } else { 0.0 };
            *g = F::from_f64_lossy((p - y) * inv);
        }
    }
    Ok((total * inv, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::Array2;

    #[test]
    fn uniform_logits_give_ln_v() {
        let logits = Array2::<f64>::zeros((5, 17));
        let l = loss(logits.view(), &[1, 2, 3, 4, 5], &[true; 5]).unwrap();
        assert_relative_eq!(l, 17f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn confident_logits_give_near_zero() {
        let mut logits = Array2::<f64>::zeros((3, 10));
        for (i, t) in [4, 0, 9].iter().enumerate() {
            logits[[i, *t]] = 60.0;
        }
        assert!(loss(logits.view(), &[4, 0, 9], &[true; 3]).unwrap() < 1e-20);
    }

    #[test]
    fn half_mask_equals_submask_mean() {
        let logits = Array2::from_shape_fn((6, 7), |(i, j)| ((i * 7 + j) as f64 * 0.37).sin() * 3.0);
        let targets = [0, 1, 2, 3, 4, 5];
        let mask = [true, false, true, false, true, false];
        let l = loss(logits.view(), &targets, &mask).unwrap();
        let sub = logits.select(ndarray::Axis(0), &[0, 2, 4]);
        let l2 = loss(sub.view(), &[0, 2, 4], &[true; 3]).unwrap();
        assert!((l - l2).abs() < 1e-6);
        let (l3, g) = loss_and_grad(logits.view(), &targets, &mask).unwrap();
        assert_relative_eq!(l, l3, epsilon = 1e-12);
        assert!(g.row(1).iter().all(|&x| x == 0.0));
        assert_relative_eq!(g.row(0).sum(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fully_masked_is_an_error() {
        let logits = Array2::<f64>::zeros((2, 3));
        assert!(loss(logits.view(), &[0, 1], &[false, false]).is_err());
        assert!(loss(logits.view(), &[0], &[true]).is_err());
    }
}
