use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::training::loss::{loss_and_grad, packed_targets};
use crate::training::Example;
use crate::transformer::{backward, Gradient, SeqInput, Transformer};

/// Gradients whose magnitudes both fall below this are compared absolutely.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// `(flat index, analytic, numeric)` for every sampled parameter.
    pub samples: Vec<(usize, f64, f64)>,
}

/// Objective `scale * mean CE`; a fully masked batch is the constant 0.
fn objective(model: &Transformer<f64>, batch: &[Example], scale: f64) -> Result<f64> {
    let inputs: Vec<SeqInput> = batch.iter().map(Example::input).collect();
    let cache = model.forward_cache(&inputs)?;
    let (targets, mask) = packed_targets(batch);
    if !mask.contains(&true) {
        return Ok(0.0);
    }
    Ok(scale * loss_and_grad(cache.logits.view(), &targets, &mask)?.0)
}

/// Objective value and its exact gradient.
pub fn analytic_gradient(model: &Transformer<f64>, batch: &[Example], scale: f64) -> Result<(f64, Gradient<f64>)> {
    let inputs: Vec<SeqInput> = batch.iter().map(Example::input).collect();
    let cache = model.forward_cache(&inputs)?;
    let (targets, mask) = packed_targets(batch);
    if !mask.contains(&true) {
        return Ok((0.0, Gradient::zeros(model.params.layout.clone())));
    }
    let (l, mut dlogits) = loss_and_grad(cache.logits.view(), &targets, &mask)?;
    dlogits *= scale;
    Ok((scale * l, backward(model, &cache, &dlogits)?))
}

/// Compares analytic gradients with central differences on `n_params`
/// parameters, drawn round-robin over tensors so every tensor is covered.
pub fn grad_check(
    model: &Transformer<f64>,
    batch: &[Example],
    epsilon: f64,
    n_params: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let (_, grad) = analytic_gradient(model, batch, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = &model.params.layout.tensors;
    let mut probe = model.clone();
    let mut samples = Vec::with_capacity(n_params);
    let mut max_rel_err: f64 = 0.0;
    for k in 0..n_params {
        let t = &tensors[k % tensors.len()];
        let idx = t.offset + rng.gen_range(0..t.len());
        let orig = probe.params.data[idx];
        probe.params.data[idx] = orig + epsilon;
        let up = objective(&probe, batch, 1.0)?;
        probe.params.data[idx] = orig - epsilon;
        let down = objective(&probe, batch, 1.0)?;
        probe.params.data[idx] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let analytic = grad.data[idx];
        let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        max_rel_err = max_rel_err.max((analytic - numeric).abs() / denom);
        samples.push((idx, analytic, numeric));
    }
    Ok(GradCheckReport { max_rel_err, samples })
}
