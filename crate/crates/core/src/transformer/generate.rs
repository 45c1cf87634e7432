use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::transformer::{softmax, Capture, NamedKnockout, Real, TokenSequence, Transformer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    Greedy,
    Temperature { t: f64, seed: u64 },
}

fn argmax(p: &[f64]) -> usize {
    // First maximum wins ties.
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Autoregressive decoding without a KV cache.
///
/// A named knockout is re-resolved against the growing sequence at every
/// step, so its position sets stay anchored at `[EOI]`. Decoding stops after
/// `max_new` tokens or once `stop` is produced.
pub fn generate<F: Real>(
    model: &Transformer<F>,
    seq: &TokenSequence,
    max_new: usize,
    mode: DecodeMode,
    knockout: Option<&NamedKnockout>,
    stop: Option<u32>,
) -> Result<TokenSequence> {
    if seq.len() + max_new > model.config.max_seq_len {
        return Err(Error::InvalidInput(format!(
            "{} + {max_new} tokens exceed max_seq_len {}",
            seq.len(),
            model.config.max_seq_len
        )));
    }
    let mut rng = match mode {
        DecodeMode::Temperature { t, seed } => {
            if !(t > 0.0) {
                return Err(Error::InvalidInput(format!("temperature {t} must be > 0")));
            }
            Some(ChaCha8Rng::seed_from_u64(seed))
        }
        DecodeMode::Greedy => None,
    };
    let mut out = seq.clone();
    for _ in 0..max_new {
        let spec = knockout.map(|k| k.resolve(&out));
        let trace = model.forward(&out.ids, spec.as_ref(), None, Capture::NONE)?;
        let last = trace.logits.row(out.len() - 1);
        let next = match (mode, rng.as_mut()) {
            (DecodeMode::Temperature { t, .. }, Some(rng)) => {
                let scaled = last.mapv(|v| v.as_f64() / t);
                let probs = softmax(scaled.view());
                if probs.iter().any(|p| !p.is_finite()) {
                    return Err(Error::Degenerate("non-finite sampling distribution".into()));
                }
                WeightedIndex::new(&probs)
                    .map_err(|e| Error::Degenerate(e.to_string()))?
                    .sample(rng)
            }
            _ => argmax(&last.iter().map(|v| v.as_f64()).collect::<Vec<_>>()),
        } as u32;
        out.ids.push(next);
        out.modality.push(model.config.modality(next));
        if stop == Some(next) {
            break;
        }
    }
    Ok(out)
}
