use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tasks::{DocRegime, Document, Vocabulary};
use crate::transformer::{generate, Capture, DecodeMode, KnockoutSpec, NamedKnockout, Real, SeqInput, TokenSequence, Transformer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Also greedy-decode captions of image-first documents.
    pub captions: bool,
    pub batch_size: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            captions: false,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Fraction of answer slots whose argmax prediction is the class token.
    pub accuracy: Option<f64>,
    pub n_classified: usize,
    /// Per classified document, in input order: was the answer correct.
    pub correct: Vec<bool>,
    pub caption_exact_match: Option<f64>,
    pub n_captions: usize,
}

/// Highest-scoring candidate; the first wins ties.
fn argmax_among<F: Real>(row: ndarray::ArrayView1<F>, candidates: &[u32]) -> u32 {
    let mut best = candidates[0];
    for &c in candidates {
        if row[c as usize] > row[best as usize] {
            best = c;
        }
    }
    best
}

/// Classification accuracy at the answer slot (argmax over the class-name
/// tokens) and, optionally, caption exact-match under free greedy decoding,
/// with a named knockout resolved per document.
pub fn evaluate<F: Real>(
    model: &Transformer<F>,
    vocab: &Vocabulary,
    docs: &[Document],
    knockout: &NamedKnockout,
    opts: &EvalOptions,
) -> Result<EvalMetrics> {
    let classes: Vec<u32> = (0..vocab.n_classes).map(|c| vocab.class_token(c)).collect();
    let scored: Vec<&Document> = docs.iter().filter(|d| d.answer_pos.is_some()).collect();
    let mut correct = Vec::with_capacity(scored.len());
    for chunk in scored.chunks(opts.batch_size.max(1)) {
        let specs: Vec<KnockoutSpec> = chunk.iter().map(|d| knockout.resolve(&d.seq)).collect();
        let inputs: Vec<SeqInput> = chunk
            .iter()
            .zip(&specs)
            .map(|(d, k)| SeqInput {
                tokens: d.ids(),
                knockout: Some(k),
                patch: None,
            })
            .collect();
        for (trace, d) in model.trace_batch(&inputs, Capture::NONE)?.iter().zip(chunk) {
            let slot = d.answer_pos.expect("filtered");
            correct.push(argmax_among(trace.logits.row(slot - 1), &classes) == d.ids()[slot]);
        }
    }
    let rate = |hits: usize, n: usize| (n > 0).then(|| hits as f64 / n as f64);

    let mut caption_hits = 0;
    let mut n_captions = 0;
    if opts.captions {
        for d in docs.iter().filter(|d| d.regime == DocRegime::ImageFirstCaption) {
            let cut = d.seq.n_eoi + 1;
            let prompt = TokenSequence {
                ids: d.ids()[..cut].to_vec(),
                modality: d.seq.modality[..cut].to_vec(),
                n_eoi: d.seq.n_eoi,
            };
            let want = &d.ids()[cut..];
            let out = generate(model, &prompt, want.len(), DecodeMode::Greedy, Some(knockout), want.last().copied())?;
            n_captions += 1;
            caption_hits += usize::from(&out.ids[cut..] == want);
        }
    }
    Ok(EvalMetrics {
        accuracy: rate(correct.iter().filter(|&&c| c).count(), correct.len()),
        n_classified: correct.len(),
        correct,
        caption_exact_match: rate(caption_hits, n_captions),
        n_captions,
    })
}
