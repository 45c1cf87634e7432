//! Analysis pipelines. Each takes a checkpoint, a corpus and a config and
//! returns a flat list of [`ExperimentRecord`]s.

mod ablation;
mod finetune;
mod gap;
mod patching;
mod probe;
mod profile;
mod records;

pub use ablation::{ablation_experiment, AblationConfig, AblationResult, NarrowGate};
pub use finetune::{finetune_experiment, FinetuneConfig, FinetuneResult};
pub use gap::{modality_gap_experiment, ModalityGapConfig};
pub use patching::{patch_pairs, patching_experiment, PairPatch, PatchingConfig};
pub use probe::{semantic_probe_experiment, ProbeConfig};
pub use profile::{attention_profile_experiment, profile_rows, AttentionProfileConfig, ProfileRow};
pub use records::{sort_records, write_records, ExperimentRecord, OutputFile, Stamp};

use crate::error::Result;
use crate::tasks::Document;
use crate::transformer::{Capture, ForwardTrace, SeqInput, Transformer};

const CHUNK: usize = 32;

/// Unintervened traces of `docs`, computed in chunks.
pub(crate) fn traces(model: &Transformer<f32>, docs: &[&Document], capture: Capture) -> Result<Vec<ForwardTrace<f32>>> {
    let mut out = Vec::with_capacity(docs.len());
    for chunk in docs.chunks(CHUNK) {
        let inputs: Vec<SeqInput> = chunk.iter().map(|d| SeqInput::plain(d.ids())).collect();
        out.extend(model.trace_batch(&inputs, capture)?);
    }
    Ok(out)
}

/// Documents that end with a class-name answer after the image.
pub(crate) fn answer_docs(docs: &[Document], limit: usize) -> Vec<&Document> {
    docs.iter().filter(|d| d.answer_pos.is_some()).take(limit).collect()
}

pub(crate) fn all_layers(model: &Transformer<f32>, layers: &Option<Vec<usize>>) -> Result<Vec<usize>> {
    let n = model.config.n_layers;
    match layers {
        None => Ok((0..=n).collect()),
        Some(ls) => {
            if let Some(bad) = ls.iter().find(|&&l| l > n) {
                return Err(crate::Error::Config(format!("layer {bad} outside 0..={n}")));
            }
            Ok(ls.clone())
        }
    }
}
