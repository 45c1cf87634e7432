use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::{ExperimentRecord, Stamp};
use crate::tasks::Dataset;
use crate::training::{evaluate, EvalOptions};
use crate::transformer::{Checkpoint, NamedKnockout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub specs: Vec<NamedKnockout>,
    /// Adds the captioning task (greedy exact match) next to classification.
    pub captions: bool,
    pub seed: u64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            specs: vec![
                NamedKnockout::None,
                NamedKnockout::TextToEoi,
                NamedKnockout::TextToImage,
                NamedKnockout::full_gate(),
            ],
            captions: true,
            seed: 7,
        }
    }
}

/// Accuracy drops under the two single-edge knockouts: a narrow gate shows a
/// large `eoi_drop` next to a small `image_drop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrowGate {
    pub checkpoint: String,
    pub n_documents: usize,
    pub chance: f64,
    pub accuracy: f64,
    pub accuracy_text_to_eoi: f64,
    pub accuracy_text_to_img: f64,
    pub eoi_drop: f64,
    pub image_drop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub records: Vec<ExperimentRecord>,
    pub narrow_gate: NarrowGate,
}

/// Test-split task metrics under each knockout, plus the narrow-gate pair.
pub fn ablation_experiment(ck: &Checkpoint, data: &Dataset, cfg: &AblationConfig) -> Result<AblationResult> {
    let model = &ck.model;
    let stamp = Stamp::new("ablation", ck.hash(), &(cfg, &data.config), cfg.seed, model.config.n_layers)?;
    let opts = EvalOptions {
        captions: cfg.captions,
        ..Default::default()
    };
    let mut records = Vec::new();
    for k in &cfg.specs {
        let m = evaluate(model, &data.vocab, &data.test, k, &opts)?;
        let acc = m.accuracy.unwrap_or(f64::NAN);
        records.push(stamp.rec("accuracy", acc).group("classification").condition(k.to_string()));
        if cfg.captions {
            let v = m.caption_exact_match.unwrap_or(f64::NAN);
            records.push(stamp.rec("exact_match", v).group("captioning").condition(k.to_string()));
        }
    }
    let accuracy = |k: &NamedKnockout| -> Result<f64> {
        Ok(evaluate(model, &data.vocab, &data.test, k, &EvalOptions::default())?
            .accuracy
            .unwrap_or(f64::NAN))
    };
    let base = accuracy(&NamedKnockout::None)?;
    let eoi = accuracy(&NamedKnockout::TextToEoi)?;
    let img = accuracy(&NamedKnockout::TextToImage)?;
    let narrow_gate = NarrowGate {
        checkpoint: ck.hash(),
        n_documents: data.test.iter().filter(|d| d.answer_pos.is_some()).count(),
        chance: 1.0 / data.config.n_classes as f64,
        accuracy: base,
        accuracy_text_to_eoi: eoi,
        accuracy_text_to_img: img,
        eoi_drop: base - eoi,
        image_drop: base - img,
    };
    Ok(AblationResult { records, narrow_gate })
}
