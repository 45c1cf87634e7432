use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::{ExperimentRecord, Stamp};
use crate::tasks::Dataset;
use crate::training::{evaluate, train, EvalOptions, OptimConfig, TrainConfig, TrainRun};
use crate::transformer::{Checkpoint, NamedKnockout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub eval_every: usize,
    pub optim: OptimConfig,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            batch_size: 16,
            eval_every: 50,
            optim: OptimConfig {
                lr0: 3e-4,
                ..Default::default()
            },
            seed: 7,
        }
    }
}

impl FinetuneConfig {
    pub fn train_config(&self, eoi_mask: bool) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            steps: self.steps,
            optim: self.optim,
            eoi_mask,
            seed: self.seed,
            eval_every: self.eval_every,
            checkpoint_every: 0,
            eval_knockouts: vec![NamedKnockout::None, NamedKnockout::TextToEoi],
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct FinetuneResult {
    pub records: Vec<ExperimentRecord>,
    pub masked: Checkpoint,
    pub unmasked: Checkpoint,
}

/// Fine-tunes the base model twice, with and without the text-to-`[EOI]`
/// training mask, and tracks accuracy with and without the text-to-`[EOI]`
/// knockout. Curves are named `<run>/<knockout>`.
pub fn finetune_experiment(base: &Checkpoint, data: &Dataset, cfg: &FinetuneConfig) -> Result<FinetuneResult> {
    let stamp = Stamp::new("finetune", base.hash(), &(cfg, &data.config), cfg.seed, base.model.config.n_layers)?;
    let mut records = Vec::new();
    let mut start = Vec::new();
    for k in [NamedKnockout::None, NamedKnockout::TextToEoi] {
        let acc = evaluate(&base.model, &data.vocab, &data.test, &k, &EvalOptions::default())?
            .accuracy
            .unwrap_or(f64::NAN);
        start.push((k.to_string(), acc));
    }
    let mut finals = Vec::new();
    for (run, mask) in [("masked", true), ("unmasked", false)] {
        for (k, acc) in &start {
            records.push(stamp.rec("accuracy", *acc).condition(format!("{run}/{k}")).step(0).group("classification"));
        }
        let out = train(base.model.clone(), data, &cfg.train_config(mask), TrainRun::default())?;
        for m in out.metrics.iter().filter(|m| m.split == "test" && m.metric == "accuracy") {
            records.push(
                stamp
                    .rec("accuracy", m.value)
                    .condition(format!("{run}/{}", m.knockout))
                    .step(m.step)
                    .group("classification"),
            );
        }
        finals.push(out.checkpoint);
    }
    let unmasked = finals.pop().expect("two runs");
    let masked = finals.pop().expect("two runs");
    Ok(FinetuneResult {
        records,
        masked,
        unmasked,
    })
}
