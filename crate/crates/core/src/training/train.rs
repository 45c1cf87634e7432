use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::tasks::{derive_seed, Dataset, LossRegime};
use crate::training::loss::{loss_and_grad, packed_targets};
use crate::training::{evaluate, AdamW, EvalOptions, Example, OptimConfig};
use crate::transformer::{backward, Checkpoint, NamedKnockout, SeqInput, Transformer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub regime: LossRegime,
    pub batch_size: usize,
    pub steps: usize,
    #[serde(flatten)]
    pub optim: OptimConfig,
    /// Block every text query from the `[EOI]` key at all layers during training.
    pub eoi_mask: bool,
    pub seed: u64,
    pub log_every: usize,
    pub eval_every: usize,
    /// Zero disables intermediate checkpoints; the final one is always written.
    pub checkpoint_every: usize,
    /// Knockouts evaluated on the test split at every eval.
    pub eval_knockouts: Vec<NamedKnockout>,
    pub eval_captions: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            regime: LossRegime::Native,
            batch_size: 16,
            steps: 1000,
            optim: OptimConfig {
                lr0: 1e-3,
                warmup_steps: 50,
                ..Default::default()
            },
            eoi_mask: false,
            seed: 7,
            log_every: 50,
            eval_every: 500,
            checkpoint_every: 1000,
            eval_knockouts: vec![NamedKnockout::None],
            eval_captions: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optim.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }

    /// The knockout every training forward applies.
    pub fn training_knockout(&self) -> NamedKnockout {
        if self.eoi_mask {
            NamedKnockout::TextToEoi
        } else {
            NamedKnockout::None
        }
    }
}

/// One line of the metric log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: usize,
    pub split: String,
    pub metric: String,
    pub knockout: String,
    pub value: f64,
}

impl MetricRow {
    pub const CSV_HEADER: &'static str = "step,split,metric,knockout,value";

    pub fn csv(&self) -> String {
        format!("{},{},{},{},{}", self.step, self.split, self.metric, self.knockout, self.value)
    }

    pub fn parse_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::InvalidInput(format!("malformed metric line {line:?}"));
        if f.len() != 5 {
            return Err(bad());
        }
        Ok(Self {
            step: f[0].parse().map_err(|_| bad())?,
            split: f[1].into(),
            metric: f[2].into(),
            knockout: f[3].into(),
            value: f[4].parse().map_err(|_| bad())?,
        })
    }
}

/// Where a run writes and what it resumes from.
#[derive(Debug, Clone, Default)]
pub struct TrainRun {
    pub out_dir: Option<PathBuf>,
    pub resume: Option<Checkpoint>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub metrics: Vec<MetricRow>,
    pub checkpoints: Vec<PathBuf>,
    /// Batch loss at the first and last step run.
    pub first_loss: Option<f64>,
    pub last_loss: Option<f64>,
}

fn check_compatible(model: &Transformer<f32>, dataset: &Dataset) -> Result<()> {
    let c = &model.config;
    let v = &dataset.vocab;
    if c.vocab_size != v.size() || c.image_tokens != v.image_range() || c.text_tokens != v.text_range() {
        return Err(Error::Config(format!(
            "model vocab ({} ids, image {:?}, text {:?}) does not match the corpus ({} ids, image {:?}, text {:?})",
            c.vocab_size,
            c.image_tokens,
            c.text_tokens,
            v.size(),
            v.image_range(),
            v.text_range()
        )));
    }
    Ok(())
}

fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut s = String::from(MetricRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    io::write_bytes(path, s.as_bytes())
}

fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    io::read_string(path)?
        .lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(MetricRow::parse_csv)
        .collect()
}

pub fn checkpoint_path(dir: &Path, step: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("step_{step:06}.json"))
}

/// Trains with AdamW on batches drawn uniformly from the training split.
///
/// The metric log records the batch loss of each logged step and test
/// metrics at the eval cadence.
///
/// The batch at step `s` depends only on `(seed, s)`, and the optimizer state
/// travels with checkpoints, so a resumed run reproduces an uninterrupted one.
pub fn train(model: Transformer<f32>, dataset: &Dataset, config: &TrainConfig, run: TrainRun) -> Result<TrainOutput> {
    config.validate()?;
    check_compatible(&model, dataset)?;
    if dataset.train.is_empty() && config.steps > 0 {
        return Err(Error::InvalidInput("training split is empty".into()));
    }
    let metrics_path = run.out_dir.as_ref().map(|d| d.join("metrics.csv"));
    let (mut model, start, mut opt, mut metrics) = match run.resume {
        Some(ck) => {
            check_compatible(&ck.model, dataset)?;
            let opt = match ck.optimizer {
                Some(state) => AdamW::with_state(config.optim, &ck.model.params, state),
                None => AdamW::new(config.optim, &ck.model.params),
            };
            let mut rows = match &metrics_path {
                Some(p) if p.exists() => read_metrics(p)?,
                _ => Vec::new(),
            };
            rows.retain(|r| r.step <= ck.step);
            (ck.model, ck.step, opt, rows)
        }
        None => {
            let opt = AdamW::new(config.optim, &model.params);
            (model, 0, opt, Vec::new())
        }
    };

    let train_knockout = config.training_knockout();
    let masks: Vec<Vec<bool>> = dataset
        .train
        .iter()
        .map(|d| d.loss_mask_for(config.regime, &dataset.vocab))
        .collect();
    let mut checkpoints = Vec::new();
    let (mut first_loss, mut last_loss) = (None, None);

    let snapshot = |model: &Transformer<f32>, opt: &AdamW, step: usize| Checkpoint {
        model: model.clone(),
        step,
        seed: config.seed,
        optimizer: Some(opt.state.clone()),
    };

    for step in start..config.steps {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[step as u64]));
        let batch: Vec<Example> = (0..config.batch_size)
            .map(|_| {
                let i = rng.gen_range(0..dataset.train.len());
                let d = &dataset.train[i];
                let k = train_knockout.resolve(&d.seq);
                Example {
                    ids: d.seq.ids.clone(),
                    mask: masks[i].clone(),
                    knockout: (!k.is_empty()).then_some(k),
                }
            })
            .collect();
        let inputs: Vec<SeqInput> = batch.iter().map(Example::input).collect();
        let cache = model.forward_cache(&inputs)?;
        let (targets, mask) = packed_targets(&batch);
        let (loss, dlogits) = loss_and_grad(cache.logits.view(), &targets, &mask)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { step, loss });
        }
        let grad = backward(&model, &cache, &dlogits)?;
        let lr = config.optim.lr(step, config.steps);
        let norm = opt.step(&mut model.params, &grad, lr)?;
        if !norm.is_finite() {
            return Err(Error::Divergence { step, loss: norm });
        }
        first_loss.get_or_insert(loss);
        last_loss = Some(loss);

        let done = step + 1;
        if config.log_every > 0 && (done % config.log_every == 0 || done == config.steps) {
            log::info!("step {done}/{} loss {loss:.4} lr {lr:.2e}", config.steps);
            metrics.push(MetricRow {
                step: done,
                split: "train".into(),
                metric: "loss".into(),
                knockout: "none".into(),
                value: loss,
            });
        }
        if config.eval_every > 0 && (done % config.eval_every == 0 || done == config.steps) {
            let opts = EvalOptions {
                captions: config.eval_captions,
                ..Default::default()
            };
            for k in &config.eval_knockouts {
                let m = evaluate(&model, &dataset.vocab, &dataset.test, k, &opts)?;
                let mut push = |metric: &str, v: Option<f64>| {
                    if let Some(value) = v {
                        metrics.push(MetricRow {
                            step: done,
                            split: "test".into(),
                            metric: metric.into(),
                            knockout: k.to_string(),
                            value,
                        });
                    }
                };
                push("accuracy", m.accuracy);
                push("caption_exact_match", m.caption_exact_match);
                log::info!("step {done} test accuracy [{k}] {:?}", m.accuracy);
            }
        }
        if let Some(dir) = &run.out_dir {
            if config.checkpoint_every > 0 && done % config.checkpoint_every == 0 && done != config.steps {
                let path = checkpoint_path(dir, done);
                snapshot(&model, &opt, done).save(&path)?;
                checkpoints.push(path);
            }
            if let Some(p) = &metrics_path {
                if config.log_every > 0 && done % config.log_every == 0 {
                    write_metrics(p, &metrics)?;
                }
            }
        }
    }

    let last_step = config.steps.max(start);
    let checkpoint = snapshot(&model, &opt, last_step);
    if let Some(dir) = &run.out_dir {
        let path = checkpoint_path(dir, last_step);
        checkpoint.save(&path)?;
        checkpoints.push(path);
        if let Some(p) = &metrics_path {
            write_metrics(p, &metrics)?;
        }
    }
    Ok(TrainOutput {
        checkpoint,
        metrics,
        checkpoints,
        first_loss,
        last_loss,
    })
}
