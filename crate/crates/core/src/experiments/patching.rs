use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{all_layers, traces, ExperimentRecord, Stamp};
use crate::tasks::{Dataset, Document};
use crate::transformer::{distribution_similarity, output_distribution, Capture, Checkpoint, PatchSpec, SeqInput, Transformer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchingConfig {
    pub layers: Option<Vec<usize>>,
    /// Image pairs per class pair.
    pub per_pair: usize,
    pub seed: u64,
}

impl Default for PatchingConfig {
    fn default() -> Self {
        Self {
            layers: None,
            per_pair: 8,
            seed: 7,
        }
    }
}

/// Outcome of patching one layer across a list of (base, target) documents.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPatch {
    pub layer: usize,
    /// Similarity of the patched base prediction to the target's own prediction.
    pub similarity: Vec<f64>,
    /// Whether the patched run puts more mass on the target class token than on the base one.
    pub steered: Vec<bool>,
}

fn slot(d: &Document) -> Result<usize> {
    d.answer_pos
        .map(|p| p - 1)
        .ok_or_else(|| Error::InvalidInput("patching needs documents with an answer slot".into()))
}

/// Copies the `[EOI]` block input of `target[i]` into the run of `base[i]` at
/// each layer and reads the answer-slot distribution.
pub fn patch_pairs(model: &Transformer<f32>, base: &[&Document], target: &[&Document], layers: &[usize]) -> Result<Vec<PairPatch>> {
    if base.len() != target.len() {
        return Err(Error::Shape(format!("{} base vs {} target documents", base.len(), target.len())));
    }
    let tt = traces(model, target, Capture { residual: true, attention: false })?;
    let p_target: Vec<Vec<f64>> = tt
        .iter()
        .zip(target)
        .map(|(t, d)| output_distribution(t, slot(d)?))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(layers.len());
    for &l in layers {
        let patches: Vec<PatchSpec> = tt
            .iter()
            .zip(target)
            .zip(base)
            .map(|((t, td), bd)| {
                let v = t.residual[l].row(td.seq.n_eoi).iter().map(|&x| x as f64).collect();
                PatchSpec::single(l, bd.seq.n_eoi, v)
            })
            .collect();
        let inputs: Vec<SeqInput> = base
            .iter()
            .zip(&patches)
            .map(|(d, p)| SeqInput {
                tokens: d.ids(),
                knockout: None,
                patch: Some(p),
            })
            .collect();
        let mut similarity = Vec::with_capacity(base.len());
        let mut steered = Vec::with_capacity(base.len());
        for (i, chunk) in inputs.chunks(32).enumerate() {
            for (j, trace) in model.trace_batch(chunk, Capture::NONE)?.iter().enumerate() {
                let k = i * 32 + j;
                let (bd, td) = (base[k], target[k]);
                let q = output_distribution(trace, slot(bd)?)?;
                similarity.push(distribution_similarity(&q, &p_target[k])?);
                let want = td.ids()[slot(td)? + 1] as usize;
                let had = bd.ids()[slot(bd)? + 1] as usize;
                steered.push(q[want] > q[had]);
            }
        }
        out.push(PairPatch {
            layer: l,
            similarity,
            steered,
        });
    }
    Ok(out)
}

/// For each class pair `(base, target)` and layer: mean similarity (with a
/// normal 95% interval) and steering accuracy. Images are paired by index
/// within their class.
pub fn patching_experiment(ck: &Checkpoint, data: &Dataset, cfg: &PatchingConfig) -> Result<Vec<ExperimentRecord>> {
    let model = &ck.model;
    let layers = all_layers(model, &cfg.layers)?;
    let stamp = Stamp::new("patching", ck.hash(), &(cfg, &data.config), cfg.seed, model.config.n_layers)?;
    let mut out = Vec::new();
    for &(a, b) in &data.pairs {
        let of = |c: usize| -> Vec<&Document> { Dataset::class_docs(&data.test, c).filter(|d| d.answer_pos.is_some()).collect() };
        let (mut base, mut target) = (of(a), of(b));
        if base.len() != target.len() {
            log::warn!("pair {a}-{b}: {} vs {} images, truncating", base.len(), target.len());
        }
        let n = base.len().min(target.len()).min(cfg.per_pair);
        if n == 0 {
            return Err(Error::InvalidInput(format!("class pair {a}-{b} has no documents to patch")));
        }
        base.truncate(n);
        target.truncate(n);
        let condition = format!("pair={a}-{b}");
        for pp in patch_pairs(model, &base, &target, &layers)? {
            let m = pp.similarity.iter().sum::<f64>() / n as f64;
            let var = pp.similarity.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
            let half = 1.96 * (var / n as f64).sqrt();
            out.push(
                stamp
                    .at_layer(pp.layer, "similarity", m)
                    .group("eoi")
                    .condition(&condition)
                    .ci((m - half).max(0.0), (m + half).min(1.0)),
            );
            let steer = pp.steered.iter().filter(|&&s| s).count() as f64 / n as f64;
            out.push(stamp.at_layer(pp.layer, "steering_accuracy", steer).group("eoi").condition(&condition));
        }
    }
    Ok(out)
}
