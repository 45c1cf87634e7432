use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{traces, ExperimentRecord, Stamp};
use crate::tasks::{Dataset, DocRegime};
use crate::transformer::{cross_modal_attention_profile, Capture, Checkpoint, ForwardTrace, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttentionProfileConfig {
    /// Positions whose layer-averaged share exceeds this are reported individually.
    pub threshold: f64,
    pub n_docs: usize,
    pub seed: u64,
}

impl Default for AttentionProfileConfig {
    fn default() -> Self {
        Self {
            threshold: 0.01,
            n_docs: 200,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub layer: usize,
    /// `eoi`, `pos_<j>`, or `internal_image` for the aggregated remainder.
    pub group: String,
    pub share: f64,
}

/// Averages the text-to-prefix attention profile over traces sharing one
/// `[EOI]` position and splits it into individual positions and the rest.
pub fn profile_rows<F: Real>(traces: &[ForwardTrace<F>], n_eoi: usize, threshold: f64) -> Result<Vec<ProfileRow>> {
    let first = traces.first().ok_or_else(|| Error::InvalidInput("no traces".into()))?;
    let n_layers = first.attention.len();
    let mut mean = vec![vec![0.0; n_eoi + 1]; n_layers];
    for t in traces {
        for (acc, row) in mean.iter_mut().zip(cross_modal_attention_profile(t, n_eoi)?) {
            acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
        }
    }
    let n = traces.len() as f64;
    mean.iter_mut().flatten().for_each(|v| *v /= n);
    let individual: Vec<usize> = (0..=n_eoi)
        .filter(|&j| j == n_eoi || mean.iter().map(|r| r[j]).sum::<f64>() / n_layers as f64 > threshold)
        .collect();
    let mut rows = Vec::new();
    for (l, shares) in mean.iter().enumerate() {
        for &j in &individual {
            let group = if j == n_eoi { "eoi".to_string() } else { format!("pos_{j:02}") };
            rows.push(ProfileRow { layer: l, group, share: shares[j] });
        }
        let rest = (0..=n_eoi)
            .filter(|j| !individual.contains(j))
            .fold(0.0, |acc, j| acc + shares[j]);
        rows.push(ProfileRow {
            layer: l,
            group: "internal_image".into(),
            share: rest,
        });
    }
    Ok(rows)
}

/// Where text tokens of classification prompts read from, per layer.
pub fn attention_profile_experiment(ck: &Checkpoint, data: &Dataset, cfg: &AttentionProfileConfig) -> Result<Vec<ExperimentRecord>> {
    let model = &ck.model;
    let stamp = Stamp::new("attention_profile", ck.hash(), &(cfg, &data.config), cfg.seed, model.config.n_layers)?;
    let docs: Vec<_> = data
        .test
        .iter()
        .filter(|d| d.regime == DocRegime::ClassificationPrompt)
        .take(cfg.n_docs)
        .collect();
    let n_eoi = docs
        .first()
        .ok_or_else(|| Error::InvalidInput("no classification prompts in the test split".into()))?
        .seq
        .n_eoi;
    if docs.iter().any(|d| d.seq.n_eoi != n_eoi) {
        return Err(Error::InvalidInput("classification prompts differ in layout".into()));
    }
    let traces = traces(model, &docs, Capture { residual: false, attention: true })?;
    Ok(profile_rows(&traces, n_eoi, cfg.threshold)?
        .into_iter()
        .map(|r| stamp.at_layer(r.layer, "attention_share", r.share).group(r.group))
        .collect())
}
