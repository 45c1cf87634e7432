use std::path::PathBuf;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{all_layers, answer_docs, traces, ExperimentRecord, Stamp};
use crate::geometry::{neighborhood_overlap, GroundTruthRef, PointSet};
use crate::tasks::{Dataset, Document};
use crate::transformer::{Capture, Checkpoint, ForwardTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub layers: Option<Vec<usize>>,
    pub k: usize,
    pub n_docs: usize,
    /// Optional second reference: one vector per probed document, as a saved [`PointSet`].
    pub reference: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            layers: None,
            k: 10,
            n_docs: 400,
            reference: None,
            seed: 7,
        }
    }
}

/// Position groups probed per document: name and the positions averaged over.
fn groups(d: &Document) -> Vec<(&'static str, Vec<usize>)> {
    let e = d.seq.n_eoi;
    let span = d.seq.image_span();
    vec![
        ("eoi", vec![e]),
        ("last_image", vec![e - 1]),
        ("internal_image", (span.start..e - 1).collect()),
        ("answer_slot", vec![d.answer_pos.expect("answer docs") - 1]),
    ]
}

fn states(traces: &[ForwardTrace<f32>], layer: usize, pos: usize) -> Result<PointSet> {
    let d = traces[0].residual[layer].ncols();
    let mut a = Array2::<f64>::zeros((traces.len(), d));
    for (mut row, t) in a.rows_mut().into_iter().zip(traces) {
        row.iter_mut().zip(t.residual[layer].row(pos)).for_each(|(x, &v)| *x = v as f64);
    }
    PointSet::new(a)
}

/// Neighborhood overlap of token states with class labels (and optionally an
/// external embedding), per layer and position group. Groups spanning several
/// positions report the mean over positions.
pub fn semantic_probe_experiment(ck: &Checkpoint, data: &Dataset, cfg: &ProbeConfig) -> Result<Vec<ExperimentRecord>> {
    let model = &ck.model;
    let layers = all_layers(model, &cfg.layers)?;
    let stamp = Stamp::new("semantic_probe", ck.hash(), &(cfg, &data.config), cfg.seed, model.config.n_layers)?;
    let docs = answer_docs(&data.test, cfg.n_docs);
    if docs.len() <= cfg.k {
        return Err(Error::InvalidInput(format!("{} documents cannot support k = {}", docs.len(), cfg.k)));
    }
    let layout = groups(docs[0]);
    if docs.iter().any(|d| groups(d) != layout) {
        return Err(Error::InvalidInput("probed documents differ in layout".into()));
    }
    let labels: Vec<String> = docs.iter().map(|d| d.class.to_string()).collect();
    let mut shuffled = labels.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut refs = vec![
        ("labels", GroundTruthRef::Labels(labels)),
        ("shuffled_labels", GroundTruthRef::Labels(shuffled)),
    ];
    if let Some(path) = &cfg.reference {
        let points = PointSet::load(path)?;
        if points.len() != docs.len() {
            return Err(Error::Shape(format!(
                "reference {} has {} vectors for {} probed documents",
                path.display(),
                points.len(),
                docs.len()
            )));
        }
        refs.push(("reference", GroundTruthRef::Points(points)));
    }

    let traces = traces(model, &docs, Capture { residual: true, attention: false })?;
    let mut out = Vec::new();
    for &l in &layers {
        for (group, positions) in &layout {
            for (name, reference) in &refs {
                let mut chis = Vec::with_capacity(positions.len());
                for &p in positions {
                    chis.push(neighborhood_overlap(&states(&traces, l, p)?, reference, cfg.k)?.chi);
                }
                let mean = chis.iter().sum::<f64>() / chis.len() as f64;
                let mut r = stamp.at_layer(l, "chi", mean).group(*group).condition(*name);
                if chis.len() > 1 {
                    let lo = chis.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = chis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    r = r.ci(lo, hi);
                }
                out.push(r);
            }
        }
    }
    Ok(out)
}
