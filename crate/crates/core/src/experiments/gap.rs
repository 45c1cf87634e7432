use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{all_layers, traces, ExperimentRecord, Stamp};
use crate::geometry::{
    adp_cluster, build_knn_graph, cosine_gap, estimate_intrinsic_dimension, estimate_knn_density, homogeneity,
    AdpParams, IdMethod, PointSet,
};
use crate::tasks::Dataset;
use crate::transformer::{Capture, Checkpoint, Modality};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModalityGapConfig {
    /// Residual-stream indices; `None` means `0..=n_layers`.
    pub layers: Option<Vec<usize>>,
    pub n_docs: usize,
    /// Tokens sampled per modality.
    pub max_points: usize,
    pub n_pairs: usize,
    pub gride_k: usize,
    pub k_density: usize,
    pub z: f64,
    pub min_size: usize,
    pub seed: u64,
}

impl Default for ModalityGapConfig {
    fn default() -> Self {
        Self {
            layers: None,
            n_docs: 200,
            max_points: 300,
            n_pairs: 2000,
            gride_k: 16,
            k_density: 16,
            z: 1.65,
            min_size: 20,
            seed: 7,
        }
    }
}

/// Per layer: cosine similarity between image and text token states, and
/// how well density-peak clusters of the pooled states align with modality.
pub fn modality_gap_experiment(ck: &Checkpoint, data: &Dataset, cfg: &ModalityGapConfig) -> Result<Vec<ExperimentRecord>> {
    let model = &ck.model;
    let layers = all_layers(model, &cfg.layers)?;
    let stamp = Stamp::new("modality_gap", ck.hash(), &(cfg, &data.config), cfg.seed, model.config.n_layers)?;
    let docs: Vec<_> = data.test.iter().take(cfg.n_docs).collect();

    let mut sites = [Vec::new(), Vec::new()];
    for (di, d) in docs.iter().enumerate() {
        for (p, m) in d.seq.modality.iter().enumerate() {
            match m {
                Modality::Image => sites[0].push((di, p)),
                Modality::Text => sites[1].push((di, p)),
                Modality::Special => {}
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for s in &mut sites {
        if s.is_empty() {
            return Err(Error::InvalidInput("corpus lacks one of the two modalities".into()));
        }
        if s.len() > cfg.max_points {
            let mut keep = sample(&mut rng, s.len(), cfg.max_points).into_vec();
            keep.sort_unstable();
            *s = keep.into_iter().map(|i| s[i]).collect();
        }
    }
    let n_total = sites[0].len() + sites[1].len();
    if n_total <= cfg.k_density.max(2 * cfg.gride_k) {
        return Err(Error::InvalidInput(format!(
            "{n_total} points are too few for k_density {} and gride k {}",
            cfg.k_density, cfg.gride_k
        )));
    }
    let modality: Vec<&str> = std::iter::repeat_n("image", sites[0].len())
        .chain(std::iter::repeat_n("text", sites[1].len()))
        .collect();

    let traces = traces(model, &docs, Capture { residual: true, attention: false })?;
    let d = model.config.d_model;
    let gather = |layer: usize, s: &[(usize, usize)]| -> Result<PointSet> {
        let mut a = Array2::<f64>::zeros((s.len(), d));
        for (r, &(di, p)) in s.iter().enumerate() {
            for (dst, &v) in a.row_mut(r).iter_mut().zip(traces[di].residual[layer].row(p)) {
                *dst = v as f64;
            }
        }
        PointSet::new(a)
    };

    let mut out = Vec::new();
    for &l in &layers {
        let img = gather(l, &sites[0])?;
        let txt = gather(l, &sites[1])?;
        let gap = cosine_gap(&img, &txt, cfg.n_pairs, cfg.seed.wrapping_add(l as u64))?;
        out.push(stamp.at_layer(l, "cosine_median", gap.median).group("image_text").ci(gap.q25, gap.q75));

        let pooled = PointSet::new(ndarray::concatenate![ndarray::Axis(0), img.data().view(), txt.data().view()])?;
        let method = IdMethod::Gride { k: cfg.gride_k };
        let graph = build_knn_graph(&pooled, cfg.k_density.max(method.required_k_max()))?;
        let id = estimate_intrinsic_dimension(&graph, method)?;
        let density = estimate_knn_density(&graph, cfg.k_density, id)?;
        let clusters = adp_cluster(&graph, &density, AdpParams { z: cfg.z, min_size: cfg.min_size })?;
        let h = homogeneity(&clusters.labels, &modality)?;
        out.push(stamp.at_layer(l, "intrinsic_dimension", id).group("pooled"));
        out.push(stamp.at_layer(l, "n_clusters", clusters.n_clusters() as f64).group("pooled"));
        out.push(stamp.at_layer(l, "homogeneity", h).group("pooled"));
    }
    Ok(out)
}
