//! Finite-difference check of the hand-written backward pass, including a
//! knocked-out sequence.
//!
//!     cargo run --release --example grad_check

use gatescope::tasks::{make_dataset, DatasetConfig, LossRegime};
use gatescope::training::{grad_check, Example};
use gatescope::transformer::{ModelConfig, NamedKnockout, Transformer};

fn main() -> gatescope::Result<()> {
    let data = make_dataset(&DatasetConfig {
        n_classes: 4,
        n_per_class: 4,
        t_img: 8,
        n_image_codes: 16,
        ..Default::default()
    })?;
    let model = Transformer::<f64>::init(ModelConfig {
        n_layers: 2,
        n_heads: 2,
        d_model: 16,
        d_mlp: 32,
        ..data.vocab.desk_model()
    })?;
    let batch: Vec<Example> = data.train[..4]
        .iter()
        .enumerate()
        .map(|(i, d)| Example {
            ids: d.seq.ids.clone(),
            mask: d.loss_mask_for(LossRegime::Native, &data.vocab),
            knockout: (i % 2 == 1).then(|| NamedKnockout::full_gate().resolve(&d.seq)),
        })
        .collect();
    for eps in [1e-3, 1e-4, 1e-5, 1e-6] {
        let r = grad_check(&model, &batch, eps, 300, 0)?;
        println!("epsilon {eps:.0e}: max relative error {:.2e} over {} parameters", r.max_rel_err, r.samples.len());
    }
    Ok(())
}
