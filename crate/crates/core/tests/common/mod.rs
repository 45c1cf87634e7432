#![allow(dead_code)]

use gatescope::tasks::{make_dataset, Dataset, DatasetConfig};
use gatescope::transformer::{ModelConfig, Real, Transformer};

/// 4 classes, 8-code images, 4 docs per class.
pub fn micro_data() -> Dataset {
    make_dataset(&DatasetConfig {
        n_classes: 4,
        n_per_class: 8,
        t_img: 8,
        n_image_codes: 16,
        split: [0.5, 0.5],
        ..Default::default()
    })
    .unwrap()
}

pub fn micro_config(data: &Dataset) -> ModelConfig {
    ModelConfig {
        n_layers: 2,
        n_heads: 2,
        d_model: 16,
        d_mlp: 32,
        ..data.vocab.desk_model()
    }
}

pub fn micro_model<F: Real>(data: &Dataset) -> Transformer<F> {
    Transformer::init(micro_config(data)).unwrap()
}
