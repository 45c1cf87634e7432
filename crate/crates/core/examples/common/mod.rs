#![allow(dead_code)]

use std::path::Path;

use gatescope::tasks::{make_dataset, Dataset, DatasetConfig};
use gatescope::training::{train, TrainConfig, TrainRun};
use gatescope::transformer::{Checkpoint, ModelConfig, Transformer};

/// Loads the checkpoint named by the first argument (a `train` output such as
/// `runs/train/checkpoints/step_001000.json`, paired with the default corpus),
/// or trains a two-layer stand-in for 1500 steps (about half a minute).
pub fn checkpoint_and_data() -> (Checkpoint, Dataset) {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let data = make_dataset(&DatasetConfig::default()).expect("corpus");
    if let Some(p) = std::env::args().nth(1) {
        let ck = Checkpoint::load(Path::new(&p)).expect("checkpoint");
        return (ck, data);
    }
    eprintln!("no checkpoint given; training a small model (pass a checkpoint header to use your own)");
    (quick_model(&data, 1500), data)
}

pub fn quick_model(data: &Dataset, steps: usize) -> Checkpoint {
    let config = ModelConfig {
        n_layers: 2,
        d_model: 64,
        d_mlp: 256,
        ..data.vocab.desk_model()
    };
    let model = Transformer::<f32>::init(config).expect("model");
    let cfg = TrainConfig {
        steps,
        eval_every: 0,
        checkpoint_every: 0,
        ..Default::default()
    };
    train(model, data, &cfg, TrainRun::default()).expect("training").checkpoint
}
