//! Trains the desk model on the default corpus and reports the loss curve.
//!
//!     cargo run --release --example train_baseline [steps] [out_dir]
//!
//! The pinned baseline is 1000 steps (about five minutes on one core).

use std::path::PathBuf;

use gatescope::tasks::{make_dataset, DatasetConfig};
use gatescope::training::{train, TrainConfig, TrainRun};
use gatescope::transformer::Transformer;

fn main() -> gatescope::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let steps = args.next().map_or(1000, |s| s.parse().expect("steps"));
    let out_dir = args.next().map(PathBuf::from);

    let data = make_dataset(&DatasetConfig::default())?;
    let model = Transformer::<f32>::init(data.vocab.desk_model())?;
    println!("{} parameters", model.params.data.len());
    let cfg = TrainConfig {
        steps,
        eval_every: (steps / 4).max(1),
        ..Default::default()
    };
    let out = train(model, &data, &cfg, TrainRun { out_dir, resume: None })?;
    if let (Some(a), Some(b)) = (out.first_loss, out.last_loss) {
        println!("loss {a:.3} -> {b:.3}");
    }
    for row in out.metrics.iter().filter(|r| r.metric == "accuracy") {
        println!("step {:>5}: held-out accuracy {:.3}", row.step, row.value);
    }
    Ok(())
}
