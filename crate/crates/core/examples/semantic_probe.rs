//! How much class information each token position carries, per layer.
//!
//!     cargo run --release --example semantic_probe [checkpoint.json]

mod common;

use gatescope::experiments::{semantic_probe_experiment, ProbeConfig};

fn main() -> gatescope::Result<()> {
    let (ck, data) = common::checkpoint_and_data();
    let recs = semantic_probe_experiment(&ck, &data, &ProbeConfig::default())?;
    let groups = ["eoi", "last_image", "internal_image", "answer_slot"];
    println!("{:>5} {}", "layer", groups.map(|g| format!("{g:>15}")).join(""));
    for l in 0..=ck.model.config.n_layers {
        let row: Vec<String> = groups
            .iter()
            .map(|g| {
                let v = recs
                    .iter()
                    .find(|r| r.layer == Some(l) && r.group == *g && r.condition == "labels")
                    .map_or(f64::NAN, |r| r.value);
                format!("{v:>15.3}")
            })
            .collect();
        println!("{l:>5} {}", row.join(""));
    }
    let shuffled: Vec<f64> = recs.iter().filter(|r| r.condition == "shuffled_labels").map(|r| r.value).collect();
    println!("shuffled-label control: mean chi {:.3}", shuffled.iter().sum::<f64>() / shuffled.len() as f64);
    Ok(())
}
