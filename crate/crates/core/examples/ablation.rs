//! Classification and captioning under each knockout, plus the narrow-gate
//! diagnostic.
//!
//!     cargo run --release --example ablation [checkpoint.json]

mod common;

use gatescope::experiments::{ablation_experiment, AblationConfig};

fn main() -> gatescope::Result<()> {
    let (ck, data) = common::checkpoint_and_data();
    let res = ablation_experiment(&ck, &data, &AblationConfig::default())?;
    for r in &res.records {
        println!("{:<24} {:<12} {:.3}", r.condition, r.group, r.value);
    }
    let g = &res.narrow_gate;
    println!(
        "\nnarrow gate: accuracy {:.3}, drop without [EOI] {:.3}, drop without image {:.3} (chance {:.3})",
        g.accuracy, g.eoi_drop, g.image_drop, g.chance
    );
    println!("{}", serde_json::to_string_pretty(g).unwrap());
    Ok(())
}
