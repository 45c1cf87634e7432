//! Where text tokens look in the image prefix, layer by layer.
//!
//!     cargo run --release --example attention_profile [checkpoint.json]

mod common;

use gatescope::experiments::{attention_profile_experiment, AttentionProfileConfig};

fn main() -> gatescope::Result<()> {
    let (ck, data) = common::checkpoint_and_data();
    let recs = attention_profile_experiment(&ck, &data, &AttentionProfileConfig::default())?;
    for l in 0..ck.model.config.n_layers {
        let mut rows: Vec<_> = recs.iter().filter(|r| r.layer == Some(l)).collect();
        rows.sort_by(|a, b| b.value.total_cmp(&a.value));
        let top: Vec<String> = rows.iter().take(4).map(|r| format!("{} {:.3}", r.group, r.value)).collect();
        let eoi = rows.iter().find(|r| r.group == "eoi").unwrap().value;
        println!("layer {l}: [EOI] {eoi:.3} | top {}", top.join(", "));
    }
    Ok(())
}
