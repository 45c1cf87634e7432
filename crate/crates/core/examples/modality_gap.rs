//! Per-layer geometry of image and text tokens: cosine gap, intrinsic
//! dimension, and whether density peaks split the two modalities.
//!
//!     cargo run --release --example modality_gap [checkpoint.json]

mod common;

use gatescope::experiments::{modality_gap_experiment, ModalityGapConfig};

fn main() -> gatescope::Result<()> {
    let (ck, data) = common::checkpoint_and_data();
    let recs = modality_gap_experiment(&ck, &data, &ModalityGapConfig::default())?;
    println!("{:>5} {:>9} {:>7} {:>9} {:>12}", "layer", "cos(i,t)", "ID", "clusters", "homogeneity");
    for l in 0..=ck.model.config.n_layers {
        let get = |m: &str| recs.iter().find(|r| r.layer == Some(l) && r.metric == m).map_or(f64::NAN, |r| r.value);
        println!(
            "{l:>5} {:>9.3} {:>7.2} {:>9} {:>12.3}",
            get("cosine_median"),
            get("intrinsic_dimension"),
            get("n_clusters"),
            get("homogeneity")
        );
    }
    Ok(())
}
