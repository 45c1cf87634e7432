//! Activation patching at [EOI]: copy one image's [EOI] state into another
//! class's document and check what the answer slot predicts.
//!
//!     cargo run --release --example patching [checkpoint.json]

mod common;

use gatescope::experiments::{patch_pairs, patching_experiment, PatchingConfig};

fn main() -> gatescope::Result<()> {
    let (ck, data) = common::checkpoint_and_data();
    let model = &ck.model;
    let layers: Vec<usize> = (0..=model.config.n_layers).collect();

    let (a, b) = data.pairs[0];
    let docs = |c: usize| -> Vec<_> { data.test.iter().filter(|d| d.class == c && d.answer_pos.is_some()).take(4).collect() };
    let (base, target) = (docs(a), docs(b));
    let n = base.len().min(target.len());
    println!("pair {a}-{b}, {n} documents");
    for p in patch_pairs(model, &base[..n], &target[..n], &layers)? {
        let steer = p.steered.iter().filter(|&&s| s).count();
        let sim = p.similarity.iter().sum::<f64>() / n as f64;
        println!("layer {}: similarity {sim:.3}, steered {steer}/{n}", p.layer);
    }

    let recs = patching_experiment(&ck, &data, &PatchingConfig { per_pair: 2, ..Default::default() })?;
    for l in &layers {
        let v: Vec<f64> = recs
            .iter()
            .filter(|r| r.layer == Some(*l) && r.metric == "steering_accuracy")
            .map(|r| r.value)
            .collect();
        println!("all pairs, layer {l}: mean steering {:.3}", v.iter().sum::<f64>() / v.len() as f64);
    }
    Ok(())
}
