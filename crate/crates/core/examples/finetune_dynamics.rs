//! Fine-tunes with and without the text-to-[EOI] mask and tracks accuracy
//! with and without the matching knockout.
//!
//!     cargo run --release --example finetune_dynamics [checkpoint.json] [steps]

mod common;

use gatescope::experiments::{finetune_experiment, FinetuneConfig};

fn main() -> gatescope::Result<()> {
    let (ck, data) = common::checkpoint_and_data();
    let steps = std::env::args().nth(2).map_or(100, |s| s.parse().expect("steps"));
    let cfg = FinetuneConfig {
        steps,
        eval_every: (steps / 4).max(1),
        ..Default::default()
    };
    let res = finetune_experiment(&ck, &data, &cfg)?;
    let curves = ["masked/none", "masked/text-to-eoi", "unmasked/none", "unmasked/text-to-eoi"];
    println!("{:>6}{}", "step", curves.map(|c| format!("{c:>22}")).join(""));
    let mut steps: Vec<usize> = res.records.iter().filter_map(|r| r.step).collect();
    steps.sort_unstable();
    steps.dedup();
    for s in steps {
        let row: Vec<String> = curves
            .iter()
            .map(|c| {
                let v = res.records.iter().find(|r| r.step == Some(s) && r.condition == *c).map_or(f64::NAN, |r| r.value);
                format!("{v:>22.3}")
            })
            .collect();
        println!("{s:>6}{}", row.join(""));
    }
    Ok(())
}
