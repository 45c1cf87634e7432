//! Attention knockout: named text-to-image and text-to-[EOI] blocks, a
//! hand-built per-layer edge set, and generation under a knockout.
//!
//!     cargo run --release --example knockout [checkpoint.json]

mod common;

use gatescope::tasks::DocRegime;
use gatescope::training::{evaluate, EvalOptions};
use gatescope::transformer::{generate, Capture, DecodeMode, KnockoutEdge, KnockoutSpec, LayerSel, NamedKnockout, TokenSequence};

fn main() -> gatescope::Result<()> {
    let (ck, data) = common::checkpoint_and_data();
    let model = &ck.model;

    for name in ["none", "text-to-eoi", "text-to-img", "text-to-img+text-to-eoi"] {
        let k: NamedKnockout = name.parse()?;
        let m = evaluate(model, &data.vocab, &data.test, &k, &EvalOptions::default())?;
        println!("{name:<26} accuracy {:.3} over {} documents", m.accuracy.unwrap(), m.n_classified);
    }

    // Text queries may read the image only in the last layer.
    let doc = data.test.iter().find(|d| d.regime == DocRegime::ClassificationPrompt).unwrap();
    let n = model.config.n_layers;
    let spec = KnockoutSpec {
        edges: vec![KnockoutEdge {
            layers: LayerSel::Only((0..n - 1).collect()),
            queries: doc.seq.text_positions().collect(),
            keys: doc.seq.image_span().chain([doc.seq.n_eoi]).collect(),
        }],
    };
    let slot = doc.answer_pos.unwrap() - 1;
    for (label, ko) in [("intact", None), ("last layer only", Some(&spec))] {
        let t = model.forward(&doc.seq.ids, ko, None, Capture::NONE)?;
        let row = t.logits.row(slot);
        let best = (0..data.config.n_classes)
            .max_by(|&a, &b| row[data.vocab.class_token(a) as usize].total_cmp(&row[data.vocab.class_token(b) as usize]))
            .unwrap();
        println!("{label:<16} predicts class {best} (true {})", doc.class);
    }

    let cap = data.test.iter().find(|d| d.regime == DocRegime::ImageFirstCaption).unwrap();
    let cut = cap.seq.n_eoi + 1;
    let prompt = TokenSequence {
        ids: cap.seq.ids[..cut].to_vec(),
        modality: cap.seq.modality[..cut].to_vec(),
        n_eoi: cap.seq.n_eoi,
    };
    let max_new = cap.seq.len() - cut - 1;
    for k in [NamedKnockout::None, NamedKnockout::full_gate()] {
        let out = generate(model, &prompt, max_new, DecodeMode::Greedy, Some(&k), None)?;
        let words: Vec<String> = out.ids[cut..].iter().map(|&t| data.vocab.decode(t)).collect();
        println!("caption [{k}]: {}", words.join(" "));
    }
    Ok(())
}
