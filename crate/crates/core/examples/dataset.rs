//! The synthetic two-modality corpus: classes, noisy images, three document
//! layouts.
//!
//!     cargo run --release --example dataset [out_dir]

use gatescope::tasks::{hamming, make_dataset, DatasetConfig, DocRegime};

fn main() -> gatescope::Result<()> {
    let data = make_dataset(&DatasetConfig::default())?;
    let v = &data.vocab;
    println!(
        "vocabulary {} tokens: image codes {:?}, words {:?}",
        v.size(),
        v.image_range(),
        v.text_range()
    );
    println!("{} train / {} test documents, pairs {:?}", data.train.len(), data.test.len(), data.pairs);

    let min_gap = data
        .classes
        .iter()
        .flat_map(|a| data.classes.iter().filter(move |b| b.id > a.id).map(move |b| hamming(&a.pattern, &b.pattern)))
        .min()
        .unwrap();
    println!("closest pair of class patterns differs in {min_gap} of {} codes", data.config.t_img);

    for regime in DocRegime::ALL {
        let doc = data.train.iter().find(|d| d.regime == regime).unwrap();
        let text: Vec<String> = doc.ids().iter().map(|&t| v.decode(t)).collect();
        println!("\n{} (class {}, [EOI] at {}):", regime.as_str(), doc.class, doc.seq.n_eoi);
        println!("  {}", text.join(" "));
    }

    if let Some(dir) = std::env::args().nth(1) {
        data.save(std::path::Path::new(&dir))?;
        println!("\nsaved to {dir}");
    }
    Ok(())
}
