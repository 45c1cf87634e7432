//! Synthetic two-modality corpus.
//!
//! "Images" are sequences of discrete patch codes: each class owns a base
//! pattern and renders flip each position to a random code with probability
//! `noise_eps`. Captions are templated text ("this object is a <name>").
//! Documents come in three layouts mirroring a native multimodal model's
//! training mix: image followed by caption, caption followed by image, and
//! the classification prompt used for probing.

mod dataset;
mod document;
mod render;
mod vocab;

pub use dataset::{make_dataset, Dataset, DatasetConfig, RegimeMix};
pub use document::{build_document, DocOptions, DocRegime, Document, LossRegime};
pub use render::{generate_classes, hamming, render_image, ClassSpec};
pub use vocab::{Vocabulary, TEMPLATE};


/// Derives an independent stream seed from a base seed and a tuple of indices.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = splitmix64(z ^ splitmix64(p.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    z
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
