use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasks::{render_image, ClassSpec, Vocabulary};
use crate::transformer::{Modality, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocRegime {
    ImageFirstCaption,
    CaptionFirstImage,
    ClassificationPrompt,
}

impl DocRegime {
    pub const ALL: [DocRegime; 3] = [
        DocRegime::ClassificationPrompt,
        DocRegime::ImageFirstCaption,
        DocRegime::CaptionFirstImage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DocRegime::ImageFirstCaption => "image_first_caption",
            DocRegime::CaptionFirstImage => "caption_first_image",
            DocRegime::ClassificationPrompt => "classification_prompt",
        }
    }
}

/// Which tokens contribute to the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossRegime {
    /// Every non-[PAD] token.
    #[default]
    Native,
    /// Text-modality tokens only.
    TextOnly,
}

impl std::str::FromStr for LossRegime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "native" => Ok(LossRegime::Native),
            "text_only" | "text-only" => Ok(LossRegime::TextOnly),
            _ => Err(Error::Config(format!("unknown regime '{s}' (expected native | text_only)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    #[serde(flatten)]
    pub seq: TokenSequence,
    pub regime: DocRegime,
    pub class: usize,
    pub loss_mask: Vec<bool>,
    /// Position of the class-name token, when the document has one after the image.
    pub answer_pos: Option<usize>,
}

impl Document {
    pub fn ids(&self) -> &[u32] {
        &self.seq.ids
    }

    pub fn loss_mask_for(&self, regime: LossRegime, vocab: &Vocabulary) -> Vec<bool> {
        mask(&self.seq, regime, vocab.specials.pad)
    }

    /// Whether the answer slot comes after the image, i.e. the class name
    /// can be read off the image.
    pub fn has_answer_slot(&self) -> bool {
        self.answer_pos.is_some()
    }
}

fn mask(seq: &TokenSequence, regime: LossRegime, pad: u32) -> Vec<bool> {
    seq.modality
        .iter()
        .zip(&seq.ids)
        .map(|(&m, &id)| match regime {
            LossRegime::Native => id != pad,
            LossRegime::TextOnly => m == Modality::Text,
        })
        .collect()
}

/// Rendering options shared by every document of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DocOptions {
    pub noise_eps: f64,
    pub loss_regime: LossRegime,
    pub max_seq_len: usize,
}

/// Lays out one document. The caption is always "this object is a <name>".
pub fn build_document(
    class: &ClassSpec,
    regime: DocRegime,
    vocab: &Vocabulary,
    opts: &DocOptions,
    seed: u64,
) -> Result<Document> {
    let s = vocab.specials;
    let image = render_image(class, opts.noise_eps, vocab.n_image_codes, seed)?;
    let mut caption = vocab.template();
    caption.push(class.name_token);

    let mut ids = Vec::with_capacity(image.len() + caption.len() + 5);
    let answer_pos;
    match regime {
        DocRegime::ClassificationPrompt | DocRegime::ImageFirstCaption => {
            ids.push(s.bos);
            ids.push(s.boi);
            ids.extend_from_slice(&image);
            ids.push(s.eoi);
            ids.extend_from_slice(&caption);
            answer_pos = Some(ids.len() - 1);
            ids.push(s.eos);
        }
        DocRegime::CaptionFirstImage => {
            ids.push(s.bos);
            ids.extend_from_slice(&caption);
            ids.push(s.boi);
            ids.extend_from_slice(&image);
            ids.push(s.eoi);
            ids.push(s.eos);
            answer_pos = None;
        }
    }
    let n_eoi = ids.iter().position(|&t| t == s.eoi).expect("eoi pushed");
    let modality = ids.iter().map(|&t| vocab.modality(t)).collect();
    let seq = TokenSequence { ids, modality, n_eoi };
    seq.validate(&s, opts.max_seq_len)?;
    Ok(Document {
        loss_mask: mask(&seq, opts.loss_regime, s.pad),
        seq,
        regime,
        class: class.id,
        answer_pos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::generate_classes;

    fn setup() -> (Vocabulary, Vec<ClassSpec>, DocOptions) {
        let v = Vocabulary::new(64, 20).unwrap();
        let c = generate_classes(&v, 36, 1).unwrap();
        let o = DocOptions {
            noise_eps: 0.1,
            loss_regime: LossRegime::Native,
            max_seq_len: 64,
        };
        (v, c, o)
    }

    #[test]
    fn classification_layout() {
        let (v, c, o) = setup();
        let d = build_document(&c[5], DocRegime::ClassificationPrompt, &v, &o, 9).unwrap();
        assert_eq!(d.seq.n_eoi, 2 + 36);
        assert_eq!(d.ids().iter().filter(|&&t| t == v.specials.eoi).count(), 1);
        let n = d.seq.len();
        assert_eq!(&d.ids()[n - 6..n - 2], v.template().as_slice());
        assert_eq!(d.answer_pos, Some(n - 2));
        assert_eq!(d.ids()[n - 2], v.class_token(5));
        assert_eq!(d.ids()[n - 1], v.specials.eos);
    }

    #[test]
    fn caption_first_layout_and_masks() {
        let (v, c, mut o) = setup();
        let d = build_document(&c[2], DocRegime::CaptionFirstImage, &v, &o, 4).unwrap();
        assert_eq!(d.ids()[5], v.class_token(2));
        assert_eq!(d.ids()[6], v.specials.boi);
        assert_eq!(d.seq.n_eoi, 43);
        assert_eq!(d.answer_pos, None);
        for p in d.seq.image_span() {
            assert!(d.loss_mask[p]);
        }
        o.loss_regime = LossRegime::TextOnly;
        let t = build_document(&c[2], DocRegime::CaptionFirstImage, &v, &o, 4).unwrap();
        for (p, m) in t.seq.modality.iter().enumerate() {
            assert_eq!(t.loss_mask[p], *m == Modality::Text);
        }
    }

    #[test]
    fn too_long_is_rejected() {
        let (v, c, mut o) = setup();
        o.max_seq_len = 40;
        assert!(build_document(&c[0], DocRegime::ImageFirstCaption, &v, &o, 0).is_err());
    }
}
