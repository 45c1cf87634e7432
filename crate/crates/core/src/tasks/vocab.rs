use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transformer::{Modality, ModelConfig, SpecialTokens};

/// Caption template preceding the class name.
pub const TEMPLATE: [&str; 4] = ["this", "object", "is", "a"];

const MAX_TEXT_WORDS: usize = 48;

/// Token id layout: image codes, then text words (template words followed by
/// class names), then the five special tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub n_image_codes: usize,
    pub words: Vec<String>,
    pub n_classes: usize,
    pub specials: SpecialTokens,
}

impl Vocabulary {
    pub fn new(n_image_codes: usize, n_classes: usize) -> Result<Self> {
        if n_image_codes < 2 || n_classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 image codes and 2 classes, got {n_image_codes} and {n_classes}"
            )));
        }
        let mut words: Vec<String> = TEMPLATE.iter().map(|w| w.to_string()).collect();
        words.extend((0..n_classes).map(|c| format!("class{c:02}")));
        if words.len() > MAX_TEXT_WORDS {
            return Err(Error::Config(format!(
                "{} text words exceed the limit of {MAX_TEXT_WORDS}",
                words.len()
            )));
        }
        let base = (n_image_codes + words.len()) as u32;
        Ok(Self {
            n_image_codes,
            n_classes,
            specials: SpecialTokens {
                bos: base,
                boi: base + 1,
                eoi: base + 2,
                eos: base + 3,
                pad: base + 4,
            },
            words,
        })
    }

    pub fn size(&self) -> usize {
        self.n_image_codes + self.words.len() + 5
    }

    pub fn image_range(&self) -> [u32; 2] {
        [0, self.n_image_codes as u32]
    }

    pub fn text_range(&self) -> [u32; 2] {
        let start = self.n_image_codes as u32;
        [start, start + self.words.len() as u32]
    }

    /// Desk-scale model sized for this vocabulary.
    pub fn desk_model(&self) -> ModelConfig {
        ModelConfig::desk(self.size(), self.image_range(), self.text_range())
    }

    pub fn word(&self, i: usize) -> u32 {
        (self.n_image_codes + i) as u32
    }

    pub fn template(&self) -> Vec<u32> {
        (0..TEMPLATE.len()).map(|i| self.word(i)).collect()
    }

    pub fn class_token(&self, class: usize) -> u32 {
        self.word(TEMPLATE.len() + class)
    }

    /// Inverse of [`Vocabulary::class_token`].
    pub fn token_class(&self, id: u32) -> Option<usize> {
        let first = self.class_token(0);
        (id >= first && ((id - first) as usize) < self.n_classes).then(|| (id - first) as usize)
    }

    pub fn modality(&self, id: u32) -> Modality {
        let [t0, t1] = self.text_range();
        if (id as usize) < self.n_image_codes {
            Modality::Image
        } else if (t0..t1).contains(&id) {
            Modality::Text
        } else {
            Modality::Special
        }
    }

    pub fn decode(&self, id: u32) -> String {
        let s = &self.specials;
        match id {
            _ if (id as usize) < self.n_image_codes => format!("<img{id}>"),
            _ if self.modality(id) == Modality::Text => {
                self.words[id as usize - self.n_image_codes].clone()
            }
            _ if id == s.bos => "[BOS]".into(),
            _ if id == s.boi => "[BOI]".into(),
            _ if id == s.eoi => "[EOI]".into(),
            _ if id == s.eos => "[EOS]".into(),
            _ if id == s.pad => "[PAD]".into(),
            _ => format!("<unk{id}>"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_disjoint() {
        let v = Vocabulary::new(64, 20).unwrap();
        assert_eq!(v.size(), 64 + 24 + 5);
        assert_eq!(v.modality(63), Modality::Image);
        assert_eq!(v.modality(64), Modality::Text);
        assert_eq!(v.modality(v.specials.bos), Modality::Special);
        assert_eq!(v.token_class(v.class_token(7)), Some(7));
        assert_eq!(v.token_class(v.word(0)), None);
        assert_eq!(v.decode(v.class_token(3)), "class03");
        assert!(Vocabulary::new(64, 45).is_err());
    }
}
