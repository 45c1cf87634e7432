use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Image,
    Text,
    Special,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Text => "text",
            Modality::Special => "special",
        }
    }
}

/// Ids of the structural tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialTokens {
    pub bos: u32,
    pub boi: u32,
    pub eoi: u32,
    pub eos: u32,
    pub pad: u32,
}

/// Token ids with per-token modality tags and the end-of-image position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub modality: Vec<Modality>,
    pub n_eoi: usize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Positions of image tokens (a contiguous span ending right before `n_eoi`).
    pub fn image_span(&self) -> std::ops::Range<usize> {
        let end = self.n_eoi;
        let mut start = end;
        while start > 0 && self.modality[start - 1] == Modality::Image {
            start -= 1;
        }
        start..end
    }

    /// Positions strictly after the end-of-image token.
    pub fn text_positions(&self) -> std::ops::Range<usize> {
        (self.n_eoi + 1).min(self.len())..self.len()
    }

    /// Checks the structural invariants against the special-token ids.
    pub fn validate(&self, specials: &SpecialTokens, max_seq_len: usize) -> Result<()> {
        if self.ids.len() != self.modality.len() {
            return Err(Error::Shape(format!(
                "{} ids but {} modality tags",
                self.ids.len(),
                self.modality.len()
            )));
        }
        if self.len() > max_seq_len {
            return Err(Error::InvalidInput(format!(
                "sequence length {} exceeds max_seq_len {max_seq_len}",
                self.len()
            )));
        }
        let eois: Vec<usize> = (0..self.len())
            .filter(|&i| self.ids[i] == specials.eoi)
            .collect();
        if eois != [self.n_eoi] {
            return Err(Error::InvalidInput(format!(
                "expected exactly one [EOI] at {}, found at {eois:?}",
                self.n_eoi
            )));
        }
        let span = self.image_span();
        if let Some(p) = (0..self.len()).find(|&i| self.modality[i] == Modality::Image && !span.contains(&i)) {
            return Err(Error::InvalidInput(format!(
                "image token at {p} lies outside the span {span:?} before [EOI]"
            )));
        }
        if span.start == 0 || self.ids[span.start - 1] != specials.boi {
            return Err(Error::InvalidInput("[BOI] must immediately precede the image span".into()));
        }
        Ok(())
    }
}
