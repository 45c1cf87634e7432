use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transformer::Modality;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_mlp: usize,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub seed: u64,
    /// Half-open id range of image codes.
    pub image_tokens: [u32; 2],
    /// Half-open id range of text words; everything else is special.
    pub text_tokens: [u32; 2],
}

impl ModelConfig {
    /// Desk-scale default: 6 layers, 4 heads, width 128, MLP 512, context 64.
    pub fn desk(vocab_size: usize, image_tokens: [u32; 2], text_tokens: [u32; 2]) -> Self {
        Self {
            n_layers: 6,
            n_heads: 4,
            d_model: 128,
            d_mlp: 512,
            vocab_size,
            max_seq_len: 64,
            seed: 7,
            image_tokens,
            text_tokens,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn modality(&self, id: u32) -> Modality {
        if (self.image_tokens[0]..self.image_tokens[1]).contains(&id) {
            Modality::Image
        } else if (self.text_tokens[0]..self.text_tokens[1]).contains(&id) {
            Modality::Text
        } else {
            Modality::Special
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_model", self.d_model),
            ("d_mlp", self.d_mlp),
            ("vocab_size", self.vocab_size),
            ("max_seq_len", self.max_seq_len),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        for (name, [lo, hi]) in [("image", self.image_tokens), ("text", self.text_tokens)] {
            if lo > hi || hi as usize > self.vocab_size {
                return Err(Error::Config(format!(
                    "{name} token range {lo}..{hi} does not fit vocab of {}",
                    self.vocab_size
                )));
            }
        }
        let [a0, a1] = self.image_tokens;
        let [b0, b1] = self.text_tokens;
        if a0 < b1 && b0 < a1 {
            return Err(Error::Config("image and text token ranges overlap".into()));
        }
        Ok(())
    }
}
