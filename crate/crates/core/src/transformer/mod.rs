//! Miniature decoder-only transformer with traced forward passes.
//!
//! The model is a pre-norm GPT: learned absolute position embeddings, GELU
//! MLPs, a final layer norm and an untied unembedding. Parameters live in a
//! single flat buffer ([`Params`]) so optimizers and checkpoints can treat
//! them uniformly. The forward pass supports two interventions:
//!
//! - attention knockout ([`KnockoutSpec`]): selected (query, key) edges get a
//!   `-inf` attention logit before the softmax at selected layers;
//! - activation patching ([`PatchSpec`]): block-input residual vectors are
//!   overwritten before the block runs.
//!
//! All numerics are generic over [`Real`] so gradient checks can run in `f64`.

mod analysis;
mod backward;
mod checkpoint;
mod config;
mod forward;
mod generate;
mod intervention;
mod params;
mod tokens;

pub use analysis::{
    cross_modal_attention_profile, distribution_similarity, output_distribution, softmax,
};
pub use backward::{backward, Gradient};
pub use checkpoint::{Checkpoint, CheckpointHeader, OptimizerState, TensorManifestEntry};
pub use config::ModelConfig;
pub use forward::{Capture, ForwardCache, ForwardTrace, SeqInput};
pub use generate::{generate, DecodeMode};
pub use intervention::{KnockoutEdge, KnockoutMask, KnockoutSpec, LayerSel, NamedKnockout, PatchEntry, PatchSpec};
pub use params::{BlockIds, ParamLayout, Params, Real, TensorInfo};
pub use tokens::{Modality, SpecialTokens, TokenSequence};

/// A model: configuration plus parameters.
#[derive(Debug, Clone)]
pub struct Transformer<F: Real> {
    pub config: ModelConfig,
    pub params: Params<F>,
}

impl<F: Real> Transformer<F> {
    /// Randomly initialized model, deterministic in `config.seed`.
    pub fn init(config: ModelConfig) -> crate::Result<Self> {
        config.validate()?;
        let params = Params::init(&config);
        Ok(Self { config, params })
    }

    /// Converts parameters to another float type.
    pub fn cast<G: Real>(&self) -> Transformer<G> {
        Transformer {
            config: self.config.clone(),
            params: self.params.cast(),
        }
    }
}
