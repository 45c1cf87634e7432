use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::sync::Arc;

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::transformer::ModelConfig;

/// Floating-point element type of model computations.
pub trait Real:
    LinalgScalar
    + Float
    + FromPrimitive
    + ScalarOperand
    + Send
    + Sync
    + Debug
    + Display
    + Default
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite conversion")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Tensor ids of one transformer block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockIds {
    pub ln1_gain: usize,
    pub ln1_bias: usize,
    pub w_qkv: usize,
    pub b_qkv: usize,
    pub w_attn_out: usize,
    pub b_attn_out: usize,
    pub ln2_gain: usize,
    pub ln2_bias: usize,
    pub w_mlp_in: usize,
    pub b_mlp_in: usize,
    pub w_mlp_out: usize,
    pub b_mlp_out: usize,
}

/// Names, shapes and offsets of every tensor in the flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub tensors: Vec<TensorInfo>,
    pub tok_emb: usize,
    pub pos_emb: usize,
    pub blocks: Vec<BlockIds>,
    pub lnf_gain: usize,
    pub lnf_bias: usize,
    pub w_unembed: usize,
    pub b_unembed: usize,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(c: &ModelConfig) -> Self {
        let mut tensors: Vec<TensorInfo> = Vec::new();
        let mut total = 0;
        let mut add = |name: String, shape: Vec<usize>| {
            let info = TensorInfo {
                name,
                shape,
                offset: total,
            };
            total += info.len();
            tensors.push(info);
            tensors.len() - 1
        };
        let (d, m, v) = (c.d_model, c.d_mlp, c.vocab_size);
        let tok_emb = add("tok_emb".into(), vec![v, d]);
        let pos_emb = add("pos_emb".into(), vec![c.max_seq_len, d]);
        let blocks = (0..c.n_layers)
            .map(|l| {
                let p = |s: &str| format!("blocks.{l}.{s}");
                BlockIds {
                    ln1_gain: add(p("ln1.gain"), vec![d]),
                    ln1_bias: add(p("ln1.bias"), vec![d]),
                    w_qkv: add(p("attn.w_qkv"), vec![d, 3 * d]),
                    b_qkv: add(p("attn.b_qkv"), vec![3 * d]),
                    w_attn_out: add(p("attn.w_out"), vec![d, d]),
                    b_attn_out: add(p("attn.b_out"), vec![d]),
                    ln2_gain: add(p("ln2.gain"), vec![d]),
                    ln2_bias: add(p("ln2.bias"), vec![d]),
                    w_mlp_in: add(p("mlp.w_in"), vec![d, m]),
                    b_mlp_in: add(p("mlp.b_in"), vec![m]),
                    w_mlp_out: add(p("mlp.w_out"), vec![m, d]),
                    b_mlp_out: add(p("mlp.b_out"), vec![d]),
                }
            })
            .collect();
        let lnf_gain = add("ln_f.gain".into(), vec![d]);
        let lnf_bias = add("ln_f.bias".into(), vec![d]);
        let w_unembed = add("unembed.w".into(), vec![d, v]);
        let b_unembed = add("unembed.b".into(), vec![v]);
        Self {
            tensors,
            tok_emb,
            pos_emb,
            blocks,
            lnf_gain,
            lnf_bias,
            w_unembed,
            b_unembed,
            total,
        }
    }

    pub fn range(&self, id: usize) -> std::ops::Range<usize> {
        let t = &self.tensors[id];
        t.offset..t.offset + t.len()
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }
}

/// Flat parameter (or gradient) buffer with a shared layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    pub layout: Arc<ParamLayout>,
    pub data: Vec<F>,
}

const INIT_STD: f64 = 0.02;
/// Per-dimension spread of the shared offset given to each modality's token embeddings.
const MODALITY_OFFSET_STD: f64 = 0.05;

impl<F: Real> Params<F> {
    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        let data = vec![F::zero(); layout.total];
        Self { layout, data }
    }

    /// GPT-style initialization. Token embeddings of each modality share a
    /// random offset so that image, text and special ids start out separated.
    pub fn init(config: &ModelConfig) -> Self {
        let layout = Arc::new(ParamLayout::new(config));
        let mut data = vec![0.0f64; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let out_std = INIT_STD / (2.0 * config.n_layers as f64).sqrt();
        for (id, info) in layout.tensors.iter().enumerate() {
            let slot = &mut data[layout.range(id)];
            let name = info.name.as_str();
            if name.ends_with(".gain") {
                slot.fill(1.0);
            } else if info.shape.len() == 1 {
                // biases stay zero
            } else {
                let std = if name.ends_with("attn.w_out") || name.ends_with("mlp.w_out") {
                    out_std
                } else {
                    INIT_STD
                };
                for v in slot.iter_mut() {
                    *v = std * normal.sample(&mut rng);
                }
            }
        }
        let d = config.d_model;
        let offsets: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..d).map(|_| MODALITY_OFFSET_STD * normal.sample(&mut rng)).collect())
            .collect();
        let emb = &mut data[layout.range(layout.tok_emb)];
        for tok in 0..config.vocab_size {
            let group = match config.modality(tok as u32) {
                super::Modality::Image => 0,
                super::Modality::Text => 1,
                super::Modality::Special => 2,
            };
            for (x, o) in emb[tok * d..(tok + 1) * d].iter_mut().zip(&offsets[group]) {
                *x += o;
            }
        }
        Self {
            layout,
            data: data.into_iter().map(F::from_f64_lossy).collect(),
        }
    }

    pub fn cast<G: Real>(&self) -> Params<G> {
        Params {
            layout: Arc::clone(&self.layout),
            data: self.data.iter().map(|v| G::from_f64_lossy(v.as_f64())).collect(),
        }
    }

    pub fn slice(&self, id: usize) -> &[F] {
        &self.data[self.layout.range(id)]
    }

    pub fn mat(&self, id: usize) -> ArrayView2<'_, F> {
        let s = &self.layout.tensors[id].shape;
        ArrayView2::from_shape((s[0], s[1]), self.slice(id)).expect("layout shape")
    }

    pub fn vector(&self, id: usize) -> ArrayView1<'_, F> {
        ArrayView1::from(self.slice(id))
    }

    pub fn mat_mut(&mut self, id: usize) -> ArrayViewMut2<'_, F> {
        let s = self.layout.tensors[id].shape.clone();
        let r = self.layout.range(id);
        ArrayViewMut2::from_shape((s[0], s[1]), &mut self.data[r]).expect("layout shape")
    }

    pub fn vector_mut(&mut self, id: usize) -> ArrayViewMut1<'_, F> {
        let r = self.layout.range(id);
        ArrayViewMut1::from(&mut self.data[r])
    }
}
