use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::transformer::{KnockoutMask, KnockoutSpec, PatchSpec, Real, Transformer};

const LN_EPS: f64 = 1e-5;

/// One sequence of a (packed) batch together with its interventions.
#[derive(Debug, Clone, Copy)]
pub struct SeqInput<'a> {
    pub tokens: &'a [u32],
    pub knockout: Option<&'a KnockoutSpec>,
    pub patch: Option<&'a PatchSpec>,
}

impl<'a> SeqInput<'a> {
    pub fn plain(tokens: &'a [u32]) -> Self {
        Self {
            tokens,
            knockout: None,
            patch: None,
        }
    }
}

/// What a [`ForwardTrace`] should retain besides the logits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Capture {
    pub residual: bool,
    pub attention: bool,
}

impl Capture {
    pub const NONE: Capture = Capture {
        residual: false,
        attention: false,
    };
    pub const ALL: Capture = Capture {
        residual: true,
        attention: true,
    };
}

/// Per-sequence record of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<F> {
    /// `residual[l]` is the input of block `l` (`len x d_model`); the last
    /// entry, index `n_layers`, is the stream entering the final norm.
    pub residual: Vec<Array2<F>>,
    /// Output of the final layer norm.
    pub final_norm: Option<Array2<F>>,
    /// `attention[l][h]` is the row-stochastic `len x len` pattern.
    pub attention: Vec<Vec<Array2<F>>>,
    pub logits: Array2<F>,
}

#[derive(Debug, Clone)]
pub(crate) struct LnCache<F> {
    pub xhat: Array2<F>,
    pub rstd: Array1<F>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache<F> {
    pub x_in: Array2<F>,
    pub ln1: LnCache<F>,
    pub a1: Array2<F>,
    pub qkv: Array2<F>,
    /// Per sequence: `n_heads x len x len` attention probabilities.
    pub probs: Vec<Vec<F>>,
    pub cat: Array2<F>,
    pub ln2: LnCache<F>,
    pub a2: Array2<F>,
    pub h_pre: Array2<F>,
    pub h_act: Array2<F>,
}

/// Everything the backward pass needs, for a packed batch of sequences.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    /// `(row offset, length)` per sequence.
    pub segments: Vec<(usize, usize)>,
    pub tokens: Vec<u32>,
    pub(crate) layers: Vec<LayerCache<F>>,
    pub(crate) x_final: Array2<F>,
    pub(crate) lnf: LnCache<F>,
    pub(crate) a_final: Array2<F>,
    pub logits: Array2<F>,
    pub(crate) patched: bool,
}

pub(crate) fn layer_norm<F: Real>(
    x: &Array2<F>,
    gain: ArrayView1<F>,
    bias: ArrayView1<F>,
) -> (Array2<F>, LnCache<F>) {
    let d = F::from_usize(x.ncols()).expect("width");
    let eps = F::from_f64_lossy(LN_EPS);
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in xhat.axis_iter_mut(Axis(0)).zip(rstd.iter_mut()) {
        let mean = row.iter().copied().sum::<F>() / d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / d;
        *r = F::one() / (var + eps).sqrt();
        let rs = *r;
        row.mapv_inplace(|v| (v - mean) * rs);
    }
    let y = &xhat * &gain + bias;
    (y, LnCache { xhat, rstd })
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

pub(crate) fn gelu<F: Real>(x: F) -> F {
    let c = F::from_f64_lossy(GELU_C);
    let a = F::from_f64_lossy(GELU_A);
    let half = F::from_f64_lossy(0.5);
    half * x * (F::one() + (c * (x + a * x * x * x)).tanh())
}

pub(crate) fn gelu_grad<F: Real>(x: F) -> F {
    let c = F::from_f64_lossy(GELU_C);
    let a = F::from_f64_lossy(GELU_A);
    let half = F::from_f64_lossy(0.5);
    let three = F::from_f64_lossy(3.0);
    let t = (c * (x + a * x * x * x)).tanh();
    half * (F::one() + t) + half * x * (F::one() - t * t) * c * (F::one() + three * a * x * x)
}

fn linear<F: Real>(x: &Array2<F>, w: ArrayView2<F>, b: ArrayView1<F>) -> Array2<F> {
    let mut y = x.dot(&w);
    y += &b;
    y
}

/// Causal multi-head attention over packed sequences.
fn attention<F: Real>(
    qkv: &Array2<F>,
    segments: &[(usize, usize)],
    masks: &[Option<&Vec<bool>>],
    n_heads: usize,
) -> (Array2<F>, Vec<Vec<F>>) {
    let width = qkv.ncols();
    let d = width / 3;
    let hd = d / n_heads;
    let scale = F::one() / F::from_usize(hd).expect("head dim").sqrt();
    let qkv = qkv.as_slice().expect("standard layout");
    let mut out = vec![F::zero(); qkv.len() / 3];
    let mut all_probs = Vec::with_capacity(segments.len());
    let mut scores = Vec::new();
    for (s, &(off, len)) in segments.iter().enumerate() {
        let mut probs = vec![F::zero(); n_heads * len * len];
        let mask = masks[s];
        for h in 0..n_heads {
            let p_head = &mut probs[h * len * len..(h + 1) * len * len];
            for i in 0..len {
                let q = &qkv[(off + i) * width + h * hd..][..hd];
                scores.clear();
                let mut max = F::neg_infinity();
                for j in 0..=i {
                    if mask.is_some_and(|m| m[i * len + j]) {
                        scores.push(F::neg_infinity());
                        continue;
                    }
                    let k = &qkv[(off + j) * width + d + h * hd..][..hd];
                    let sc = q.iter().zip(k).map(|(&a, &b)| a * b).sum::<F>() * scale;
                    if sc > max {
                        max = sc;
                    }
                    scores.push(sc);
                }
                let mut total = F::zero();
                for sc in scores.iter_mut() {
                    *sc = if sc.is_finite() { (*sc - max).exp() } else { F::zero() };
                    total += *sc;
                }
                let row = &mut p_head[i * len..(i + 1) * len];
                let o = &mut out[(off + i) * d + h * hd..][..hd];
                for (j, &e) in scores.iter().enumerate() {
                    let p = e / total;
                    row[j] = p;
                    if p == F::zero() {
                        continue;
                    }
                    let v = &qkv[(off + j) * width + 2 * d + h * hd..][..hd];
                    for (oo, &vv) in o.iter_mut().zip(v) {
                        *oo += p * vv;
                    }
                }
            }
        }
        all_probs.push(probs);
    }
    let rows = out.len() / d;
    (
        Array2::from_shape_vec((rows, d), out).expect("attention output shape"),
        all_probs,
    )
}

impl<F: Real> Transformer<F> {
    /// Runs a packed batch and keeps every activation needed for backprop.
    pub fn forward_cache(&self, batch: &[SeqInput]) -> Result<ForwardCache<F>> {
        let c = &self.config;
        let p = &self.params;
        let lay = &p.layout;
        let d = c.d_model;
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let mut segments = Vec::with_capacity(batch.len());
        let mut masks: Vec<KnockoutMask> = Vec::new();
        let mut mask_of: Vec<Option<usize>> = Vec::with_capacity(batch.len());
        let mut total = 0;
        for item in batch {
            let len = item.tokens.len();
            if len == 0 || len > c.max_seq_len {
                return Err(Error::InvalidInput(format!(
                    "sequence length {len} outside 1..={}",
                    c.max_seq_len
                )));
            }
            if let Some(&bad) = item.tokens.iter().find(|&&t| t as usize >= c.vocab_size) {
                return Err(Error::InvalidInput(format!(
                    "token id {bad} >= vocab size {}",
                    c.vocab_size
                )));
            }
            if let Some(patch) = item.patch {
                patch.validate(len, c.n_layers, d)?;
            }
            mask_of.push(match item.knockout {
                Some(k) if !k.is_empty() => {
                    masks.push(k.compile(len, c.n_layers)?);
                    Some(masks.len() - 1)
                }
                _ => None,
            });
            segments.push((total, len));
            total += len;
        }

        let tok_emb = p.mat(lay.tok_emb);
        let pos_emb = p.mat(lay.pos_emb);
        let mut x = Array2::<F>::zeros((total, d));
        let mut tokens = Vec::with_capacity(total);
        for (item, &(off, _)) in batch.iter().zip(&segments) {
            for (t, &id) in item.tokens.iter().enumerate() {
                let mut row = x.row_mut(off + t);
                row.assign(&tok_emb.row(id as usize));
                row += &pos_emb.row(t);
                tokens.push(id);
            }
        }

        let apply_patches = |x: &mut Array2<F>, layer: usize| {
            for (item, &(off, _)) in batch.iter().zip(&segments) {
                let Some(patch) = item.patch else { continue };
                for e in patch.entries.iter().filter(|e| e.layer == layer) {
                    for (dst, &v) in x.row_mut(off + e.position).iter_mut().zip(&e.vector) {
                        *dst = F::from_f64_lossy(v);
                    }
                }
            }
        };

        let mut layers = Vec::with_capacity(c.n_layers);
        for (l, b) in lay.blocks.iter().enumerate() {
            apply_patches(&mut x, l);
            let x_in = x.clone();
            let (a1, ln1) = layer_norm(&x, p.vector(b.ln1_gain), p.vector(b.ln1_bias));
            let qkv = linear(&a1, p.mat(b.w_qkv), p.vector(b.b_qkv));
            let layer_masks: Vec<Option<&Vec<bool>>> = mask_of
                .iter()
                .map(|m| m.and_then(|i| masks[i].layers[l].as_ref()))
                .collect();
            let (cat, probs) = attention(&qkv, &segments, &layer_masks, c.n_heads);
            x += &linear(&cat, p.mat(b.w_attn_out), p.vector(b.b_attn_out));
            let (a2, ln2) = layer_norm(&x, p.vector(b.ln2_gain), p.vector(b.ln2_bias));
            let h_pre = linear(&a2, p.mat(b.w_mlp_in), p.vector(b.b_mlp_in));
            let h_act = h_pre.mapv(gelu);
            x += &linear(&h_act, p.mat(b.w_mlp_out), p.vector(b.b_mlp_out));
            layers.push(LayerCache {
                x_in,
                ln1,
                a1,
                qkv,
                probs,
                cat,
                ln2,
                a2,
                h_pre,
                h_act,
            });
        }
        apply_patches(&mut x, c.n_layers);
        let (a_final, lnf) = layer_norm(&x, p.vector(lay.lnf_gain), p.vector(lay.lnf_bias));
        let logits = linear(&a_final, p.mat(lay.w_unembed), p.vector(lay.b_unembed));
        Ok(ForwardCache {
            segments,
            tokens,
            layers,
            x_final: x,
            lnf,
            a_final,
            logits,
            patched: batch.iter().any(|b| b.patch.is_some_and(|p| !p.is_empty())),
        })
    }

    /// Runs a batch and splits it into per-sequence traces.
    pub fn trace_batch(&self, batch: &[SeqInput], capture: Capture) -> Result<Vec<ForwardTrace<F>>> {
        let cache = self.forward_cache(batch)?;
        let n_heads = self.config.n_heads;
        Ok(cache
            .segments
            .iter()
            .enumerate()
            .map(|(s, &(off, len))| {
                let rows = s![off..off + len, ..];
                let residual = if capture.residual {
                    cache
                        .layers
                        .iter()
                        .map(|lc| lc.x_in.slice(rows).to_owned())
                        .chain(std::iter::once(cache.x_final.slice(rows).to_owned()))
                        .collect()
                } else {
                    Vec::new()
                };
                let attention = if capture.attention {
                    cache
                        .layers
                        .iter()
                        .map(|lc| {
                            (0..n_heads)
                                .map(|h| {
                                    let flat = lc.probs[s][h * len * len..(h + 1) * len * len].to_vec();
                                    Array2::from_shape_vec((len, len), flat).expect("square")
                                })
                                .collect()
                        })
                        .collect()
                } else {
                    Vec::new()
                };
                ForwardTrace {
                    residual,
                    final_norm: capture
                        .residual
                        .then(|| cache.a_final.slice(rows).to_owned()),
                    attention,
                    logits: cache.logits.slice(rows).to_owned(),
                }
            })
            .collect())
    }

    /// Single-sequence forward pass with optional interventions.
    pub fn forward(
        &self,
        tokens: &[u32],
        knockout: Option<&KnockoutSpec>,
        patch: Option<&PatchSpec>,
        capture: Capture,
    ) -> Result<ForwardTrace<F>> {
        let input = SeqInput {
            tokens,
            knockout,
            patch,
        };
        Ok(self
            .trace_batch(&[input], capture)?
            .pop()
            .expect("one trace per input"))
    }
}
