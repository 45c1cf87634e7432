use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::transformer::forward::{gelu_grad, LnCache};
use crate::transformer::{ForwardCache, Params, Real, Transformer};

/// Gradient buffer with the same layout as the parameters.
pub type Gradient<F> = Params<F>;

/// Returns `(dx, dgain, dbias)` for `y = xhat * gain + bias`.
fn ln_backward<F: Real>(
    dy: &Array2<F>,
    cache: &LnCache<F>,
    gain: ArrayView1<F>,
) -> (Array2<F>, Array2<F>, Array2<F>) {
    let d = F::from_usize(dy.ncols()).expect("width");
    let dgain = (dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    let dbias = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let mut dx = dy * &gain;
    for ((mut row, xhat), &rstd) in dx
        .axis_iter_mut(Axis(0))
        .zip(cache.xhat.axis_iter(Axis(0)))
        .zip(cache.rstd.iter())
    {
        let mean_g = row.iter().copied().sum::<F>() / d;
        let mean_gx = row.iter().zip(xhat.iter()).map(|(&g, &x)| g * x).sum::<F>() / d;
        for (g, &x) in row.iter_mut().zip(xhat.iter()) {
            *g = rstd * (*g - mean_g - x * mean_gx);
        }
    }
    (dx, dgain, dbias)
}

fn attention_backward<F: Real>(
    dcat: &Array2<F>,
    qkv: &Array2<F>,
    probs: &[Vec<F>],
    segments: &[(usize, usize)],
    n_heads: usize,
) -> Array2<F> {
    let width = qkv.ncols();
    let d = width / 3;
    let hd = d / n_heads;
    let scale = F::one() / F::from_usize(hd).expect("head dim").sqrt();
    let qkv_s = qkv.as_slice().expect("standard layout");
    let dcat_s = dcat.as_standard_layout();
    let dcat_s = dcat_s.as_slice().expect("standard layout");
    let mut dqkv = vec![F::zero(); qkv_s.len()];
    let mut dp = Vec::new();
    for (s, &(off, len)) in segments.iter().enumerate() {
        for h in 0..n_heads {
            let p_head = &probs[s][h * len * len..(h + 1) * len * len];
            for i in 0..len {
                let dout = &dcat_s[(off + i) * d + h * hd..][..hd];
                let prow = &p_head[i * len..(i + 1) * len];
                dp.clear();
                let mut weighted = F::zero();
                for j in 0..=i {
                    let p = prow[j];
                    if p == F::zero() {
                        dp.push(F::zero());
                        continue;
                    }
                    let v = &qkv_s[(off + j) * width + 2 * d + h * hd..][..hd];
                    let g = dout.iter().zip(v).map(|(&a, &b)| a * b).sum::<F>();
                    dp.push(g);
                    weighted += p * g;
                    let dv = &mut dqkv[(off + j) * width + 2 * d + h * hd..][..hd];
                    for (x, &o) in dv.iter_mut().zip(dout) {
                        *x += p * o;
                    }
                }
                for j in 0..=i {
                    let p = prow[j];
                    if p == F::zero() {
                        continue;
                    }
                    let ds = p * (dp[j] - weighted) * scale;
                    let (qi, kj) = ((off + i) * width + h * hd, (off + j) * width + d + h * hd);
                    for t in 0..hd {
                        let q = qkv_s[qi + t];
                        let k = qkv_s[kj + t];
                        dqkv[qi + t] += ds * k;
                        dqkv[kj + t] += ds * q;
                    }
                }
            }
        }
    }
    Array2::from_shape_vec(qkv.raw_dim(), dqkv).expect("qkv shape")
}

/// Backpropagates `dlogits` (gradient of the objective w.r.t. the logits)
/// through a cached forward pass.
pub fn backward<F: Real>(
    model: &Transformer<F>,
    cache: &ForwardCache<F>,
    dlogits: &Array2<F>,
) -> Result<Gradient<F>> {
    if cache.patched {
        return Err(Error::InvalidInput(
            "cannot backpropagate through a patched forward pass".into(),
        ));
    }
    if dlogits.dim() != cache.logits.dim() {
        return Err(Error::Shape(format!(
            "dlogits {:?} vs logits {:?}",
            dlogits.dim(),
            cache.logits.dim()
        )));
    }
    let p = &model.params;
    let lay = &p.layout;
    let mut g = Params::zeros(lay.clone());
    let one = F::one();
    let zero = F::zero();

    general_mat_mul(one, &cache.a_final.t(), dlogits, zero, &mut g.mat_mut(lay.w_unembed));
    g.vector_mut(lay.b_unembed).assign(&dlogits.sum_axis(Axis(0)));
    let da = dlogits.dot(&p.mat(lay.w_unembed).t());
    let (mut dx, dgain, dbias) = ln_backward(&da, &cache.lnf, p.vector(lay.lnf_gain));
    g.vector_mut(lay.lnf_gain).assign(&dgain.row(0));
    g.vector_mut(lay.lnf_bias).assign(&dbias.row(0));

    for (lc, b) in cache.layers.iter().zip(&lay.blocks).rev() {
        g.vector_mut(b.b_mlp_out).assign(&dx.sum_axis(Axis(0)));
        general_mat_mul(one, &lc.h_act.t(), &dx, zero, &mut g.mat_mut(b.w_mlp_out));
        let mut dh = dx.dot(&p.mat(b.w_mlp_out).t());
        dh.zip_mut_with(&lc.h_pre, |d, &h| *d *= gelu_grad(h));
        g.vector_mut(b.b_mlp_in).assign(&dh.sum_axis(Axis(0)));
        general_mat_mul(one, &lc.a2.t(), &dh, zero, &mut g.mat_mut(b.w_mlp_in));
        let da2 = dh.dot(&p.mat(b.w_mlp_in).t());
        let (dx2, dgain, dbias) = ln_backward(&da2, &lc.ln2, p.vector(b.ln2_gain));
        g.vector_mut(b.ln2_gain).assign(&dgain.row(0));
        g.vector_mut(b.ln2_bias).assign(&dbias.row(0));
        dx += &dx2;

        g.vector_mut(b.b_attn_out).assign(&dx.sum_axis(Axis(0)));
        general_mat_mul(one, &lc.cat.t(), &dx, zero, &mut g.mat_mut(b.w_attn_out));
        let dcat = dx.dot(&p.mat(b.w_attn_out).t());
        let dqkv = attention_backward(&dcat, &lc.qkv, &lc.probs, &cache.segments, model.config.n_heads);
        g.vector_mut(b.b_qkv).assign(&dqkv.sum_axis(Axis(0)));
        general_mat_mul(one, &lc.a1.t(), &dqkv, zero, &mut g.mat_mut(b.w_qkv));
        let da1 = dqkv.dot(&p.mat(b.w_qkv).t());
        let (dx1, dgain, dbias) = ln_backward(&da1, &lc.ln1, p.vector(b.ln1_gain));
        g.vector_mut(b.ln1_gain).assign(&dgain.row(0));
        g.vector_mut(b.ln1_bias).assign(&dbias.row(0));
        dx += &dx1;
    }

    let d = model.config.d_model;
    for &(off, len) in &cache.segments {
        for t in 0..len {
            let row = dx.row(off + t);
            let tok = cache.tokens[off + t] as usize;
            let te = lay.tensors[lay.tok_emb].offset + tok * d;
            let pe = lay.tensors[lay.pos_emb].offset + t * d;
            for (k, &v) in row.iter().enumerate() {
                g.data[te + k] += v;
                g.data[pe + k] += v;
            }
        }
    }
    Ok(g)
}
