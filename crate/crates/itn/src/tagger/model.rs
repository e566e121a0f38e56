//! Parameters, forward pass, and hand-written backward pass.
//!
//! Everything is f64. Attention over the chunk-visible prefix is computed
//! with probabilities that are exactly zero outside the visible range, so
//! invisible positions contribute exact zeros to every sum and causality
//! holds bit-for-bit, not just approximately.

use super::TaggerConfig;
use ndarray::{s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub ln1_g: Array2<f64>,
    pub ln1_b: Array2<f64>,
    pub wq: Array2<f64>,
    pub bq: Array2<f64>,
    pub wk: Array2<f64>,
    pub bk: Array2<f64>,
    pub wv: Array2<f64>,
    pub bv: Array2<f64>,
    pub wo: Array2<f64>,
    pub bo: Array2<f64>,
    pub ln2_g: Array2<f64>,
    pub ln2_b: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Params {
    pub tok_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub blocks: Vec<Block>,
    pub lnf_g: Array2<f64>,
    pub lnf_b: Array2<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array2<f64>,
}

impl Params {
    pub fn init(cfg: &TaggerConfig, vocab: usize, tags: usize, seed: u64) -> Params {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.02).unwrap();
        let mut w = |r: usize, c: usize| {
            Array2::from_shape_fn((r, c), |_| normal.sample(&mut rng))
        };
        let d = cfg.model_dim;
        let f = cfg.ffn_dim;
        let mut blocks = Vec::with_capacity(cfg.num_blocks);
        for _ in 0..cfg.num_blocks {
            blocks.push(Block {
                ln1_g: Array2::ones((1, d)),
                ln1_b: Array2::zeros((1, d)),
                wq: w(d, d),
                bq: Array2::zeros((1, d)),
                wk: w(d, d),
                bk: Array2::zeros((1, d)),
                wv: w(d, d),
                bv: Array2::zeros((1, d)),
                wo: w(d, d),
                bo: Array2::zeros((1, d)),
                ln2_g: Array2::ones((1, d)),
                ln2_b: Array2::zeros((1, d)),
                w1: w(d, f),
                b1: Array2::zeros((1, f)),
                w2: w(f, d),
                b2: Array2::zeros((1, d)),
            });
        }
        Params {
            tok_emb: w(vocab, d),
            pos_emb: w(cfg.max_position, d),
            blocks,
            lnf_g: Array2::ones((1, d)),
            lnf_b: Array2::zeros((1, d)),
            w_out: w(d, tags),
            b_out: Array2::zeros((1, tags)),
        }
    }

    /// Named views over every tensor, in a stable order shared with
    /// [`Params::tensors_mut`] and the checkpoint format.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out: Vec<(String, &Array2<f64>)> = vec![
            ("tok_emb".into(), &self.tok_emb),
            ("pos_emb".into(), &self.pos_emb),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            for (name, t) in [
                ("ln1_g", &b.ln1_g),
                ("ln1_b", &b.ln1_b),
                ("wq", &b.wq),
                ("bq", &b.bq),
                ("wk", &b.wk),
                ("bk", &b.bk),
                ("wv", &b.wv),
                ("bv", &b.bv),
                ("wo", &b.wo),
                ("bo", &b.bo),
                ("ln2_g", &b.ln2_g),
                ("ln2_b", &b.ln2_b),
                ("w1", &b.w1),
                ("b1", &b.b1),
                ("w2", &b.w2),
                ("b2", &b.b2),
            ] {
                out.push((format!("block{i}.{name}"), t));
            }
        }
        out.push(("lnf_g".into(), &self.lnf_g));
        out.push(("lnf_b".into(), &self.lnf_b));
        out.push(("w_out".into(), &self.w_out));
        out.push(("b_out".into(), &self.b_out));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out: Vec<(String, &mut Array2<f64>)> = vec![
            ("tok_emb".into(), &mut self.tok_emb),
            ("pos_emb".into(), &mut self.pos_emb),
        ];
        for (i, b) in self.blocks.iter_mut().enumerate() {
            for (name, t) in [
                ("ln1_g", &mut b.ln1_g),
                ("ln1_b", &mut b.ln1_b),
                ("wq", &mut b.wq),
                ("bq", &mut b.bq),
                ("wk", &mut b.wk),
                ("bk", &mut b.bk),
                ("wv", &mut b.wv),
                ("bv", &mut b.bv),
                ("wo", &mut b.wo),
                ("bo", &mut b.bo),
                ("ln2_g", &mut b.ln2_g),
                ("ln2_b", &mut b.ln2_b),
                ("w1", &mut b.w1),
                ("b1", &mut b.b1),
                ("w2", &mut b.w2),
                ("b2", &mut b.b2),
            ] {
                out.push((format!("block{i}.{name}"), t));
            }
        }
        out.push(("lnf_g".into(), &mut self.lnf_g));
        out.push(("lnf_b".into(), &mut self.lnf_b));
        out.push(("w_out".into(), &mut self.w_out));
        out.push(("b_out".into(), &mut self.b_out));
        out
    }

    pub fn zeros_like(&self) -> Params {
        let mut g = self.clone();
        for (_, t) in g.tensors_mut() {
            t.fill(0.0);
        }
        g
    }

    pub fn quantize_f32(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.mapv_inplace(|v| v as f32 as f64);
        }
    }
}

/// Row-wise layer norm; returns (output, xhat, rstd) for backward.
fn layer_norm(x: &Array2<f64>, g: &Array2<f64>, b: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    let t = x.nrows();
    let d = x.ncols() as f64;
    let mut xhat = Array2::zeros(x.raw_dim());
    let mut rstd = Array1::zeros(t);
    for i in 0..t {
        let row = x.row(i);
        let mean = row.sum() / d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let r = 1.0 / (var + LN_EPS).sqrt();
        rstd[i] = r;
        for (j, &v) in row.iter().enumerate() {
            xhat[[i, j]] = (v - mean) * r;
        }
    }
    let y = &xhat * g + b;
    (y, xhat, rstd)
}

/// dL/dx for layer norm given dL/dy; also accumulates dg/db.
fn layer_norm_backward(
    dy: &Array2<f64>,
    xhat: &Array2<f64>,
    rstd: &Array1<f64>,
    g: &Array2<f64>,
    dg: &mut Array2<f64>,
    db: &mut Array2<f64>,
) -> Array2<f64> {
    let t = dy.nrows();
    let d = dy.ncols() as f64;
    *dg += &(dy * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dxhat = dy * g;
    let mut dx = Array2::zeros(dy.raw_dim());
    for i in 0..t {
        let dxh = dxhat.row(i);
        let xh = xhat.row(i);
        let m1 = dxh.sum() / d;
        let m2 = dxh
            .iter()
            .zip(xh.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / d;
        for j in 0..dy.ncols() {
            dx[[i, j]] = rstd[i] * (dxh[j] - m1 - xh[j] * m2);
        }
    }
    dx
}

/// Chunk-restricted multi-head attention probabilities: row i is a softmax
/// over columns [visible_start(i), visible_end(i)), exactly zero elsewhere.
fn attention_probs(
    q: &Array2<f64>,
    k: &Array2<f64>,
    cfg: &TaggerConfig,
    head: usize,
) -> Array2<f64> {
    let t = q.nrows();
    let dk = cfg.model_dim / cfg.num_heads;
    let scale = 1.0 / (dk as f64).sqrt();
    let lo_col = head * dk;
    let mut p = Array2::zeros((t, t));
    for i in 0..t {
        let start = cfg.visible_start(i);
        let end = cfg.visible_end(i, t);
        let qi = q.slice(s![i, lo_col..lo_col + dk]);
        let mut scores = Vec::with_capacity(end - start);
        for j in start..end {
            let kj = k.slice(s![j, lo_col..lo_col + dk]);
            scores.push(qi.dot(&kj) * scale);
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in scores.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for (off, v) in scores.iter().enumerate() {
            p[[i, start + off]] = v / sum;
        }
    }
    p
}

/// Everything the backward pass needs from one block's forward pass.
struct BlockTape {
    ln1_xhat: Array2<f64>,
    ln1_rstd: Array1<f64>,
    ln1_out: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>, // one [T,T] per head
    ctx: Array2<f64>,        // concatenated head outputs
    attn_mask: Option<Array2<f64>>,
    ln2_xhat: Array2<f64>,
    ln2_rstd: Array1<f64>,
    ln2_out: Array2<f64>,
    h_pre: Array2<f64>, // FFN pre-activation
    h: Array2<f64>,     // post-ReLU
    ffn_mask: Option<Array2<f64>>,
}

struct Tape {
    ids: Vec<usize>,
    emb_mask: Option<Array2<f64>>,
    blocks: Vec<BlockTape>,
    lnf_xhat: Array2<f64>,
    lnf_rstd: Array1<f64>,
    lnf_out: Array2<f64>,
    logp: Array2<f64>,
}

fn dropout_mask(shape: (usize, usize), p: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    use rand::Rng;
    let keep = 1.0 - p;
    Array2::from_shape_fn(shape, |_| {
        if rng.gen_bool(keep) {
            1.0 / keep
        } else {
            0.0
        }
    })
}

fn run_forward(
    p: &Params,
    cfg: &TaggerConfig,
    ids: &[usize],
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Tape {
    let t = ids.len();
    let d = cfg.model_dim;
    let mut x = Array2::zeros((t, d));
    for (i, &id) in ids.iter().enumerate() {
        let row = &p.tok_emb.row(id) + &p.pos_emb.row(i);
        x.row_mut(i).assign(&row);
    }
    let mask = |shape: (usize, usize), rng: &mut Option<&mut ChaCha8Rng>| {
        rng.as_deref_mut()
            .map(|r| dropout_mask(shape, cfg.dropout, r))
    };
    let emb_mask = mask((t, d), &mut dropout_rng);
    if let Some(m) = &emb_mask {
        x *= m;
    }

    let mut blocks = Vec::with_capacity(cfg.num_blocks);
    for b in &p.blocks {
        let (ln1_out, ln1_xhat, ln1_rstd) = layer_norm(&x, &b.ln1_g, &b.ln1_b);
        let q = ln1_out.dot(&b.wq) + &b.bq;
        let k = ln1_out.dot(&b.wk) + &b.bk;
        let v = ln1_out.dot(&b.wv) + &b.bv;
        let dk = d / cfg.num_heads;
        let mut ctx = Array2::zeros((t, d));
        let mut probs = Vec::with_capacity(cfg.num_heads);
        for h in 0..cfg.num_heads {
            let ph = attention_probs(&q, &k, cfg, h);
            let vh = v.slice(s![.., h * dk..(h + 1) * dk]);
            let ch = ph.dot(&vh);
            ctx.slice_mut(s![.., h * dk..(h + 1) * dk]).assign(&ch);
            probs.push(ph);
        }
        let mut attn = ctx.dot(&b.wo) + &b.bo;
        let attn_mask = mask((t, d), &mut dropout_rng);
        if let Some(m) = &attn_mask {
            attn *= m;
        }
        let x_mid = &x + &attn;

        let (ln2_out, ln2_xhat, ln2_rstd) = layer_norm(&x_mid, &b.ln2_g, &b.ln2_b);
        let h_pre = ln2_out.dot(&b.w1) + &b.b1;
        let h = h_pre.mapv(|v| v.max(0.0));
        let mut ffn = h.dot(&b.w2) + &b.b2;
        let ffn_mask = mask((t, d), &mut dropout_rng);
        if let Some(m) = &ffn_mask {
            ffn *= m;
        }
        x = &x_mid + &ffn;

        blocks.push(BlockTape {
            ln1_xhat,
            ln1_rstd,
            ln1_out,
            q,
            k,
            v,
            probs,
            ctx,
            attn_mask,
            ln2_xhat,
            ln2_rstd,
            ln2_out,
            h_pre,
            h,
            ffn_mask,
        });
    }

    let (lnf_out, lnf_xhat, lnf_rstd) = layer_norm(&x, &p.lnf_g, &p.lnf_b);
    let logits = lnf_out.dot(&p.w_out) + &p.b_out;
    let mut logp = logits;
    for mut row in logp.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }

    Tape {
        ids: ids.to_vec(),
        emb_mask,
        blocks,
        lnf_xhat,
        lnf_rstd,
        lnf_out,
        logp,
    }
}

/// Inference-mode forward pass (no dropout).
pub(crate) fn forward(p: &Params, cfg: &TaggerConfig, ids: &[usize]) -> Array2<f64> {
    run_forward(p, cfg, ids, None).logp
}

/// Mean cross-entropy over the sentence plus gradients for every
/// parameter, accumulated into `grads`. The gradient is scaled by
/// `1/scale` (use the total token count of the batch for a batch mean).
pub(crate) fn loss_and_grad(
    p: &Params,
    cfg: &TaggerConfig,
    ids: &[usize],
    tags: &[usize],
    scale: f64,
    grads: &mut Params,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> f64 {
    assert_eq!(ids.len(), tags.len());
    let t = ids.len();
    let d = cfg.model_dim;
    let tape = run_forward(p, cfg, ids, dropout_rng);

    let mut loss = 0.0;
    for (i, &tag) in tags.iter().enumerate() {
        loss -= tape.logp[[i, tag]];
    }

    // d(loss)/d(logits) = softmax - onehot, scaled.
    let mut dlogits = tape.logp.mapv(f64::exp);
    for (i, &tag) in tags.iter().enumerate() {
        dlogits[[i, tag]] -= 1.0;
    }
    dlogits.mapv_inplace(|v| v / scale);

    grads.b_out += &dlogits.sum_axis(Axis(0)).insert_axis(Axis(0));
    grads.w_out += &tape.lnf_out.t().dot(&dlogits);
    let dlnf_out = dlogits.dot(&p.w_out.t());
    let mut dx = layer_norm_backward(
        &dlnf_out,
        &tape.lnf_xhat,
        &tape.lnf_rstd,
        &p.lnf_g,
        &mut grads.lnf_g,
        &mut grads.lnf_b,
    );

    let dk = d / cfg.num_heads;
    let scale_qk = 1.0 / (dk as f64).sqrt();
    for (bi, b) in p.blocks.iter().enumerate().rev() {
        let bt = &tape.blocks[bi];
        let gb = &mut grads.blocks[bi];

        // FFN branch.
        let mut dffn = dx.clone();
        if let Some(m) = &bt.ffn_mask {
            dffn *= m;
        }
        gb.b2 += &dffn.sum_axis(Axis(0)).insert_axis(Axis(0));
        gb.w2 += &bt.h.t().dot(&dffn);
        let mut dh = dffn.dot(&b.w2.t());
        for (g, &pre) in dh.iter_mut().zip(bt.h_pre.iter()) {
            if pre <= 0.0 {
                *g = 0.0;
            }
        }
        gb.b1 += &dh.sum_axis(Axis(0)).insert_axis(Axis(0));
        gb.w1 += &bt.ln2_out.t().dot(&dh);
        let dln2_out = dh.dot(&b.w1.t());
        let dx_mid_ln = layer_norm_backward(
            &dln2_out,
            &bt.ln2_xhat,
            &bt.ln2_rstd,
            &b.ln2_g,
            &mut gb.ln2_g,
            &mut gb.ln2_b,
        );
        let dx_mid = &dx + &dx_mid_ln;

        // Attention branch.
        let mut dattn = dx_mid.clone();
        if let Some(m) = &bt.attn_mask {
            dattn *= m;
        }
        gb.bo += &dattn.sum_axis(Axis(0)).insert_axis(Axis(0));
        gb.wo += &bt.ctx.t().dot(&dattn);
        let dctx = dattn.dot(&b.wo.t());
        let mut dq = Array2::zeros((t, d));
        let mut dkm = Array2::zeros((t, d));
        let mut dv = Array2::zeros((t, d));
        for h in 0..cfg.num_heads {
            let cols = s![.., h * dk..(h + 1) * dk];
            let ph = &bt.probs[h];
            let vh = bt.v.slice(cols);
            let dch = dctx.slice(cols);
            dv.slice_mut(cols).assign(&ph.t().dot(&dch));
            let dp = dch.dot(&vh.t());
            // Softmax backward; rows of ph are zero outside the visible
            // range, which zeroes the corresponding dS entries.
            let mut ds = Array2::zeros((t, t));
            for i in 0..t {
                let dot = dp
                    .row(i)
                    .iter()
                    .zip(ph.row(i).iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
                for j in 0..t {
                    ds[[i, j]] = ph[[i, j]] * (dp[[i, j]] - dot);
                }
            }
            let qh = bt.q.slice(cols);
            let kh = bt.k.slice(cols);
            dq.slice_mut(cols).assign(&(ds.dot(&kh) * scale_qk));
            dkm.slice_mut(cols).assign(&(ds.t().dot(&qh) * scale_qk));
        }
        gb.bq += &dq.sum_axis(Axis(0)).insert_axis(Axis(0));
        gb.bk += &dkm.sum_axis(Axis(0)).insert_axis(Axis(0));
        gb.bv += &dv.sum_axis(Axis(0)).insert_axis(Axis(0));
        gb.wq += &bt.ln1_out.t().dot(&dq);
        gb.wk += &bt.ln1_out.t().dot(&dkm);
        gb.wv += &bt.ln1_out.t().dot(&dv);
        let dln1_out = dq.dot(&b.wq.t()) + dkm.dot(&b.wk.t()) + dv.dot(&b.wv.t());
        let dx_in_ln = layer_norm_backward(
            &dln1_out,
            &bt.ln1_xhat,
            &bt.ln1_rstd,
            &b.ln1_g,
            &mut gb.ln1_g,
            &mut gb.ln1_b,
        );
        dx = &dx_mid + &dx_in_ln;
    }

    if let Some(m) = &tape.emb_mask {
        dx *= m;
    }
    for (i, &id) in tape.ids.iter().enumerate() {
        let row = dx.row(i);
        let mut emb = grads.tok_emb.row_mut(id);
        emb += &row;
        let mut pos = grads.pos_emb.row_mut(i);
        pos += &row;
    }

    // Raw summed cross-entropy; callers divide by the batch token count
    // (the same `scale` applied to the gradients).
    loss
}
