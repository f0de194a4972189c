//! Decoder-only pre-LN transformer over orbital tokens.

use super::{AnsatzConfig, AnsatzError, BOS_TOKEN, HEAD_DIM};
use crate::numeric::{BoundParams, Graph, Var, MASK_VALUE};

/// Input sequence `[BOS, t_0, .., t_{L-1}]`, truncated to `n_seq` tokens.
pub(super) fn input_tokens(cfg: &AnsatzConfig, tokens: &[usize]) -> Vec<usize> {
    let len = (tokens.len() + 1).min(cfg.n_seq());
    std::iter::once(BOS_TOKEN)
        .chain(tokens.iter().copied())
        .take(len)
        .collect()
}

/// Position-wise feed-forward sublayer with residual: `x + W2 relu(W1 LN(x))`.
pub(super) fn feed_forward(
    g: &mut Graph,
    bound: &BoundParams,
    prefix: &str,
    x: Var,
) -> Result<Var, AnsatzError> {
    let p = |s: &str| bound.get(&format!("{prefix}{s}"));
    let h = g.layer_norm(x, p("ln2.g"), p("ln2.b"))?;
    let h = g.matmul(h, p("ff1.w"))?;
    let h = g.add(h, p("ff1.b"))?;
    let h = g.relu(h)?;
    let h = g.matmul(h, p("ff2.w"))?;
    let h = g.add(h, p("ff2.b"))?;
    Ok(g.add(x, h)?)
}

/// Final layer norm and output head.
pub(super) fn head(g: &mut Graph, bound: &BoundParams, x: Var) -> Result<Var, AnsatzError> {
    let h = g.layer_norm(x, bound.get("mod.ln_f.g"), bound.get("mod.ln_f.b"))?;
    let h = g.matmul(h, bound.get("mod.head.w"))?;
    Ok(g.add(h, bound.get("mod.head.b"))?)
}

fn causal_mask(len: usize) -> Vec<bool> {
    (0..len * len).map(|i| i % len > i / len).collect()
}

/// Logits `[L, 4]` for orbitals `0..L`, where `L = min(len + 1, n/2)`.
pub(super) fn logits(
    g: &mut Graph,
    bound: &BoundParams,
    cfg: &AnsatzConfig,
    tokens: &[usize],
) -> Result<Var, AnsatzError> {
    let inputs = input_tokens(cfg, tokens);
    let len = inputs.len();
    let tok = g.embed(bound.get("mod.tok_emb"), &inputs)?;
    let positions: Vec<usize> = (0..len).collect();
    let pos = g.embed(bound.get("mod.pos_emb"), &positions)?;
    let mut x = g.add(tok, pos)?;
    let mask = causal_mask(len);
    let scale = 1.0 / (HEAD_DIM as f64).sqrt();
    for b in 0..cfg.n_blocks {
        let prefix = format!("mod.block{b}.");
        let p = |s: &str| bound.get(&format!("{prefix}{s}"));
        let h = g.layer_norm(x, p("ln1.g"), p("ln1.b"))?;
        let q = g.matmul(h, p("mix.wq"))?;
        let k = g.matmul(h, p("mix.wk"))?;
        let v = g.matmul(h, p("mix.wv"))?;
        let mut heads = Vec::with_capacity(cfg.n_heads());
        for hd in 0..cfg.n_heads() {
            let (lo, hi) = (hd * HEAD_DIM, (hd + 1) * HEAD_DIM);
            let qh = g.slice_cols(q, lo, hi)?;
            let kh = g.slice_cols(k, lo, hi)?;
            let vh = g.slice_cols(v, lo, hi)?;
            let kt = g.transpose(kh)?;
            let s = g.matmul(qh, kt)?;
            let s = g.scale(s, scale)?;
            let s = g.masked_fill(s, &mask, MASK_VALUE)?;
            let a = g.softmax(s)?;
            heads.push(g.matmul(a, vh)?);
        }
        let o = g.concat_cols(&heads)?;
        let o = g.matmul(o, p("mix.wo"))?;
        x = g.add(x, o)?;
        x = feed_forward(g, bound, &prefix, x)?;
    }
    head(g, bound, x)
}

