//! Retentive network over orbital tokens, with equivalent parallel and
//! recurrent evaluation.

use super::transformer::{feed_forward, head, input_tokens};
use super::{AnsatzConfig, AnsatzError, AnsatzState, Architecture, BOS_TOKEN};
use crate::numeric::{BoundParams, Graph, Tensor, Var};

/// Width of every attention/retention head.
pub const HEAD_DIM: usize = 8;

/// Decay of head `h`.
fn gamma(h: usize) -> f64 {
    1.0 - 2f64.powi(-5 - h as i32)
}

/// Rotation angle of column `c` at `position`.
fn angle(position: usize, c: usize) -> f64 {
    let pair = (c % HEAD_DIM) / 2;
    position as f64 * 10000f64.powf(-(pair as f64) / (HEAD_DIM / 2) as f64)
}

/// Cosine and sine tables `[len, d]` for positions `start..start + len`.
fn rotation_tables(start: usize, len: usize, d: usize) -> (Tensor, Tensor) {
    let mut c = Tensor::zeros(len, d);
    let mut s = Tensor::zeros(len, d);
    for r in 0..len {
        for col in 0..d {
            let a = angle(start + r, col);
            c.set(r, col, a.cos());
            s.set(r, col, a.sin());
        }
    }
    (c, s)
}

/// Pair-swap matrix with `(a, b) P = (-b, a)` on each column pair.
fn pair_swap(d: usize) -> Tensor {
    let mut p = Tensor::zeros(d, d);
    for i in (0..d).step_by(2) {
        p.set(i + 1, i, -1.0);
        p.set(i, i + 1, 1.0);
    }
    p
}

fn rotate(g: &mut Graph, x: Var, cos: Var, sin: Var, swap: Var) -> Result<Var, AnsatzError> {
    let a = g.mul(x, cos)?;
    let b = g.matmul(x, swap)?;
    let b = g.mul(b, sin)?;
    Ok(g.add(a, b)?)
}

/// Decay matrix `D[n, m] = gamma^(n - m)` for `n >= m`, else 0.
fn decay_matrix(len: usize, gamma: f64) -> Tensor {
    let mut t = Tensor::zeros(len, len);
    for n in 0..len {
        for m in 0..=n {
            t.set(n, m, gamma.powi((n - m) as i32));
        }
    }
    t
}

/// Post-retention group norm, output projection and residual.
fn mix_output(
    g: &mut Graph,
    bound: &BoundParams,
    prefix: &str,
    cfg: &AnsatzConfig,
    x: Var,
    heads: &[Var],
) -> Result<Var, AnsatzError> {
    let p = |s: &str| bound.get(&format!("{prefix}{s}"));
    let o = g.concat_cols(heads)?;
    let o = g.group_norm(o, cfg.n_heads(), p("gn.g"), p("gn.b"))?;
    let o = g.matmul(o, p("mix.wo"))?;
    Ok(g.add(x, o)?)
}

struct Projections {
    q: Var,
    k: Var,
    v: Var,
}

fn project(
    g: &mut Graph,
    bound: &BoundParams,
    prefix: &str,
    x: Var,
    start: usize,
) -> Result<Projections, AnsatzError> {
    let p = |s: &str| bound.get(&format!("{prefix}{s}"));
    let (len, d) = (g.value(x).rows(), g.value(x).cols());
    let (c, s) = rotation_tables(start, len, d);
    let (c, s) = (g.constant(c), g.constant(s));
    let swap = g.constant(pair_swap(d));
    let h = g.layer_norm(x, p("ln1.g"), p("ln1.b"))?;
    let q = g.matmul(h, p("mix.wq"))?;
    let k = g.matmul(h, p("mix.wk"))?;
    let v = g.matmul(h, p("mix.wv"))?;
    Ok(Projections {
        q: rotate(g, q, c, s, swap)?,
        k: rotate(g, k, c, s, swap)?,
        v,
    })
}

/// Logits `[L, 4]` via parallel retention, `L = min(len + 1, n/2)`.
pub(super) fn logits_parallel(
    g: &mut Graph,
    bound: &BoundParams,
    cfg: &AnsatzConfig,
    tokens: &[usize],
) -> Result<Var, AnsatzError> {
    let inputs = input_tokens(cfg, tokens);
    let len = inputs.len();
    let mut x = g.embed(bound.get("mod.tok_emb"), &inputs)?;
    for b in 0..cfg.n_blocks {
        let prefix = format!("mod.block{b}.");
        let pr = project(g, bound, &prefix, x, 0)?;
        let mut heads = Vec::with_capacity(cfg.n_heads());
        for hd in 0..cfg.n_heads() {
            let (lo, hi) = (hd * HEAD_DIM, (hd + 1) * HEAD_DIM);
            let qh = g.slice_cols(pr.q, lo, hi)?;
            let kh = g.slice_cols(pr.k, lo, hi)?;
            let vh = g.slice_cols(pr.v, lo, hi)?;
            let kt = g.transpose(kh)?;
            let s = g.matmul(qh, kt)?;
            let dm = g.constant(decay_matrix(len, gamma(hd)));
            let s = g.mul(s, dm)?;
            heads.push(g.matmul(s, vh)?);
        }
        x = mix_output(g, bound, &prefix, cfg, x, &heads)?;
        x = feed_forward(g, bound, &prefix, x)?;
    }
    head(g, bound, x)
}

/// Per-block, per-head `HEAD_DIM x HEAD_DIM` retention states plus the next
/// position to be generated.
#[derive(Debug, Clone, PartialEq)]
pub struct RetentionState {
    position: usize,
    heads: Vec<Vec<Tensor>>,
}

impl RetentionState {
    pub fn new(cfg: &AnsatzConfig) -> Self {
        Self {
            position: 0,
            heads: (0..cfg.n_blocks)
                .map(|_| {
                    (0..cfg.n_heads())
                        .map(|_| Tensor::zeros(HEAD_DIM, HEAD_DIM))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn heads(&self) -> &[Vec<Tensor>] {
        &self.heads
    }
}

/// One recurrent step. `prev_token` is the orbital token at
/// `position - 1` (ignored at position 0, where BOS is fed). Returns
/// unconstrained log-probabilities of the four outcomes at `position`.
pub fn retnet_forward_recurrent(
    state: &AnsatzState,
    rs: &RetentionState,
    prev_token: usize,
) -> Result<(Vec<f64>, RetentionState), AnsatzError> {
    state.check_architecture(Architecture::RetNet)?;
    let cfg = state.config();
    if rs.position >= cfg.n_seq() {
        return Err(AnsatzError::SequenceTooLong {
            len: rs.position + 1,
            max: cfg.n_seq(),
        });
    }
    if rs.heads.len() != cfg.n_blocks || rs.heads.iter().any(|h| h.len() != cfg.n_heads()) {
        return Err(AnsatzError::StateShape(format!(
            "expected {} blocks of {} heads",
            cfg.n_blocks,
            cfg.n_heads()
        )));
    }
    let token = if rs.position == 0 { BOS_TOKEN } else { prev_token };
    if token > BOS_TOKEN {
        return Err(AnsatzError::InvalidConfig(format!("token {token} out of range")));
    }
    let mut g = Graph::new();
    let bound = g.bind(state.params());
    let mut x = g.embed(bound.get("mod.tok_emb"), &[token])?;
    let mut next = rs.clone();
    next.position += 1;
    for b in 0..cfg.n_blocks {
        let prefix = format!("mod.block{b}.");
        let pr = project(&mut g, &bound, &prefix, x, rs.position)?;
        let mut heads = Vec::with_capacity(cfg.n_heads());
        for hd in 0..cfg.n_heads() {
            let (lo, hi) = (hd * HEAD_DIM, (hd + 1) * HEAD_DIM);
            let k = g.value(pr.k).data()[lo..hi].to_vec();
            let v = g.value(pr.v).data()[lo..hi].to_vec();
            let s = &mut next.heads[b][hd];
            let gm = gamma(hd);
            for (i, ki) in k.iter().enumerate() {
                for (j, vj) in v.iter().enumerate() {
                    s.set(i, j, gm * s.get(i, j) + ki * vj);
                }
            }
            let qh = g.slice_cols(pr.q, lo, hi)?;
            let sv = g.constant(s.clone());
            heads.push(g.matmul(qh, sv)?);
        }
        x = mix_output(&mut g, &bound, &prefix, cfg, x, &heads)?;
        x = feed_forward(&mut g, &bound, &prefix, x)?;
    }
    let logits = head(&mut g, &bound, x)?;
    let lp = g.log_softmax(logits)?;
    Ok((g.value(lp).data().to_vec(), next))
}
