//! Masked autoencoder over qubits with two logits per qubit.

use super::{AnsatzError, AnsatzState};
use crate::numeric::{BoundParams, Graph, Tensor, Var};
use crate::pauli::Config;

/// Connectivity masks with sequential degrees: input `i` has degree `i + 1`,
/// hidden unit `k` degree `k mod max(1, n - 1) + 1`, and both logits of
/// qubit `j` degree `j + 1`. Hidden layers use `>=`, the output layer `>`.
pub(super) fn masks(n: usize, hidden: &[usize]) -> Vec<Tensor> {
    let input: Vec<usize> = (1..=n).collect();
    let mut degrees = vec![input];
    for &h in hidden {
        degrees.push((0..h).map(|k| k % n.saturating_sub(1).max(1) + 1).collect());
    }
    let output: Vec<usize> = (0..2 * n).map(|o| o / 2 + 1).collect();
    let last = degrees.len() - 1;
    let mut out = Vec::with_capacity(degrees.len());
    for (l, d_in) in degrees.iter().enumerate() {
        let (d_out, strict) = if l == last {
            (&output, true)
        } else {
            (&degrees[l + 1], false)
        };
        let data = d_in
            .iter()
            .flat_map(|&a| {
                d_out
                    .iter()
                    .map(move |&b| if b > a || (!strict && b == a) { 1.0 } else { 0.0 })
            })
            .collect();
        out.push(Tensor::matrix(d_in.len(), d_out.len(), data));
    }
    out
}

/// Logits `[n, 2]`; row `j` depends only on qubits `< j`.
pub(super) fn logits(
    g: &mut Graph,
    bound: &BoundParams,
    state: &AnsatzState,
    x: Config,
) -> Result<Var, AnsatzError> {
    let n = state.n_qubits();
    let input: Vec<f64> = (0..n).map(|j| if x.bit(j) { 1.0 } else { -1.0 }).collect();
    let mut h = g.constant(Tensor::row(input));
    let masks = state.made_masks();
    for (l, mask) in masks.iter().enumerate() {
        let w = bound.get(&format!("mod.made.{l}.w"));
        let b = bound.get(&format!("mod.made.{l}.b"));
        let m = g.constant(mask.clone());
        let wm = g.mul(w, m)?;
        let z = g.matmul(h, wm)?;
        h = g.add(z, b)?;
        if l + 1 < masks.len() {
            h = g.relu(h)?;
        }
    }
    Ok(g.reshape(h, n, 2)?)
}
