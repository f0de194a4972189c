//! Feedforward phase network on `+-1` spins.

use super::{AnsatzConfig, AnsatzError};
use crate::numeric::{BoundParams, Graph, Tensor, Var};
use crate::pauli::Config;

/// Scalar `[1, 1]` phase.
pub(super) fn forward(
    g: &mut Graph,
    bound: &BoundParams,
    cfg: &AnsatzConfig,
    x: Config,
) -> Result<Var, AnsatzError> {
    let spins: Vec<f64> = (0..cfg.n_qubits)
        .map(|j| if x.bit(j) { 1.0 } else { -1.0 })
        .collect();
    let mut h = g.constant(Tensor::row(spins));
    let layers = cfg.phase_hidden.len() + 1;
    for l in 0..layers {
        let w = bound.get(&format!("phase.{l}.w"));
        let b = bound.get(&format!("phase.{l}.b"));
        let z = g.matmul(h, w)?;
        h = g.add(z, b)?;
        if l + 1 < layers {
            h = g.relu(h)?;
        }
    }
    Ok(h)
}
