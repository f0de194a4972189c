//! Exact autoregressive sampling of unique configurations with counts.
//!
//! A batch of `B` draws is split breadth-first: every partial configuration
//! carries a count, and its children receive a multinomial split of that count
//! under the conditional at the next position. Only distinct configurations
//! are ever evaluated, so `B` can be astronomically large.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::ansatz::{
    apply_particle_constraint, log_amplitude, next_logits, outcome_config, retnet_forward_recurrent,
    AnsatzError, AnsatzState, Architecture, RetentionState,
};
use crate::pauli::Config;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error("batch size must be positive")]
    EmptyBatch,
    #[error("max_unique must be positive")]
    NoCapacity,
}

/// Distinct configurations with their draw counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub configs: Vec<Config>,
    pub counts: Vec<u64>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// Total number of draws.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts normalized to sum to one.
    pub fn weights(&self) -> Vec<f64> {
        let t = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Config, u64)> + '_ {
        self.configs.iter().copied().zip(self.counts.iter().copied())
    }
}

struct Node {
    partial: Config,
    count: u64,
    retention: Option<RetentionState>,
}

/// Splits `n` draws over categories with probabilities `exp(log_probs)`.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, log_probs: &[f64]) -> Vec<u64> {
    let probs: Vec<f64> = log_probs.iter().map(|l| l.exp()).collect();
    let mut remaining_mass: f64 = probs.iter().sum();
    let mut remaining = n;
    let mut out = vec![0; probs.len()];
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == last {
            out[k] = remaining;
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let q = (p / remaining_mass).clamp(0.0, 1.0);
        let c = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        out[k] = c;
        remaining -= c;
        remaining_mass -= p;
    }
    out
}

/// Keeps the `max_unique` largest counts (ties to the smaller configuration)
/// and hands the dropped draws back to the survivors in proportion to their
/// counts, rounding by largest remainder, so the total is preserved.
fn truncate(nodes: Vec<Node>, max_unique: usize) -> Vec<Node> {
    if nodes.len() <= max_unique {
        return nodes;
    }
    let mut nodes = nodes;
    nodes.sort_by(|a, b| b.count.cmp(&a.count).then(a.partial.cmp(&b.partial)));
    let dropped: u128 = nodes[max_unique..].iter().map(|n| n.count as u128).sum();
    nodes.truncate(max_unique);
    let kept: u128 = nodes.iter().map(|n| n.count as u128).sum();
    let mut assigned = 0u128;
    let mut remainders = Vec::with_capacity(nodes.len());
    for (i, n) in nodes.iter_mut().enumerate() {
        let share = dropped * n.count as u128;
        let whole = share / kept;
        n.count += whole as u64;
        assigned += whole;
        remainders.push((share % kept, i));
    }
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take((dropped - assigned) as usize) {
        nodes[i].count += 1;
    }
    nodes
}

/// Draws `batch_size` configurations from `|psi|^2`, returning at most
/// `max_unique` distinct ones sorted by configuration. Counts always sum to
/// `batch_size`.
pub fn sample_unique<R: Rng + ?Sized>(
    state: &AnsatzState,
    batch_size: u64,
    max_unique: usize,
    rng: &mut R,
) -> Result<SampleSet, SamplerError> {
    if batch_size == 0 {
        return Err(SamplerError::EmptyBatch);
    }
    if max_unique == 0 {
        return Err(SamplerError::NoCapacity);
    }
    let cfg = state.config();
    let recurrent = cfg.architecture == Architecture::RetNet;
    let mut frontier = vec![Node {
        partial: Config(0),
        count: batch_size,
        retention: recurrent.then(|| RetentionState::new(cfg)),
    }];
    for position in 0..cfg.positions() {
        let mut next = Vec::with_capacity(frontier.len() * cfg.outcomes());
        for node in frontier {
            let (raw, retention) = match &node.retention {
                Some(rs) => {
                    let prev = if position == 0 { 0 } else { node.partial.orbital(position - 1) };
                    let (lp, rs) = retnet_forward_recurrent(state, rs, prev)?;
                    (lp, Some(rs))
                }
                None => (next_logits(state, node.partial, position)?, None),
            };
            let lp = apply_particle_constraint(cfg, position, node.partial, &raw)?;
            let split = multinomial(rng, node.count, &lp);
            for (outcome, &count) in split.iter().enumerate() {
                if count > 0 {
                    next.push(Node {
                        partial: outcome_config(cfg, node.partial, position, outcome),
                        count,
                        retention: retention.clone(),
                    });
                }
            }
        }
        frontier = truncate(next, max_unique);
    }
    frontier.sort_by_key(|n| n.partial);
    Ok(SampleSet {
        configs: frontier.iter().map(|n| n.partial).collect(),
        counts: frontier.iter().map(|n| n.count).collect(),
    })
}

/// `log |psi(x)|^2` for each configuration.
pub fn batch_log_probs(state: &AnsatzState, configs: &[Config]) -> Result<Vec<f64>, SamplerError> {
    configs
        .iter()
        .map(|&x| Ok(2.0 * log_amplitude(state, x)?.re))
        .collect()
}
