//! Particle-number masking of autoregressive conditionals.

use super::{AnsatzConfig, AnsatzError, Architecture};
use crate::pauli::{sector_capacity, Config, Sector};

/// Qubit range `[lo, hi)` written by `position`.
fn qubit_span(cfg: &AnsatzConfig, position: usize) -> (usize, usize) {
    match cfg.architecture {
        Architecture::Made => (position, position + 1),
        _ => (2 * position, 2 * position + 2),
    }
}

/// `partial` with `outcome` written at `position`.
pub fn outcome_config(cfg: &AnsatzConfig, partial: Config, position: usize, outcome: usize) -> Config {
    match cfg.architecture {
        Architecture::Made => partial.with_bit(position, outcome == 1),
        _ => partial.with_orbital(position, outcome),
    }
}

/// Outcomes at `position` that still admit a completion in `sector`, given
/// the qubits of `partial` before that position.
pub fn allowed_outcomes(
    cfg: &AnsatzConfig,
    sector: Sector,
    position: usize,
    partial: Config,
) -> Result<Vec<bool>, AnsatzError> {
    let n = cfg.n_qubits;
    let (lo, hi) = qubit_span(cfg, position);
    let (placed_up, placed_down) = partial.spin_counts(lo);
    let remaining_up = sector_capacity(n, 0) - sector_capacity(hi, 0);
    let remaining_down = sector_capacity(n, 1) - sector_capacity(hi, 1);
    let ok = |placed: usize, add: usize, target: usize, remaining: usize| {
        placed + add <= target && target - placed - add <= remaining
    };
    let allowed: Vec<bool> = (0..cfg.outcomes())
        .map(|o| {
            let (add_up, add_down) = outcome_config(cfg, Config(0), position, o).spin_counts(hi);
            ok(placed_up, add_up, sector.n_up, remaining_up)
                && ok(placed_down, add_down, sector.n_down, remaining_down)
        })
        .collect();
    if allowed.iter().any(|&a| a) {
        Ok(allowed)
    } else {
        Err(AnsatzError::InfeasiblePrefix { position })
    }
}

/// Masks infeasible outcomes of one unconstrained log-probability row and
/// renormalizes. Without a sector the row is only renormalized.
pub fn apply_particle_constraint(
    cfg: &AnsatzConfig,
    position: usize,
    partial: Config,
    logits: &[f64],
) -> Result<Vec<f64>, AnsatzError> {
    let allowed = match cfg.sector {
        Some(s) => allowed_outcomes(cfg, s, position, partial)?,
        None => vec![true; logits.len()],
    };
    let m = logits
        .iter()
        .zip(&allowed)
        .filter(|(_, &a)| a)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits
        .iter()
        .zip(&allowed)
        .filter(|(_, &a)| a)
        .map(|(&l, _)| (l - m).exp())
        .sum::<f64>()
        .ln();
    Ok(logits
        .iter()
        .zip(&allowed)
        .map(|(&l, &a)| if a { l - lse } else { f64::NEG_INFINITY })
        .collect())
}
