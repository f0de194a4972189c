//! Variational Monte Carlo: local energies, sample statistics, the
//! log-derivative gradient estimator, optimizer and training loop.

mod optim;
mod train;

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::ansatz::{log_amplitude_on_graph, AnsatzError, AnsatzState, Wavefunction};
use crate::numeric::{Graph, NumericError, Tensor};
use crate::pauli::{Config, FlipGroups};
use crate::sampler::{SampleSet, SamplerError};

pub use optim::{cosine_lr, draw_schedule, Adam};
pub use train::{reference_energy, train, RunRecord, RunStatus, TrainConfig, TrainOutcome, ORACLE_REFERENCE_QUBITS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VmcError {
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("empty batch")]
    EmptyBatch,
    #[error("{0}")]
    InvalidConfig(String),
}

impl VmcError {
    /// True for failures that indicate numerical divergence of training.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            VmcError::NonFinite(_)
                | VmcError::Ansatz(AnsatzError::Numeric(NumericError::NonFinite { .. }))
                | VmcError::Sampler(SamplerError::Ansatz(AnsatzError::Numeric(NumericError::NonFinite { .. })))
        )
    }
}

impl From<NumericError> for VmcError {
    fn from(e: NumericError) -> Self {
        VmcError::Ansatz(AnsatzError::Numeric(e))
    }
}

/// Weighted energy statistics of one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEstimate {
    pub energy: f64,
    pub variance: f64,
    pub unique_count: usize,
}

/// `l(x) = sum_x' <x|H|x'> psi(x') / psi(x)`; infeasible `x'` contribute 0.
pub fn local_energy<W: Wavefunction + ?Sized>(
    psi: &W,
    groups: &FlipGroups,
    x: Config,
) -> Result<Complex64, VmcError> {
    Ok(local_energies(psi, groups, &[x])?[0])
}

/// Local energies of many configurations. Each distinct connected
/// configuration is evaluated once.
pub fn local_energies<W: Wavefunction + ?Sized>(
    psi: &W,
    groups: &FlipGroups,
    configs: &[Config],
) -> Result<Vec<Complex64>, VmcError> {
    let connected: Vec<Vec<(Config, Complex64)>> = configs
        .iter()
        .map(|&x| {
            groups
                .connected_elements(x)
                .into_iter()
                .filter(|&(y, v)| v.norm_sqr() > 0.0 && psi.is_feasible(y))
                .collect()
        })
        .collect();
    let mut needed: Vec<Config> = configs
        .iter()
        .copied()
        .chain(connected.iter().flatten().map(|&(y, _)| y))
        .collect();
    needed.sort_unstable();
    needed.dedup();
    let values: Vec<Complex64> = needed
        .par_iter()
        .map(|&y| psi.log_amplitude(y))
        .collect::<Result<_, _>>()?;
    let log_amp: HashMap<Config, Complex64> = needed.into_iter().zip(values).collect();
    configs
        .iter()
        .zip(&connected)
        .map(|(x, row)| {
            let lx = log_amp[x];
            let l: Complex64 = row
                .iter()
                .map(|(y, v)| v.conj() * (log_amp[y] - lx).exp())
                .sum();
            if l.re.is_finite() && l.im.is_finite() {
                Ok(l)
            } else {
                Err(VmcError::NonFinite("local energy"))
            }
        })
        .collect()
}

/// Mean of `Re l` and population variance `sum w |l - E|^2` under
/// weights that are normalized internally.
pub fn weighted_energy_and_variance(weights: &[f64], locals: &[Complex64]) -> Result<EnergyEstimate, VmcError> {
    if weights.is_empty() || weights.len() != locals.len() {
        return Err(VmcError::EmptyBatch);
    }
    let total: f64 = weights.iter().sum();
    let energy = weights.iter().zip(locals).map(|(w, l)| w * l.re).sum::<f64>() / total;
    let variance = weights
        .iter()
        .zip(locals)
        .map(|(w, l)| w * (l - energy).norm_sqr())
        .sum::<f64>()
        / total;
    Ok(EnergyEstimate {
        energy,
        variance,
        unique_count: weights.len(),
    })
}

/// Count-weighted statistics of a sampled batch.
pub fn energy_and_variance(batch: &SampleSet, locals: &[Complex64]) -> Result<EnergyEstimate, VmcError> {
    let weights: Vec<f64> = batch.counts.iter().map(|&c| c as f64).collect();
    weighted_energy_and_variance(&weights, locals)
}

/// `n Var / (E - omega_0)^2`; `None` when the denominator vanishes.
pub fn vscore(estimate: &EnergyEstimate, n_qubits: usize, identity_weight: f64) -> Option<f64> {
    let shift = estimate.energy - identity_weight;
    let v = n_qubits as f64 * estimate.variance / (shift * shift);
    (shift != 0.0 && v.is_finite()).then_some(v)
}

/// Energy gradient `2 Re E[(l - b) grad log conj(psi)]` with `l` held fixed.
/// `baseline` defaults to the weighted mean energy.
pub fn gradient(
    state: &AnsatzState,
    configs: &[Config],
    weights: &[f64],
    locals: &[Complex64],
    baseline: Option<f64>,
) -> Result<BTreeMap<String, Tensor>, VmcError> {
    let est = weighted_energy_and_variance(weights, locals)?;
    let b = baseline.unwrap_or(est.energy);
    let total: f64 = weights.iter().sum();
    let parts: Vec<BTreeMap<String, Tensor>> = configs
        .par_iter()
        .zip(weights)
        .zip(locals)
        .map(|((&x, &w), l)| {
            let mut g = Graph::new();
            let bound = g.bind(state.params());
            let (re, im) = log_amplitude_on_graph(&mut g, &bound, state, x)?;
            let scale = 2.0 * w / total;
            let a = g.scale(re, scale * (l.re - b))?;
            let c = g.scale(im, scale * l.im)?;
            let s = g.add(a, c)?;
            Ok(g.backward(s)?.for_params(&g, &bound))
        })
        .collect::<Result<_, VmcError>>()?;
    let mut out: BTreeMap<String, Tensor> = state
        .params()
        .iter()
        .map(|(k, t)| (k.to_string(), Tensor::zeros(t.rows(), t.cols())))
        .collect();
    for part in parts {
        for (k, t) in part {
            out.get_mut(&k).expect("known parameter").add_assign(&t);
        }
    }
    if out.values().all(Tensor::all_finite) {
        Ok(out)
    } else {
        Err(VmcError::NonFinite("gradient"))
    }
}

#[cfg(test)]
mod tests;
