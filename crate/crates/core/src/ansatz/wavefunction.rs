//! Amplitude access shared by trained ansatze and reference states.

use std::collections::HashMap;

use num_complex::Complex64;

use super::{log_amplitude, AnsatzError, AnsatzState};
use crate::pauli::Config;

/// Anything that can report `log<x|psi>` on its support.
pub trait Wavefunction: Sync {
    fn n_qubits(&self) -> usize;
    /// Whether `x` carries a nonzero amplitude by construction.
    fn is_feasible(&self, x: Config) -> bool;
    fn log_amplitude(&self, x: Config) -> Result<Complex64, AnsatzError>;
}

impl Wavefunction for AnsatzState {
    fn n_qubits(&self) -> usize {
        AnsatzState::n_qubits(self)
    }

    fn is_feasible(&self, x: Config) -> bool {
        AnsatzState::is_feasible(self, x)
    }

    fn log_amplitude(&self, x: Config) -> Result<Complex64, AnsatzError> {
        log_amplitude(self, x)
    }
}

/// Explicit amplitude table; configurations absent from it have amplitude 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupState {
    n_qubits: usize,
    amplitudes: HashMap<Config, Complex64>,
}

impl LookupState {
    /// Normalizes `amplitudes` and drops exact zeros.
    pub fn new(n_qubits: usize, amplitudes: impl IntoIterator<Item = (Config, Complex64)>) -> Self {
        let amplitudes: HashMap<Config, Complex64> =
            amplitudes.into_iter().filter(|(_, a)| a.norm_sqr() > 0.0).collect();
        let norm = amplitudes.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        Self {
            n_qubits,
            amplitudes: amplitudes.into_iter().map(|(x, a)| (x, a / norm)).collect(),
        }
    }

    pub fn amplitude(&self, x: Config) -> Complex64 {
        self.amplitudes.get(&x).copied().unwrap_or_default()
    }
}

impl Wavefunction for LookupState {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn is_feasible(&self, x: Config) -> bool {
        self.amplitudes.contains_key(&x)
    }

    fn log_amplitude(&self, x: Config) -> Result<Complex64, AnsatzError> {
        self.amplitudes
            .get(&x)
            .map(|a| a.ln())
            .ok_or_else(|| AnsatzError::Infeasible(x.to_string(self.n_qubits)))
    }
}
