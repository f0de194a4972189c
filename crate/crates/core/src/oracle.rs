//! Exact references: sparse Hamiltonian matrices, ground states by dense
//! diagonalization or Lanczos, and brute-force ansatz expectations.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::ansatz::{AnsatzError, Wavefunction};
use crate::pauli::{feasible_configs, group_flip_patterns, Config, PauliHamiltonian};

/// Largest qubit count assembled without a sector restriction.
pub const MAX_FULL_QUBITS: usize = 14;
/// Largest qubit count assembled within a particle sector.
pub const MAX_SECTOR_QUBITS: usize = 24;
/// Largest qubit count for [`exact_expectation`].
pub const MAX_EXPECTATION_QUBITS: usize = 12;
/// Dimensions below this use dense diagonalization.
pub const DENSE_LIMIT: usize = 2048;
pub const LANCZOS_TOLERANCE: f64 = 1e-9;
pub const LANCZOS_MAX_ITERATIONS: usize = 5000;
const LANCZOS_RESTART: usize = 120;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{n_qubits} qubits exceeds the oracle limit of {limit}{}", if *.restricted { " (sector-restricted)" } else { "" })]
    TooLarge {
        n_qubits: usize,
        limit: usize,
        restricted: bool,
    },
    #[error("Lanczos did not reach residual {tolerance:e} in {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("empty configuration space")]
    Empty,
    #[error("dense spectrum requested for dimension {0}")]
    DenseTooLarge(usize),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
}

/// Hermitian operator in compressed-row form over an explicit basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    basis: Vec<Config>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Sorted basis configurations; index `i` is row/column `i`.
    pub fn basis(&self) -> &[Config] {
        &self.basis
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn index_of(&self, x: Config) -> Option<usize> {
        self.basis.binary_search(&x).ok()
    }

    /// Row `i` as `(column, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.row(i).find(|&(c, _)| c == j).map_or(Complex64::default(), |(_, v)| v)
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim())
            .into_par_iter()
            .map(|i| self.row(i).map(|(j, h)| h * v[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Largest `|H_ij - conj(H_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        (0..self.dim())
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Assembles `H` over all `2^n` configurations, or over the Hamiltonian's
/// particle sector when `restrict_to_sector` is set and a sector is declared.
pub fn build_operator(h: &PauliHamiltonian, restrict_to_sector: bool) -> Result<SparseOperator, OracleError> {
    let n = h.n_qubits();
    let sector = if restrict_to_sector { h.sector() } else { None };
    let limit = if sector.is_some() { MAX_SECTOR_QUBITS } else { MAX_FULL_QUBITS };
    if n > limit {
        return Err(OracleError::TooLarge {
            n_qubits: n,
            limit,
            restricted: sector.is_some(),
        });
    }
    let basis = feasible_configs(n, sector);
    if basis.is_empty() {
        return Err(OracleError::Empty);
    }
    let groups = group_flip_patterns(h);
    let rows: Vec<Vec<(usize, Complex64)>> = basis
        .par_iter()
        .map(|&x| {
            // connected_elements gives column x; row x holds the conjugates
            let mut row: Vec<(usize, Complex64)> = groups
                .connected_elements(x)
                .into_iter()
                .filter_map(|(y, v)| {
                    let j = basis.binary_search(&y).ok()?;
                    (v.norm_sqr() > 0.0).then_some((j, v.conj()))
                })
                .collect();
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();
    let mut row_ptr = Vec::with_capacity(basis.len() + 1);
    row_ptr.push(0);
    let (mut cols, mut vals) = (Vec::new(), Vec::new());
    for row in rows {
        for (j, v) in row {
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(SparseOperator {
        basis,
        row_ptr,
        cols,
        vals,
    })
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn residual(op: &SparseOperator, e: f64, v: &[Complex64]) -> f64 {
    let hv = op.apply(v);
    norm(&hv.iter().zip(v).map(|(a, b)| a - b * e).collect::<Vec<_>>())
}

/// Lowest eigenpair with a normalized eigenvector.
pub fn ground_state(op: &SparseOperator) -> Result<(f64, Vec<Complex64>), OracleError> {
    if op.dim() < DENSE_LIMIT {
        let eig = SymmetricEigen::new(op.to_dense());
        let k = eig.eigenvalues.imin();
        let v: Vec<Complex64> = eig.eigenvectors.column(k).iter().copied().collect();
        return Ok((eig.eigenvalues[k], v));
    }
    lanczos(op)
}

/// Restarted Lanczos with full reorthogonalization. Each cycle builds up to
/// `LANCZOS_RESTART` Krylov vectors and restarts from the current Ritz vector.
fn lanczos(op: &SparseOperator) -> Result<(f64, Vec<Complex64>), OracleError> {
    let dim = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut start: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), 0.0))
        .collect();
    let mut iterations = 0;
    let mut last = (f64::NAN, f64::INFINITY);
    while iterations < LANCZOS_MAX_ITERATIONS {
        let s = norm(&start);
        let mut basis: Vec<Vec<Complex64>> = vec![start.iter().map(|x| x / s).collect()];
        let (mut alpha, mut beta) = (Vec::new(), Vec::new());
        loop {
            iterations += 1;
            let q = basis.last().expect("nonempty");
            let mut w = op.apply(q);
            alpha.push(dot(q, &w).re);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let bn = norm(&w);
            let done = bn < 1e-12 || basis.len() >= LANCZOS_RESTART.min(dim) || iterations >= LANCZOS_MAX_ITERATIONS;
            if done {
                break;
            }
            beta.push(bn);
            basis.push(w.iter().map(|x| x / bn).collect());
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let m = eig.eigenvalues.imin();
        let e = eig.eigenvalues[m];
        let y = eig.eigenvectors.column(m);
        let mut v = vec![Complex64::default(); dim];
        for (coef, b) in y.iter().zip(&basis) {
            v.iter_mut().zip(b).for_each(|(x, q)| *x += q * *coef);
        }
        let vn = norm(&v);
        v.iter_mut().for_each(|x| *x /= vn);
        let r = residual(op, e, &v);
        last = (e, r);
        if r <= LANCZOS_TOLERANCE {
            return Ok((e, v));
        }
        start = v;
    }
    Err(OracleError::NotConverged {
        iterations,
        residual: last.1,
        tolerance: LANCZOS_TOLERANCE,
    })
}

/// Ground energy of `h`, using its particle sector when declared.
pub fn ground_energy(h: &PauliHamiltonian) -> Result<f64, OracleError> {
    Ok(ground_state(&build_operator(h, true)?)?.0)
}

/// All eigenvalues, ascending, by dense diagonalization.
pub fn spectrum(op: &SparseOperator) -> Result<Vec<f64>, OracleError> {
    if op.dim() > 2 * DENSE_LIMIT {
        return Err(OracleError::DenseTooLarge(op.dim()));
    }
    let mut e: Vec<f64> = SymmetricEigen::new(op.to_dense()).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

/// Writes `index,energy` rows.
pub fn write_spectrum_csv<W: Write>(w: W, energies: &[f64]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["index", "energy"])?;
    for (i, e) in energies.iter().enumerate() {
        out.write_record([i.to_string(), format!("{e:.15e}")])?;
    }
    out.flush()?;
    Ok(())
}

/// `(<H>, <H^2> - <H>^2)` by enumerating every configuration.
pub fn exact_expectation<W: Wavefunction + ?Sized>(
    psi: &W,
    h: &PauliHamiltonian,
) -> Result<(f64, f64), OracleError> {
    let n = h.n_qubits();
    if n > MAX_EXPECTATION_QUBITS {
        return Err(OracleError::TooLarge {
            n_qubits: n,
            limit: MAX_EXPECTATION_QUBITS,
            restricted: false,
        });
    }
    let op = build_operator(h, false)?;
    let v: Vec<Complex64> = op
        .basis()
        .iter()
        .map(|&x| {
            if psi.is_feasible(x) {
                Ok(psi.log_amplitude(x)?.exp())
            } else {
                Ok(Complex64::default())
            }
        })
        .collect::<Result<_, AnsatzError>>()?;
    let nn = dot(&v, &v).re;
    let hv = op.apply(&v);
    let e = dot(&v, &hv).re / nn;
    let h2 = dot(&hv, &hv).re / nn;
    Ok((e, (h2 - e * e).max(0.0)))
}
