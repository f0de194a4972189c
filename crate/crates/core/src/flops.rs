//! FLOP estimators: per-sequence forward costs, sampling and loss counts,
//! closed-form training totals and the simplified `k * D' * N` forms.
//!
//! `log B` in the closed forms is base 4. All results are floating-point
//! estimates.

use thiserror::Error;

use crate::ansatz::Architecture;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlopError {
    #[error("{mode:?} forward pass is not defined for {architecture}")]
    InvalidMode {
        architecture: Architecture,
        mode: ForwardMode,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// One MADE pass over all qubits.
    Full,
    /// Whole-sequence attention or retention.
    Parallel,
    /// Token-by-token retention.
    Recurrent,
}

/// Counts entering the training totals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlopInputs {
    pub n_qubits: f64,
    /// Mean unique batch size `B`.
    pub batch: f64,
    pub steps: f64,
    /// Off-diagonal flip-group count `M`.
    pub flip_groups: f64,
    pub n_mod: f64,
    pub n_ph: f64,
    pub n_blocks: f64,
    pub d_model: f64,
}

pub fn log4(x: f64) -> f64 {
    x.ln() / 4f64.ln()
}

/// `floor(log4 b)` for `b >= 1`, computed exactly on integers.
pub fn floor_log4(b: u64) -> u32 {
    let mut k = 0;
    let mut p: u64 = 4;
    while p <= b {
        k += 1;
        match p.checked_mul(4) {
            Some(q) => p = q,
            None => break,
        }
    }
    k
}

/// Forward FLOPs of one pass. `n_params` is the modulus parameter count `N`.
pub fn forward_flops(
    architecture: Architecture,
    mode: ForwardMode,
    n_params: f64,
    n_seq: f64,
    n_blocks: f64,
    d_attn: f64,
) -> Result<f64, FlopError> {
    match (architecture, mode) {
        (Architecture::Made, ForwardMode::Full) => Ok(3.0 * n_params),
        (Architecture::Transformer | Architecture::RetNet, ForwardMode::Parallel) => {
            Ok(n_seq * (2.0 * n_params + 4.0 * n_blocks * n_seq * d_attn))
        }
        (Architecture::RetNet, ForwardMode::Recurrent) => {
            Ok(n_seq * (2.0 * n_params + 5.0 * n_blocks * d_attn * d_attn))
        }
        _ => Err(FlopError::InvalidMode { architecture, mode }),
    }
}

/// Sampling cost `F_mod T (sum_{m < L} 4^m + B (n/2 - L))`, `L = floor(log4 B)`.
pub fn sampling_flops(f_mod: f64, steps: f64, batch: u64, n_qubits: usize) -> f64 {
    let levels = floor_log4(batch.max(1));
    let tree: f64 = (0..levels).map(|m| 4f64.powi(m as i32)).sum();
    let tail = batch as f64 * (n_qubits as f64 / 2.0 - levels as f64);
    f_mod * steps * (tree + tail)
}

/// Local-energy construction and backpropagation cost
/// `B T (M + 3) ((n/2) F_mod + F_ph)`.
pub fn loss_flops(f_mod: f64, f_ph: f64, batch: f64, steps: f64, flip_groups: f64, n_qubits: f64) -> f64 {
    batch * steps * (flip_groups + 3.0) * (n_qubits / 2.0 * f_mod + f_ph)
}

/// Closed-form total training FLOPs.
pub fn training_flops(architecture: Architecture, x: &FlopInputs) -> f64 {
    let (n, m, lb) = (x.n_qubits, x.flip_groups, log4(x.batch.max(1.0)));
    let bt = x.batch * x.steps;
    let phase = 2.0 * (m + 3.0) * x.n_ph;
    match architecture {
        Architecture::Made => bt * ((1.5 * n + 3.0 * m + 10.0 - 3.0 * lb) * x.n_mod + phase),
        Architecture::RetNet => {
            bt * (((m + 4.0) * n - 2.0 * lb) * x.n_mod
                + phase
                + x.n_blocks
                    * x.d_model
                    * (2.5 * x.d_model * ((m + 1.0) * n - 2.0 * lb) + 3.0 * n * n))
        }
        Architecture::Transformer => {
            bt * (((m + 4.0) * n - 4.0 / 3.0 * lb) * x.n_mod
                + phase
                + x.n_blocks
                    * x.d_model
                    * ((m + 3.5) * n * n - 8.0 / 9.0 * lb - 2.0 / 3.0 * lb * lb))
        }
    }
}

/// Leading-order totals `C = k D' N` with `S` the search-space size.
pub fn simplified_flops(
    architecture: Architecture,
    flip_groups: f64,
    n_qubits: f64,
    d_model: f64,
    search_space: f64,
    d_prime: f64,
    n_raw: f64,
) -> f64 {
    simplified_coefficient(architecture, flip_groups, n_qubits, d_model) * search_space * d_prime * n_raw
}

/// The per-`S D' N` prefactor of [`simplified_flops`].
pub fn simplified_coefficient(architecture: Architecture, m: f64, n: f64, d_model: f64) -> f64 {
    match architecture {
        Architecture::Made => 3.0 * m,
        Architecture::RetNet => (15.5 * m * n + 3.0 * n * n / d_model) / 13.0,
        Architecture::Transformer => m * (n + n * n / (12.0 * d_model)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example() -> FlopInputs {
        FlopInputs {
            n_qubits: 4.0,
            batch: 16.0,
            steps: 1.0,
            flip_groups: 2.0,
            n_mod: 100.0,
            n_ph: 50.0,
            n_blocks: 1.0,
            d_model: 8.0,
        }
    }

    #[test]
    fn floor_log4_on_powers() {
        let cases = [(1, 0), (3, 0), (4, 1), (15, 1), (16, 2), (u64::MAX, 31)];
        for (b, k) in cases {
            assert_eq!(floor_log4(b), k, "b = {b}");
        }
    }

    #[test]
    fn forward_examples() {
        assert_eq!(
            forward_flops(Architecture::Made, ForwardMode::Full, 1000.0, 0.0, 0.0, 0.0),
            Ok(3000.0)
        );
        assert_eq!(
            forward_flops(Architecture::Transformer, ForwardMode::Parallel, 1000.0, 10.0, 1.0, 8.0),
            Ok(23200.0)
        );
        assert!(forward_flops(Architecture::Transformer, ForwardMode::Recurrent, 1.0, 1.0, 1.0, 8.0).is_err());
        assert!(forward_flops(Architecture::Made, ForwardMode::Parallel, 1.0, 1.0, 1.0, 8.0).is_err());
    }

    #[test]
    fn retnet_recurrent_wins_past_crossover() {
        // recurrent < parallel iff 5 d^2 < 4 n_seq d, i.e. n_seq > 1.25 d
        let d = 16.0;
        for n_seq in [10.0, 19.0, 21.0, 40.0] {
            let par = forward_flops(Architecture::RetNet, ForwardMode::Parallel, 5e3, n_seq, 2.0, d).unwrap();
            let rec = forward_flops(Architecture::RetNet, ForwardMode::Recurrent, 5e3, n_seq, 2.0, d).unwrap();
            assert_eq!(rec < par, n_seq > 1.25 * d, "n_seq {n_seq}");
        }
    }

    #[test]
    fn sampling_examples() {
        assert_eq!(sampling_flops(1.0, 1.0, 4, 4), 5.0);
        assert_eq!(sampling_flops(3.0, 7.0, 1, 10), 3.0 * 7.0 * 5.0);
        assert_eq!(sampling_flops(2.0, 10.0, 50, 12), 2.0 * sampling_flops(2.0, 5.0, 50, 12));
    }

    #[test]
    fn sampling_drops_when_batch_reaches_a_power_of_four() {
        // each new tree level replaces B tail evaluations with 4^L tree nodes
        assert_eq!(sampling_flops(1.0, 1.0, 3, 4), 6.0);
        assert_eq!(sampling_flops(1.0, 1.0, 4, 4), 5.0);
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss_flops(7.0, 0.0, 1.0, 1.0, 0.0, 6.0), 3.0 * 3.0 * 7.0);
        assert_eq!(loss_flops(100.0, 50.0, 16.0, 1.0, 2.0, 4.0), 20000.0);
    }

    #[test]
    fn training_examples() {
        assert_eq!(training_flops(Architecture::Made, &example()), 33600.0);
        let t = training_flops(Architecture::Transformer, &example());
        assert!((t - 52828.444).abs() < 1e-2, "{t}");
        let one = FlopInputs { batch: 1.0, ..example() };
        assert_eq!(
            training_flops(Architecture::Made, &one),
            (1.5 * 4.0 + 6.0 + 10.0) * 100.0 + 2.0 * 5.0 * 50.0
        );
    }

    #[test]
    fn made_total_matches_assembled_parts() {
        // with sum 4^m -> B/3 and floor log -> log, sampling + loss equals the closed form
        for &(b, n, m) in &[(64.0, 12.0, 5.0), (1024.0, 20.0, 30.0), (300.0, 16.0, 11.0)] {
            let x = FlopInputs { batch: b, n_qubits: n, flip_groups: m, ..example() };
            let f_mod = 3.0 * x.n_mod;
            let sampling = f_mod * x.steps * (b / 3.0 + b * (n / 2.0 - log4(b)));
            let loss = x.batch * x.steps * (m + 3.0) * (3.0 * x.n_mod + 2.0 * x.n_ph);
            let closed = training_flops(Architecture::Made, &x);
            let assembled = sampling + loss - b * x.steps * x.n_mod * (3.0 * n / 2.0 - 1.5 * n);
            assert!((assembled - closed).abs() / closed < 1e-12, "{assembled} vs {closed}");
            let exact = sampling_flops(f_mod, x.steps, b as u64, n as usize) + loss;
            assert!((exact - closed).abs() / closed < 0.1, "{exact} vs {closed}");
        }
    }

    #[test]
    fn simplified_examples() {
        let c = simplified_flops(Architecture::Made, 10.0, 8.0, 8.0, 441.0, 100.0, 1000.0);
        assert!((c - 1.323e9).abs() < 1.0);
        let t = simplified_coefficient(Architecture::Transformer, 10.0, 20.0, 1e9);
        assert!((t - 200.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn closed_forms_are_monotone(
            n_half in 2usize..15,
            b_exp in 0.0f64..1.0,
            m in 0.0f64..50.0,
            t in 1.0f64..1e4,
            n_mod in 1.0f64..1e6,
            n_ph in 1.0f64..1e4,
            d in 8.0f64..64.0,
        ) {
            let n = 2.0 * n_half as f64;
            // B never exceeds the configuration space
            let b = 2f64.powf(b_exp * (n - 1.0)).floor();
            let x = FlopInputs {
                n_qubits: n, batch: b, steps: t, flip_groups: m,
                n_mod, n_ph, n_blocks: 1.0, d_model: d,
            };
            for arch in [Architecture::Made, Architecture::Transformer, Architecture::RetNet] {
                let base = training_flops(arch, &x);
                let bumps = [
                    FlopInputs { batch: b + 1.0, ..x },
                    FlopInputs { steps: t * 1.5, ..x },
                    FlopInputs { flip_groups: m + 1.0, ..x },
                    FlopInputs { n_mod: n_mod * 1.5, ..x },
                    FlopInputs { n_ph: n_ph * 1.5, ..x },
                ];
                for bumped in bumps {
                    prop_assert!(training_flops(arch, &bumped) >= base);
                }
                let s = simplified_flops(arch, m, n, d, 441.0, 1.0, n_mod);
                prop_assert!(simplified_flops(arch, m + 1.0, n, d, 441.0, 1.0, n_mod) >= s);
                prop_assert!(simplified_flops(arch, m, n, d, 441.0, 2.0, n_mod) >= s);
            }
            let l = loss_flops(n_mod, n_ph, b, t, m, n);
            prop_assert!(loss_flops(n_mod, n_ph, b + 1.0, t, m, n) >= l);
            prop_assert!(loss_flops(n_mod, n_ph, b, t, m + 1.0, n) >= l);
            prop_assert!(loss_flops(n_mod * 2.0, n_ph, b, t, m, n) >= l);
        }
    }
}
