use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{cosine_lr, draw_schedule, energy_and_variance, gradient, local_energies, vscore, Adam, EnergyEstimate, VmcError};
use crate::ansatz::{AnsatzConfig, AnsatzState, Architecture};
use crate::flops::{simplified_flops, training_flops, FlopInputs};
use crate::oracle::ground_energy;
use crate::pauli::{group_flip_patterns, FlipGroups, PauliHamiltonian};
use crate::sampler::{sample_unique, SampleSet};
use crate::scaling::scaled_iterations;

/// Largest system for which a missing reference energy is computed exactly.
pub const ORACLE_REFERENCE_QUBITS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub max_unique: usize,
    pub draws_start: f64,
    pub draws_end: f64,
    pub lr_peak: f64,
    pub lr_floor: f64,
    pub warmup_fraction: f64,
    /// Batch reuse period during the early phase.
    pub recompute_every: usize,
    /// Fraction of training during which batches are reused.
    pub recompute_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            max_unique: 1000,
            draws_start: 1e4,
            draws_end: 1e12,
            lr_peak: 2.5e-3,
            lr_floor: 5e-8,
            warmup_fraction: 0.04,
            recompute_every: 10,
            recompute_fraction: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), VmcError> {
        let bad = |m: &str| Err(VmcError::InvalidConfig(m.to_string()));
        if self.steps == 0 {
            return bad("steps must be positive");
        }
        if self.max_unique == 0 {
            return bad("max_unique must be positive");
        }
        if !(self.draws_start >= 1.0 && self.draws_end >= self.draws_start) {
            return bad("draw schedule must satisfy 1 <= start <= end");
        }
        if !(self.lr_peak > 0.0 && self.lr_floor >= 0.0 && self.lr_floor <= self.lr_peak) {
            return bad("learning rates must satisfy 0 <= floor <= peak, peak > 0");
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return bad("warmup_fraction must lie in (0, 1)");
        }
        if self.recompute_every == 0 {
            return bad("recompute_every must be positive");
        }
        if !(0.0..=1.0).contains(&self.recompute_fraction) {
            return bad("recompute_fraction must lie in [0, 1]");
        }
        Ok(())
    }

    fn reuses_batch(&self, step: usize) -> bool {
        (step as f64) < self.recompute_fraction * self.steps as f64 && !step.is_multiple_of(self.recompute_every)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Diverged,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Diverged => "diverged",
            RunStatus::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(RunStatus::Ok),
            "diverged" => Some(RunStatus::Diverged),
            "failed" => Some(RunStatus::Failed),
            _ => None,
        }
    }
}

/// Metrics of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub architecture: Architecture,
    pub n_qubits: usize,
    pub n_electrons: Option<usize>,
    pub n_raw: usize,
    /// Parameters in thousands.
    pub n_k: f64,
    pub steps: usize,
    pub max_unique: usize,
    pub b_mean: f64,
    pub search_fraction: f64,
    pub d_prime: f64,
    pub energy: f64,
    pub variance: f64,
    pub vscore: Option<f64>,
    pub abs_error: Option<f64>,
    pub flops_table1: f64,
    pub flops_simplified: f64,
    pub status: RunStatus,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub record: RunRecord,
    pub state: AnsatzState,
    /// Energy estimate at every step (stale on batch-reuse steps).
    pub energies: Vec<f64>,
}

struct Batch {
    samples: SampleSet,
    locals: Vec<Complex64>,
    estimate: EnergyEstimate,
}

fn evaluate(
    state: &AnsatzState,
    groups: &FlipGroups,
    draws: u64,
    max_unique: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Batch, VmcError> {
    let samples = sample_unique(state, draws, max_unique, rng)?;
    let locals = local_energies(state, groups, &samples.configs)?;
    let estimate = energy_and_variance(&samples, &locals)?;
    if !estimate.energy.is_finite() || !estimate.variance.is_finite() {
        return Err(VmcError::NonFinite("energy estimate"));
    }
    Ok(Batch {
        samples,
        locals,
        estimate,
    })
}

/// Reference ground energy: the file's value, else the exact oracle for
/// small systems.
pub fn reference_energy(h: &PauliHamiltonian) -> Option<f64> {
    h.fci_energy().or_else(|| {
        (h.n_qubits() <= ORACLE_REFERENCE_QUBITS)
            .then(|| ground_energy(h).ok())
            .flatten()
    })
}

/// Trains an ansatz on `h`. The ansatz is constrained to the Hamiltonian's
/// particle sector. Divergence ends training early with a flagged record.
pub fn train(
    h: &PauliHamiltonian,
    ansatz: &AnsatzConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome, VmcError> {
    config.validate()?;
    let ansatz = ansatz.clone().with_sector(h.sector());
    if ansatz.n_qubits != h.n_qubits() {
        return Err(VmcError::InvalidConfig(format!(
            "ansatz has {} qubits, Hamiltonian {}",
            ansatz.n_qubits,
            h.n_qubits()
        )));
    }
    let mut state = AnsatzState::new(ansatz)?;
    let groups = group_flip_patterns(h);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new();
    let mut batch: Option<Batch> = None;
    let mut unique_sum = 0usize;
    let mut energies = Vec::with_capacity(config.steps);
    let mut status = RunStatus::Ok;
    let t = config.steps;

    let mut step_once = |step: usize, state: &mut AnsatzState, batch: &mut Option<Batch>| -> Result<usize, VmcError> {
        if batch.is_none() || !config.reuses_batch(step) {
            let draws = draw_schedule(step, t, config.draws_start, config.draws_end);
            *batch = Some(evaluate(state, &groups, draws, config.max_unique, &mut rng)?);
        }
        let b = batch.as_ref().expect("batch present");
        let weights: Vec<f64> = b.samples.counts.iter().map(|&c| c as f64).collect();
        let grads = gradient(state, &b.samples.configs, &weights, &b.locals, Some(b.estimate.energy))?;
        let lr = cosine_lr(step, t, config.lr_peak, config.lr_floor, config.warmup_fraction);
        adam.step(state.params_mut(), &grads, lr);
        energies.push(b.estimate.energy);
        Ok(b.samples.len())
    };

    let mut completed = 0;
    for step in 0..t {
        match step_once(step, &mut state, &mut batch) {
            Ok(unique) => {
                unique_sum += unique;
                completed += 1;
            }
            Err(e) if e.is_divergence() => {
                log::warn!("training diverged at step {step}: {e}");
                status = RunStatus::Diverged;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let energies_out = energies;

    let final_batch = if status == RunStatus::Ok {
        match evaluate(&state, &groups, config.draws_end as u64, config.max_unique, &mut rng) {
            Ok(b) => Some(b),
            Err(e) if e.is_divergence() => {
                status = RunStatus::Diverged;
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let (energy, variance) = final_batch
        .as_ref()
        .map_or((f64::NAN, f64::NAN), |b| (b.estimate.energy, b.estimate.variance));
    let b_mean = if completed > 0 {
        unique_sum as f64 / completed as f64
    } else {
        0.0
    };
    let record = build_record(h, &state, &groups, config, completed, b_mean, energy, variance, status);
    Ok(TrainOutcome {
        record,
        state,
        energies: energies_out,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_record(
    h: &PauliHamiltonian,
    state: &AnsatzState,
    groups: &FlipGroups,
    config: &TrainConfig,
    completed: usize,
    b_mean: f64,
    energy: f64,
    variance: f64,
    status: RunStatus,
) -> RunRecord {
    let cfg = state.config();
    let n = h.n_qubits();
    let space = h.search_space_size().map_or(f64::INFINITY, |s| s as f64);
    let (search_fraction, d_prime) = scaled_iterations(config.steps as f64, b_mean, space);
    let n_mod = state.params().modulus_count() as f64;
    let n_ph = state.params().phase_count() as f64;
    let n_raw = state.params().total_count();
    let m = groups.count() as f64;
    let inputs = FlopInputs {
        n_qubits: n as f64,
        batch: b_mean.max(1.0),
        steps: completed as f64,
        flip_groups: m,
        n_mod,
        n_ph,
        n_blocks: cfg.n_blocks as f64,
        d_model: cfg.d_model as f64,
    };
    let estimate = EnergyEstimate {
        energy,
        variance,
        unique_count: 0,
    };
    let ok = status == RunStatus::Ok;
    RunRecord {
        architecture: cfg.architecture,
        n_qubits: n,
        n_electrons: h.n_electrons(),
        n_raw,
        n_k: n_raw as f64 / 1000.0,
        steps: config.steps,
        max_unique: config.max_unique,
        b_mean,
        search_fraction,
        d_prime,
        energy,
        variance,
        vscore: if ok { vscore(&estimate, n, h.identity_weight()) } else { None },
        abs_error: if ok { reference_energy(h).map(|e| (energy - e).abs()) } else { None },
        flops_table1: training_flops(cfg.architecture, &inputs),
        flops_simplified: simplified_flops(
            cfg.architecture,
            m,
            n as f64,
            cfg.d_model.max(1) as f64,
            space,
            d_prime,
            n_raw as f64,
        ),
        status,
        seed: config.seed,
    }
}
