//! Autoregressive ansatze: MADE, transformer and RetNet modulus networks
//! paired with a feedforward phase network.
//!
//! `log<x|psi> = 1/2 * sum_j log p_j(x_j | x_<j) + i * phi(x)`. MADE
//! factorizes over qubits with binary outcomes; the transformer and RetNet
//! factorize over spatial orbitals with four outcomes (empty, up, down,
//! double), which is the same distribution grouped two qubits at a time.

mod constraint;
mod made;
mod phase;
mod retnet;
mod transformer;
mod wavefunction;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{BoundParams, Graph, NumericError, ParameterStore, Tensor, Var, MASK_VALUE};
use crate::pauli::{Config, Sector};

pub use constraint::{allowed_outcomes, apply_particle_constraint, outcome_config};
pub use retnet::{retnet_forward_recurrent, RetentionState, HEAD_DIM};
pub use wavefunction::{LookupState, Wavefunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnsatzError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("operation requires {expected:?}, ansatz is {found:?}")]
    WrongArchitecture {
        expected: Architecture,
        found: Architecture,
    },
    #[error("sequence of {len} tokens exceeds {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("configuration {0} is outside the particle sector")]
    Infeasible(String),
    #[error("partial configuration admits no feasible completion at position {position}")]
    InfeasiblePrefix { position: usize },
    #[error("invalid ansatz configuration: {0}")]
    InvalidConfig(String),
    #[error("recurrent state shape mismatch: {0}")]
    StateShape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Made,
    Transformer,
    RetNet,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Made => "made",
            Architecture::Transformer => "transformer",
            Architecture::RetNet => "retnet",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "made" => Some(Architecture::Made),
            "transformer" => Some(Architecture::Transformer),
            "retnet" => Some(Architecture::RetNet),
            _ => None,
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Token fed before the first orbital.
pub const BOS_TOKEN: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzConfig {
    pub architecture: Architecture,
    pub n_qubits: usize,
    /// Transformer/RetNet model width; a multiple of [`HEAD_DIM`].
    pub d_model: usize,
    pub n_blocks: usize,
    pub made_hidden: Vec<usize>,
    pub phase_hidden: Vec<usize>,
    /// Electron split enforced during sampling; `None` leaves all `2^n`
    /// configurations reachable.
    pub sector: Option<Sector>,
    pub seed: u64,
}

impl AnsatzConfig {
    pub fn made(n_qubits: usize, hidden: Vec<usize>) -> Self {
        Self {
            architecture: Architecture::Made,
            n_qubits,
            d_model: 0,
            n_blocks: 0,
            made_hidden: hidden,
            phase_hidden: vec![16],
            sector: None,
            seed: 0,
        }
    }

    pub fn transformer(n_qubits: usize, d_model: usize, n_blocks: usize) -> Self {
        Self {
            architecture: Architecture::Transformer,
            n_qubits,
            d_model,
            n_blocks,
            made_hidden: vec![],
            phase_hidden: vec![16],
            sector: None,
            seed: 0,
        }
    }

    pub fn retnet(n_qubits: usize, d_model: usize, n_blocks: usize) -> Self {
        Self {
            architecture: Architecture::RetNet,
            ..Self::transformer(n_qubits, d_model, n_blocks)
        }
    }

    pub fn with_sector(mut self, sector: Option<Sector>) -> Self {
        self.sector = sector;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_phase_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.phase_hidden = hidden;
        self
    }

    pub fn n_heads(&self) -> usize {
        self.d_model / HEAD_DIM
    }

    pub fn feedforward_dim(&self) -> usize {
        4 * self.d_model
    }

    /// Orbital sequence length for the transformer and RetNet.
    pub fn n_seq(&self) -> usize {
        self.n_qubits / 2
    }

    /// Autoregressive positions: qubits for MADE, orbitals otherwise.
    pub fn positions(&self) -> usize {
        match self.architecture {
            Architecture::Made => self.n_qubits,
            _ => self.n_seq(),
        }
    }

    /// Outcomes per position.
    pub fn outcomes(&self) -> usize {
        match self.architecture {
            Architecture::Made => 2,
            _ => 4,
        }
    }

    pub fn validate(&self) -> Result<(), AnsatzError> {
        let bad = |m: String| Err(AnsatzError::InvalidConfig(m));
        if self.n_qubits == 0 || self.n_qubits > 64 {
            return bad(format!("n_qubits {} out of range", self.n_qubits));
        }
        match self.architecture {
            Architecture::Made => {
                if self.made_hidden.contains(&0) {
                    return bad("MADE hidden widths must be positive".into());
                }
            }
            _ => {
                if !self.n_qubits.is_multiple_of(2) {
                    return bad("orbital tokens need an even qubit count".into());
                }
                if self.d_model == 0 || !self.d_model.is_multiple_of(HEAD_DIM) {
                    return bad(format!(
                        "d_model {} must be a positive multiple of {HEAD_DIM}",
                        self.d_model
                    ));
                }
                if self.n_blocks == 0 {
                    return bad("at least one block required".into());
                }
            }
        }
        if self.phase_hidden.contains(&0) {
            return bad("phase hidden widths must be positive".into());
        }
        if let Some(s) = self.sector {
            let fits = s.n_up <= crate::pauli::sector_capacity(self.n_qubits, 0)
                && s.n_down <= crate::pauli::sector_capacity(self.n_qubits, 1);
            if !fits {
                return bad(format!(
                    "sector ({}, {}) does not fit in {} qubits",
                    s.n_up, s.n_down, self.n_qubits
                ));
            }
        }
        Ok(())
    }

    /// Closed-form modulus-network parameter count.
    pub fn modulus_parameter_count(&self) -> usize {
        let d = self.d_model;
        match self.architecture {
            Architecture::Made => {
                mlp_count(self.n_qubits, &self.made_hidden, 2 * self.n_qubits)
            }
            Architecture::Transformer => {
                5 * d + self.n_seq() * d + self.n_blocks * (12 * d * d + 9 * d) + 6 * d + 4
            }
            Architecture::RetNet => 5 * d + self.n_blocks * (12 * d * d + 11 * d) + 6 * d + 4,
        }
    }

    /// Closed-form phase-network parameter count.
    pub fn phase_parameter_count(&self) -> usize {
        mlp_count(self.n_qubits, &self.phase_hidden, 1)
    }
}

fn mlp_count(input: usize, hidden: &[usize], output: usize) -> usize {
    let mut dims = vec![input];
    dims.extend_from_slice(hidden);
    dims.push(output);
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Parameters plus architecture; immutable during evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzState {
    config: AnsatzConfig,
    params: ParameterStore,
    made_masks: Vec<Tensor>,
}

enum Init {
    Weight { fan_in: usize },
    Embedding,
    Zero,
    One,
}

impl AnsatzState {
    /// Randomly initialized state, seeded from `config.seed`.
    pub fn new(config: AnsatzConfig) -> Result<Self, AnsatzError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParameterStore::new();
        for (name, rows, cols, init) in parameter_layout(&config) {
            let data = (0..rows * cols)
                .map(|_| match init {
                    Init::Weight { fan_in } => {
                        let a = 1.0 / (fan_in as f64).sqrt();
                        rng.random_range(-a..a)
                    }
                    Init::Embedding => rng.random_range(-1.0..1.0),
                    Init::Zero => 0.0,
                    Init::One => 1.0,
                })
                .collect();
            params.insert(name, Tensor::matrix(rows, cols, data));
        }
        Self::from_params(config, params)
    }

    /// State with every parameter set to zero.
    pub fn zeroed(config: AnsatzConfig) -> Result<Self, AnsatzError> {
        let mut s = Self::new(config)?;
        for (_, t) in s.params.iter_mut() {
            t.data_mut().fill(0.0);
        }
        Ok(s)
    }

    /// Wraps existing parameters, checking names, shapes and counts.
    pub fn from_params(config: AnsatzConfig, params: ParameterStore) -> Result<Self, AnsatzError> {
        config.validate()?;
        let layout = parameter_layout(&config);
        if layout.len() != params.iter().count() {
            return Err(AnsatzError::InvalidConfig(format!(
                "expected {} parameter tensors, found {}",
                layout.len(),
                params.iter().count()
            )));
        }
        for (name, rows, cols, _) in &layout {
            match params.get(name) {
                Some(t) if t.shape() == [*rows, *cols] => {}
                Some(t) => {
                    return Err(AnsatzError::InvalidConfig(format!(
                        "parameter {name} has shape {:?}, expected [{rows}, {cols}]",
                        t.shape()
                    )))
                }
                None => {
                    return Err(AnsatzError::InvalidConfig(format!("missing parameter {name}")))
                }
            }
        }
        assert_eq!(params.modulus_count(), config.modulus_parameter_count());
        assert_eq!(params.phase_count(), config.phase_parameter_count());
        if config.architecture != Architecture::Made {
            let approx = 12 * config.n_blocks * config.d_model * config.d_model;
            let ratio = params.modulus_count() as f64 / approx as f64;
            if !(0.8..=1.2).contains(&ratio) {
                log::debug!(
                    "modulus parameter count {} deviates from 12*n_b*d_m^2 = {approx} by more than 20%",
                    params.modulus_count()
                );
            }
        }
        let made_masks = match config.architecture {
            Architecture::Made => made::masks(config.n_qubits, &config.made_hidden),
            _ => Vec::new(),
        };
        Ok(Self {
            config,
            params,
            made_masks,
        })
    }

    pub fn config(&self) -> &AnsatzConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterStore {
        &self.params
    }

    /// Mutable parameter access; shapes must be preserved.
    pub fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.params
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    pub fn n_qubits(&self) -> usize {
        self.config.n_qubits
    }

    pub fn sector(&self) -> Option<Sector> {
        self.config.sector
    }

    pub(crate) fn made_masks(&self) -> &[Tensor] {
        &self.made_masks
    }

    /// True if `x` lies in the ansatz's configuration space.
    pub fn is_feasible(&self, x: Config) -> bool {
        let n = self.config.n_qubits;
        if n < 64 && x.0 >> n != 0 {
            return false;
        }
        self.config.sector.is_none_or(|s| s.contains(x, n))
    }

    fn check_architecture(&self, expected: Architecture) -> Result<(), AnsatzError> {
        if self.config.architecture == expected {
            Ok(())
        } else {
            Err(AnsatzError::WrongArchitecture {
                expected,
                found: self.config.architecture,
            })
        }
    }
}

fn parameter_layout(config: &AnsatzConfig) -> Vec<(String, usize, usize, Init)> {
    let mut out = Vec::new();
    let mut mlp = |prefix: &str, input: usize, hidden: &[usize], output: usize| {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        for (l, w) in dims.windows(2).enumerate() {
            out.push((format!("{prefix}{l}.w"), w[0], w[1], Init::Weight { fan_in: w[0] }));
            out.push((format!("{prefix}{l}.b"), 1, w[1], Init::Zero));
        }
    };
    let n = config.n_qubits;
    if config.architecture == Architecture::Made {
        mlp("mod.made.", n, &config.made_hidden, 2 * n);
    }
    mlp("phase.", n, &config.phase_hidden, 1);
    if config.architecture == Architecture::Made {
        return out;
    }
    let d = config.d_model;
    let f = config.feedforward_dim();
    out.push(("mod.tok_emb".into(), 5, d, Init::Embedding));
    if config.architecture == Architecture::Transformer {
        out.push(("mod.pos_emb".into(), config.n_seq(), d, Init::Embedding));
    }
    for b in 0..config.n_blocks {
        let p = format!("mod.block{b}.");
        out.push((format!("{p}ln1.g"), 1, d, Init::One));
        out.push((format!("{p}ln1.b"), 1, d, Init::Zero));
        for w in ["wq", "wk", "wv", "wo"] {
            out.push((format!("{p}mix.{w}"), d, d, Init::Weight { fan_in: d }));
        }
        if config.architecture == Architecture::RetNet {
            out.push((format!("{p}gn.g"), 1, d, Init::One));
            out.push((format!("{p}gn.b"), 1, d, Init::Zero));
        }
        out.push((format!("{p}ln2.g"), 1, d, Init::One));
        out.push((format!("{p}ln2.b"), 1, d, Init::Zero));
        out.push((format!("{p}ff1.w"), d, f, Init::Weight { fan_in: d }));
        out.push((format!("{p}ff1.b"), 1, f, Init::Zero));
        out.push((format!("{p}ff2.w"), f, d, Init::Weight { fan_in: f }));
        out.push((format!("{p}ff2.b"), 1, d, Init::Zero));
    }
    out.push(("mod.ln_f.g".into(), 1, d, Init::One));
    out.push(("mod.ln_f.b".into(), 1, d, Init::Zero));
    out.push(("mod.head.w".into(), d, 4, Init::Weight { fan_in: d }));
    out.push(("mod.head.b".into(), 1, 4, Init::Zero));
    out
}

/// Per-position categorical log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDistribution {
    log_probs: Vec<Vec<f64>>,
}

impl ConditionalDistribution {
    pub fn positions(&self) -> usize {
        self.log_probs.len()
    }

    pub fn log_probs(&self, position: usize) -> &[f64] {
        &self.log_probs[position]
    }

    pub fn probs(&self, position: usize) -> Vec<f64> {
        self.log_probs[position].iter().map(|l| l.exp()).collect()
    }

    fn from_tensor(t: &Tensor) -> Self {
        Self {
            log_probs: (0..t.rows()).map(|r| t.row_slice(r).to_vec()).collect(),
        }
    }
}

/// Orbital tokens of a configuration.
pub fn orbital_tokens(x: Config, n_qubits: usize) -> Vec<usize> {
    (0..n_qubits / 2).map(|k| x.orbital(k)).collect()
}

fn config_from_tokens(tokens: &[usize]) -> Config {
    tokens
        .iter()
        .enumerate()
        .fold(Config(0), |c, (k, &t)| c.with_orbital(k, t))
}

/// Raw modulus logits for every position of a full configuration.
pub(crate) fn modulus_logits(
    g: &mut Graph,
    bound: &BoundParams,
    state: &AnsatzState,
    x: Config,
) -> Result<Var, AnsatzError> {
    let cfg = &state.config;
    match cfg.architecture {
        Architecture::Made => made::logits(g, bound, state, x),
        Architecture::Transformer => {
            transformer::logits(g, bound, cfg, &orbital_tokens(x, cfg.n_qubits))
        }
        Architecture::RetNet => {
            retnet::logits_parallel(g, bound, cfg, &orbital_tokens(x, cfg.n_qubits))
        }
    }
}

/// Masks logits row by row using the realized prefix of `x`, then applies
/// log-softmax. Rows beyond `rows` are not present.
pub(crate) fn constrained_log_probs(
    g: &mut Graph,
    state: &AnsatzState,
    logits: Var,
    x: Config,
) -> Result<Var, AnsatzError> {
    let Some(sector) = state.config.sector else {
        return Ok(g.log_softmax(logits)?);
    };
    let rows = g.value(logits).rows();
    let k = state.config.outcomes();
    let mut mask = Vec::with_capacity(rows * k);
    for j in 0..rows {
        let allowed = allowed_outcomes(&state.config, sector, j, x)?;
        mask.extend(allowed.iter().map(|a| !a));
    }
    let masked = g.masked_fill(logits, &mask, MASK_VALUE)?;
    Ok(g.log_softmax(masked)?)
}

fn realized_outcome(cfg: &AnsatzConfig, x: Config, position: usize) -> usize {
    match cfg.architecture {
        Architecture::Made => x.bit(position) as usize,
        _ => x.orbital(position),
    }
}

/// Builds `(Re, Im)` of `log<x|psi>` on a graph so gradients can flow.
pub fn log_amplitude_on_graph(
    g: &mut Graph,
    bound: &BoundParams,
    state: &AnsatzState,
    x: Config,
) -> Result<(Var, Var), AnsatzError> {
    if !state.is_feasible(x) {
        return Err(AnsatzError::Infeasible(x.to_string(state.config.n_qubits)));
    }
    let cfg = &state.config;
    let logits = modulus_logits(g, bound, state, x)?;
    let lp = constrained_log_probs(g, state, logits, x)?;
    let (p, k) = (cfg.positions(), cfg.outcomes());
    let mut onehot = Tensor::zeros(p, k);
    for j in 0..p {
        onehot.set(j, realized_outcome(cfg, x, j), 1.0);
    }
    let onehot = g.constant(onehot);
    let picked = g.mul(lp, onehot)?;
    let total = g.sum(picked)?;
    let re = g.scale(total, 0.5)?;
    let im = phase::forward(g, bound, cfg, x)?;
    Ok((re, im))
}

/// Complex `log<x|psi>`.
pub fn log_amplitude(state: &AnsatzState, x: Config) -> Result<Complex64, AnsatzError> {
    let mut g = Graph::new();
    let bound = g.bind(&state.params);
    let (re, im) = log_amplitude_on_graph(&mut g, &bound, state, x)?;
    Ok(Complex64::new(g.scalar(re), g.scalar(im)))
}

/// Phase `phi(x)`.
pub fn phase_forward(state: &AnsatzState, x: Config) -> Result<f64, AnsatzError> {
    let mut g = Graph::new();
    let bound = g.bind(&state.params);
    let v = phase::forward(&mut g, &bound, &state.config, x)?;
    Ok(g.scalar(v))
}

/// MADE conditionals `log p(x_j | x_<j)` for both outcomes of every qubit.
pub fn made_forward(state: &AnsatzState, x: Config) -> Result<ConditionalDistribution, AnsatzError> {
    state.check_architecture(Architecture::Made)?;
    let mut g = Graph::new();
    let bound = g.bind(&state.params);
    let logits = made::logits(&mut g, &bound, state, x)?;
    let lp = constrained_log_probs(&mut g, state, logits, x)?;
    Ok(ConditionalDistribution::from_tensor(g.value(lp)))
}

fn check_sequence(cfg: &AnsatzConfig, tokens: &[usize]) -> Result<(), AnsatzError> {
    if tokens.len() > cfg.n_seq() {
        return Err(AnsatzError::SequenceTooLong {
            len: tokens.len(),
            max: cfg.n_seq(),
        });
    }
    if let Some(&t) = tokens.iter().find(|&&t| t > 3) {
        return Err(AnsatzError::InvalidConfig(format!("orbital token {t} out of range")));
    }
    Ok(())
}

/// Transformer conditionals for orbitals `0..=len(tokens)` (capped at `n/2`).
pub fn transformer_forward(
    state: &AnsatzState,
    tokens: &[usize],
) -> Result<ConditionalDistribution, AnsatzError> {
    state.check_architecture(Architecture::Transformer)?;
    check_sequence(&state.config, tokens)?;
    let mut g = Graph::new();
    let bound = g.bind(&state.params);
    let logits = transformer::logits(&mut g, &bound, &state.config, tokens)?;
    let lp = constrained_log_probs(&mut g, state, logits, config_from_tokens(tokens))?;
    Ok(ConditionalDistribution::from_tensor(g.value(lp)))
}

/// RetNet conditionals via the parallel retention form.
pub fn retnet_forward_parallel(
    state: &AnsatzState,
    tokens: &[usize],
) -> Result<ConditionalDistribution, AnsatzError> {
    state.check_architecture(Architecture::RetNet)?;
    check_sequence(&state.config, tokens)?;
    let mut g = Graph::new();
    let bound = g.bind(&state.params);
    let logits = retnet::logits_parallel(&mut g, &bound, &state.config, tokens)?;
    let lp = constrained_log_probs(&mut g, state, logits, config_from_tokens(tokens))?;
    Ok(ConditionalDistribution::from_tensor(g.value(lp)))
}

/// Unconstrained log-probabilities of the next position given a partial
/// configuration whose first `position` positions are set. Used by the
/// sampler for MADE and the transformer.
pub fn next_logits(
    state: &AnsatzState,
    partial: Config,
    position: usize,
) -> Result<Vec<f64>, AnsatzError> {
    let cfg = &state.config;
    let mut g = Graph::new();
    let bound = g.bind(&state.params);
    let logits = match cfg.architecture {
        Architecture::Made => made::logits(&mut g, &bound, state, partial)?,
        Architecture::Transformer => {
            let tokens = orbital_tokens(partial, cfg.n_qubits);
            transformer::logits(&mut g, &bound, cfg, &tokens[..position])?
        }
        Architecture::RetNet => {
            let tokens = orbital_tokens(partial, cfg.n_qubits);
            retnet::logits_parallel(&mut g, &bound, cfg, &tokens[..position])?
        }
    };
    Ok(g.value(logits).row_slice(position).to_vec())
}

#[cfg(test)]
mod tests;
