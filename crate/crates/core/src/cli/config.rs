//! Run and sweep configuration files.
//!
//! Both are TOML documents restricted to top-level sections holding scalars
//! or flat arrays of scalars.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ansatz::{AnsatzConfig, Architecture};
use crate::vmc::TrainConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnsatzSection {
    pub architecture: Architecture,
    pub d_model: usize,
    pub n_blocks: usize,
    pub made_hidden: usize,
    pub phase_hidden: usize,
    /// Number of hidden layers in both the MADE and phase networks.
    pub hidden_layers: usize,
}

impl Default for AnsatzSection {
    fn default() -> Self {
        Self {
            architecture: Architecture::Transformer,
            d_model: 16,
            n_blocks: 1,
            made_hidden: 64,
            phase_hidden: 16,
            hidden_layers: 1,
        }
    }
}

impl AnsatzSection {
    pub fn to_config(&self, n_qubits: usize, seed: u64) -> AnsatzConfig {
        let phase = vec![self.phase_hidden; self.hidden_layers];
        let cfg = match self.architecture {
            Architecture::Made => AnsatzConfig::made(n_qubits, vec![self.made_hidden; self.hidden_layers]),
            Architecture::Transformer => AnsatzConfig::transformer(n_qubits, self.d_model, self.n_blocks),
            Architecture::RetNet => AnsatzConfig::retnet(n_qubits, self.d_model, self.n_blocks),
        };
        cfg.with_phase_hidden(phase).with_seed(seed)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.hidden_layers == 0 {
            return Err(invalid("ansatz.hidden_layers", "must be positive"));
        }
        if self.phase_hidden == 0 {
            return Err(invalid("ansatz.phase_hidden", "must be positive"));
        }
        match self.architecture {
            Architecture::Made if self.made_hidden == 0 => Err(invalid("ansatz.made_hidden", "must be positive")),
            Architecture::Transformer | Architecture::RetNet => {
                if self.d_model == 0 || !self.d_model.is_multiple_of(8) {
                    return Err(invalid("ansatz.d_model", format!("must be a positive multiple of 8, got {}", self.d_model)));
                }
                if self.n_blocks == 0 {
                    return Err(invalid("ansatz.n_blocks", "must be positive"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Training hyperparameters; mirrors [`TrainConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub steps: usize,
    pub max_unique: usize,
    pub draws_start: f64,
    pub draws_end: f64,
    pub lr_peak: f64,
    pub lr_floor: f64,
    pub warmup_fraction: f64,
    pub recompute_every: usize,
    pub recompute_fraction: f64,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            steps: d.steps,
            max_unique: d.max_unique,
            draws_start: d.draws_start,
            draws_end: d.draws_end,
            lr_peak: d.lr_peak,
            lr_floor: d.lr_floor,
            warmup_fraction: d.warmup_fraction,
            recompute_every: d.recompute_every,
            recompute_fraction: d.recompute_fraction,
            seed: d.seed,
        }
    }
}

impl TrainSection {
    pub fn to_config(&self) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            max_unique: self.max_unique,
            draws_start: self.draws_start,
            draws_end: self.draws_end,
            lr_peak: self.lr_peak,
            lr_floor: self.lr_floor,
            warmup_fraction: self.warmup_fraction,
            recompute_every: self.recompute_every,
            recompute_fraction: self.recompute_fraction,
            seed: self.seed,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let checks: [(&str, bool, &str); 7] = [
            ("train.steps", self.steps > 0, "must be positive"),
            ("train.max_unique", self.max_unique > 0, "must be positive"),
            ("train.draws_start", self.draws_start >= 1.0, "must be at least 1"),
            ("train.draws_end", self.draws_end >= self.draws_start, "must be at least draws_start"),
            ("train.lr_peak", self.lr_peak > 0.0 && self.lr_floor <= self.lr_peak, "must be positive and at least lr_floor"),
            ("train.warmup_fraction", self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0, "must lie in (0, 1)"),
            ("train.recompute_every", self.recompute_every > 0, "must be positive"),
        ];
        for (field, ok, msg) in checks {
            if !ok {
                return Err(invalid(field, msg));
            }
        }
        if self.lr_floor.is_nan() || self.lr_floor < 0.0 {
            return Err(invalid("train.lr_floor", "must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.recompute_fraction) {
            return Err(invalid("train.recompute_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub checkpoints: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("results"), checkpoints: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub hamiltonian: PathBuf,
    /// Label for the results table; defaults to the Hamiltonian file stem.
    pub molecule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub run: RunSection,
    #[serde(default)]
    pub ansatz: AnsatzSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub hamiltonians: Vec<PathBuf>,
    pub architectures: Vec<Architecture>,
    #[serde(default = "default_d_model")]
    pub d_model: Vec<usize>,
    #[serde(default = "default_one")]
    pub n_blocks: Vec<usize>,
    #[serde(default = "default_made_hidden")]
    pub made_hidden: Vec<usize>,
    #[serde(default = "default_phase_hidden")]
    pub phase_hidden: Vec<usize>,
    #[serde(default = "default_one_scalar")]
    pub hidden_layers: usize,
    pub steps: Vec<usize>,
    pub max_unique: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_d_model() -> Vec<usize> {
    vec![16]
}
fn default_one() -> Vec<usize> {
    vec![1]
}
fn default_one_scalar() -> usize {
    1
}
fn default_made_hidden() -> Vec<usize> {
    vec![64]
}
fn default_phase_hidden() -> Vec<usize> {
    vec![16]
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub sweep: SweepSection,
    /// Fixed hyperparameters; `steps`, `max_unique` and `seed` are taken
    /// from the sweep lists.
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// One fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub hamiltonian: PathBuf,
    pub molecule: String,
    pub ansatz: AnsatzSection,
    pub train: TrainSection,
}

impl RunSpec {
    /// Hex SHA-256 over the Hamiltonian contents and the canonical
    /// serialization of every setting that affects the result.
    pub fn config_hash(&self, hamiltonian_text: &str) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            hamiltonian_sha256: String,
            ansatz: &'a AnsatzSection,
            train: &'a TrainSection,
        }
        let mut ansatz = self.ansatz.clone();
        // fields that the architecture ignores must not split identical runs
        match ansatz.architecture {
            Architecture::Made => {
                ansatz.d_model = 0;
                ansatz.n_blocks = 0;
            }
            _ => ansatz.made_hidden = 0,
        }
        let doc = Canonical {
            hamiltonian_sha256: hex::encode(Sha256::digest(hamiltonian_text.as_bytes())),
            ansatz: &ansatz,
            train: &self.train,
        };
        let text = toml::to_string(&doc).expect("plain scalar document");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn molecule_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "unknown".into())
}

impl RunFile {
    /// Loads and validates a run file; relative paths are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut f: RunFile = read_toml(path)?;
        let base = base_dir(path);
        f.run.hamiltonian = resolve(&base, &f.run.hamiltonian);
        f.output.dir = resolve(&base, &f.output.dir);
        f.ansatz.validate()?;
        f.train.validate()?;
        Ok(f)
    }

    pub fn spec(&self) -> RunSpec {
        RunSpec {
            hamiltonian: self.run.hamiltonian.clone(),
            molecule: self.run.molecule.clone().unwrap_or_else(|| molecule_name(&self.run.hamiltonian)),
            ansatz: self.ansatz.clone(),
            train: self.train.clone(),
        }
    }
}

impl SweepFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut f: SweepFile = read_toml(path)?;
        let base = base_dir(path);
        for h in &mut f.sweep.hamiltonians {
            *h = resolve(&base, h);
        }
        f.output.dir = resolve(&base, &f.output.dir);
        let s = &f.sweep;
        let lists: [(&str, bool); 9] = [
            ("sweep.hamiltonians", s.hamiltonians.is_empty()),
            ("sweep.architectures", s.architectures.is_empty()),
            ("sweep.d_model", s.d_model.is_empty()),
            ("sweep.n_blocks", s.n_blocks.is_empty()),
            ("sweep.made_hidden", s.made_hidden.is_empty()),
            ("sweep.phase_hidden", s.phase_hidden.is_empty()),
            ("sweep.steps", s.steps.is_empty()),
            ("sweep.max_unique", s.max_unique.is_empty()),
            ("sweep.seeds", s.seeds.is_empty()),
        ];
        for (field, empty) in lists {
            if empty {
                return Err(invalid(field, "must not be empty"));
            }
        }
        for (i, spec) in f.grid().iter().enumerate() {
            spec.ansatz.validate().map_err(|e| prefix(e, "sweep", i))?;
            spec.train.validate().map_err(|e| prefix(e, "sweep", i))?;
        }
        Ok(f)
    }

    /// The deterministic cross product, ordered by Hamiltonian,
    /// architecture, model size, blocks, phase width, steps, max_unique, seed.
    pub fn grid(&self) -> Vec<RunSpec> {
        let s = &self.sweep;
        let mut out = Vec::new();
        for h in &s.hamiltonians {
            for &arch in &s.architectures {
                let sizes: Vec<(usize, usize)> = match arch {
                    Architecture::Made => s.made_hidden.iter().map(|&w| (w, 0)).collect(),
                    _ => s.d_model.iter().flat_map(|&d| s.n_blocks.iter().map(move |&b| (d, b))).collect(),
                };
                for &(size, blocks) in &sizes {
                    for &phase in &s.phase_hidden {
                        for &steps in &s.steps {
                            for &max_unique in &s.max_unique {
                                for &seed in &s.seeds {
                                    let mut ansatz = AnsatzSection {
                                        architecture: arch,
                                        phase_hidden: phase,
                                        hidden_layers: s.hidden_layers,
                                        ..AnsatzSection::default()
                                    };
                                    if arch == Architecture::Made {
                                        ansatz.made_hidden = size;
                                    } else {
                                        ansatz.d_model = size;
                                        ansatz.n_blocks = blocks;
                                    }
                                    out.push(RunSpec {
                                        hamiltonian: h.clone(),
                                        molecule: molecule_name(h),
                                        ansatz,
                                        train: TrainSection { steps, max_unique, seed, ..self.train.clone() },
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

fn prefix(e: ConfigError, section: &str, index: usize) -> ConfigError {
    match e {
        ConfigError::Invalid { field, message } => ConfigError::Invalid {
            field: format!("{section}[{index}].{field}"),
            message,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn run_file_defaults_and_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "run.toml", "[run]\nhamiltonian = \"h.ham\"\n[ansatz]\narchitecture = \"made\"\n");
        let f = RunFile::load(&p).unwrap();
        assert_eq!(f.run.hamiltonian, dir.path().join("h.ham"));
        assert_eq!(f.ansatz.architecture, Architecture::Made);
        assert_eq!(f.train, TrainSection::default());
        assert_eq!(f.spec().molecule, "h");
    }

    #[test]
    fn validation_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "run.toml", "[run]\nhamiltonian = \"h.ham\"\n[ansatz]\nd_model = 12\n");
        let e = RunFile::load(&p).unwrap_err().to_string();
        assert!(e.starts_with("ansatz.d_model"), "{e}");
        let p = write(dir.path(), "run.toml", "[run]\nhamiltonian = \"h.ham\"\n[train]\nsteps = 0\n");
        assert!(RunFile::load(&p).unwrap_err().to_string().starts_with("train.steps"));
        let p = write(dir.path(), "run.toml", "[run]\nhamiltonian = \"h.ham\"\n[train]\nstep = 3\n");
        assert!(matches!(RunFile::load(&p), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn sweep_grid_is_ordered_cross_product() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[sweep]\nhamiltonians = [\"a.ham\"]\narchitectures = [\"made\", \"transformer\"]\n\
                    d_model = [8, 16]\nmade_hidden = [8, 32]\nsteps = [10]\nmax_unique = [4]\n";
        let f = SweepFile::load(&write(dir.path(), "s.toml", text)).unwrap();
        let g = f.grid();
        assert_eq!(g.len(), 4);
        assert_eq!(g[0].ansatz.made_hidden, 8);
        assert_eq!(g[1].ansatz.made_hidden, 32);
        assert_eq!((g[2].ansatz.architecture, g[2].ansatz.d_model), (Architecture::Transformer, 8));
        assert_eq!(g[3].ansatz.d_model, 16);
        assert_eq!(f.grid(), g);
        let bad = text.replace("d_model = [8, 16]", "d_model = [8, 9]");
        let e = SweepFile::load(&write(dir.path(), "s.toml", &bad)).unwrap_err().to_string();
        assert!(e.starts_with("sweep[3].ansatz.d_model"), "{e}");
    }

    #[test]
    fn hash_tracks_relevant_settings_only() {
        let spec = RunSpec {
            hamiltonian: "x".into(),
            molecule: "x".into(),
            ansatz: AnsatzSection { architecture: Architecture::Made, ..AnsatzSection::default() },
            train: TrainSection::default(),
        };
        let h = spec.config_hash("%n_qubits 1\n");
        assert_eq!(h.len(), 16);
        let mut other = spec.clone();
        other.ansatz.d_model = 64;
        other.molecule = "y".into();
        assert_eq!(other.config_hash("%n_qubits 1\n"), h);
        other.train.seed = 1;
        assert_ne!(other.config_hash("%n_qubits 1\n"), h);
        assert_ne!(spec.config_hash("%n_qubits 2\n"), h);
    }
}
