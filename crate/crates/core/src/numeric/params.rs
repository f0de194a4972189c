use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{NumericError, Tensor};

/// Prefix of modulus-network parameter names.
pub const MODULUS_PREFIX: &str = "mod.";
/// Prefix of phase-network parameter names.
pub const PHASE_PREFIX: &str = "phase.";

const CHECKPOINT_MAGIC: &str = "NQSCKPT1";

/// Named parameter tensors, ordered by name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterStore {
    tensors: BTreeMap<String, Tensor>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(|k| k.as_str())
    }

    /// N.
    pub fn total_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// N_mod.
    pub fn modulus_count(&self) -> usize {
        self.count_prefix(MODULUS_PREFIX)
    }

    /// N_ph.
    pub fn phase_count(&self) -> usize {
        self.count_prefix(PHASE_PREFIX)
    }

    fn count_prefix(&self, prefix: &str) -> usize {
        self.tensors
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v.len())
            .sum()
    }

    /// All values concatenated in name order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors
            .values()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn set_flat(&mut self, values: &[f64]) -> Result<(), NumericError> {
        if values.len() != self.total_count() {
            return Err(NumericError::InvalidArgument(format!(
                "expected {} values, got {}",
                self.total_count(),
                values.len()
            )));
        }
        let mut offset = 0;
        for t in self.tensors.values_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Writes the versioned text checkpoint: a magic line, then per tensor a
    /// `param <name> <dims...>` line followed by its row-major values.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        for (name, t) in &self.tensors {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            writeln!(w, "param {name} {}", dims.join(" "))?;
            let vals: Vec<String> = t.data().iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", vals.join(" "))?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Self, NumericError> {
        let bad = |m: String| NumericError::Checkpoint(m);
        let mut lines = r.lines();
        let magic = lines
            .next()
            .transpose()
            .map_err(|e| bad(e.to_string()))?
            .unwrap_or_default();
        if magic.trim() != CHECKPOINT_MAGIC {
            return Err(bad(format!("missing {CHECKPOINT_MAGIC} header")));
        }
        let mut store = ParameterStore::new();
        while let Some(header) = lines.next() {
            let header = header.map_err(|e| bad(e.to_string()))?;
            if header.trim().is_empty() {
                continue;
            }
            let mut parts = header.split_whitespace();
            if parts.next() != Some("param") {
                return Err(bad(format!("expected 'param', got '{header}'")));
            }
            let name = parts
                .next()
                .ok_or_else(|| bad("parameter without name".into()))?
                .to_string();
            let shape: Vec<usize> = parts
                .map(|d| d.parse().map_err(|_| bad(format!("bad dimension '{d}'"))))
                .collect::<Result<_, _>>()?;
            let values = lines
                .next()
                .transpose()
                .map_err(|e| bad(e.to_string()))?
                .ok_or_else(|| bad(format!("missing values for {name}")))?;
            let data: Vec<f64> = values
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| bad(format!("bad value '{v}'"))))
                .collect::<Result<_, _>>()?;
            store.insert(name, Tensor::new(shape, data)?);
        }
        Ok(store)
    }
}
