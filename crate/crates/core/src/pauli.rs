//! Pauli-string Hamiltonians: parsing, flip-pattern grouping, matrix elements
//! on computational basis states, and particle-sector bookkeeping.
//!
//! Configurations are stored as a [`Config`] bit set where bit `j` is qubit
//! `j`. Qubit 0 is the leftmost symbol of a Pauli string and the leftmost
//! character of a printed configuration. Even qubits carry spin up, odd
//! qubits spin down, so spatial orbital `k` owns qubits `2k` and `2k + 1`.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// Largest supported qubit count (configurations are packed into a `u64`).
pub const MAX_QUBITS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PauliError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("pauli string has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(
        "inconsistent electron count {n_electrons} and multiplicity {multiplicity} for {n_qubits} qubits"
    )]
    InconsistentSector {
        n_qubits: usize,
        n_electrons: usize,
        multiplicity: usize,
    },
    #[error("search space size overflows 64 bits")]
    Overflow,
}

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A computational basis state; bit `j` is the occupation of qubit `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Config(pub u64);

impl Config {
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = 0u64;
        for (j, &b) in bits.iter().enumerate() {
            if b != 0 {
                v |= 1 << j;
            }
        }
        Config(v)
    }

    /// Parses a `0`/`1` string, leftmost character is qubit 0.
    pub fn parse(s: &str) -> Option<Self> {
        if s.len() > MAX_QUBITS {
            return None;
        }
        let mut v = 0u64;
        for (j, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => v |= 1 << j,
                _ => return None,
            }
        }
        Some(Config(v))
    }

    #[inline]
    pub fn bit(self, j: usize) -> bool {
        (self.0 >> j) & 1 == 1
    }

    #[inline]
    pub fn with_bit(self, j: usize, value: bool) -> Self {
        if value {
            Config(self.0 | (1 << j))
        } else {
            Config(self.0 & !(1 << j))
        }
    }

    /// Occupation token of spatial orbital `k`: 0 empty, 1 up, 2 down, 3 double.
    #[inline]
    pub fn orbital(self, k: usize) -> usize {
        ((self.0 >> (2 * k)) & 0b11) as usize
    }

    #[inline]
    pub fn with_orbital(self, k: usize, token: usize) -> Self {
        let cleared = self.0 & !(0b11 << (2 * k));
        Config(cleared | ((token as u64 & 0b11) << (2 * k)))
    }

    pub fn bits(self, n: usize) -> Vec<u8> {
        (0..n).map(|j| self.bit(j) as u8).collect()
    }

    pub fn to_string(self, n: usize) -> String {
        (0..n).map(|j| if self.bit(j) { '1' } else { '0' }).collect()
    }

    /// (up, down) electron counts among the first `len` qubits.
    pub fn spin_counts(self, len: usize) -> (usize, usize) {
        let mask = if len >= 64 { u64::MAX } else { (1u64 << len) - 1 };
        let v = self.0 & mask;
        let up = (v & 0x5555_5555_5555_5555).count_ones() as usize;
        let down = (v & 0xAAAA_AAAA_AAAA_AAAA).count_ones() as usize;
        (up, down)
    }
}

/// A weighted tensor product of single-qubit Paulis.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    ops: Vec<Pauli>,
    coefficient: f64,
    flip: u64,
    sign: u64,
    y_count: u32,
}

impl PauliString {
    pub fn new(ops: Vec<Pauli>, coefficient: f64) -> Self {
        let mut flip = 0u64;
        let mut sign = 0u64;
        let mut y_count = 0;
        for (j, op) in ops.iter().enumerate() {
            match op {
                Pauli::I => {}
                Pauli::X => flip |= 1 << j,
                Pauli::Y => {
                    flip |= 1 << j;
                    sign |= 1 << j;
                    y_count += 1;
                }
                Pauli::Z => sign |= 1 << j,
            }
        }
        Self {
            ops,
            coefficient,
            flip,
            sign,
            y_count,
        }
    }

    pub fn parse(ops: &str, coefficient: f64) -> Option<Self> {
        let ops: Option<Vec<Pauli>> = ops.chars().map(Pauli::from_char).collect();
        ops.map(|ops| Self::new(ops, coefficient))
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    /// Positions holding X or Y.
    pub fn flip_mask(&self) -> u64 {
        self.flip
    }

    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|&p| p == Pauli::I)
    }

    pub fn is_diagonal(&self) -> bool {
        self.flip == 0
    }

    pub fn label(&self) -> String {
        self.ops.iter().map(|p| p.as_char()).collect()
    }

    /// Phase of `<x ^ flip| P |x>` excluding the coefficient.
    #[inline]
    fn phase(&self, x: Config) -> Complex64 {
        let negative = (x.0 & self.sign).count_ones() % 2 == 1;
        let s = if negative { -1.0 } else { 1.0 };
        match self.y_count % 4 {
            0 => Complex64::new(s, 0.0),
            1 => Complex64::new(0.0, s),
            2 => Complex64::new(-s, 0.0),
            _ => Complex64::new(0.0, -s),
        }
    }
}

/// Applies one Pauli term to a basis state: returns `x'` and `<x'|P|x>`.
pub fn matrix_element(
    term: &PauliString,
    x: Config,
    n_qubits: usize,
) -> Result<(Config, Complex64), PauliError> {
    if term.len() != n_qubits {
        return Err(PauliError::LengthMismatch {
            expected: n_qubits,
            found: term.len(),
        });
    }
    Ok((
        Config(x.0 ^ term.flip),
        term.phase(x) * term.coefficient,
    ))
}

/// Number of up and down electrons the ansatz must place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sector {
    pub n_up: usize,
    pub n_down: usize,
}

impl Sector {
    /// Splits `n_electrons` by spin multiplicity `2S + 1`; any extra same-spin
    /// electrons go to the up sector.
    pub fn from_electrons(
        n_qubits: usize,
        n_electrons: usize,
        multiplicity: usize,
    ) -> Result<Self, PauliError> {
        let err = || PauliError::InconsistentSector {
            n_qubits,
            n_electrons,
            multiplicity,
        };
        if multiplicity == 0 || n_electrons > n_qubits {
            return Err(err());
        }
        let unpaired = multiplicity - 1;
        if unpaired > n_electrons || !(n_electrons - unpaired).is_multiple_of(2) {
            return Err(err());
        }
        let n_down = (n_electrons - unpaired) / 2;
        let n_up = n_down + unpaired;
        let sector = Sector { n_up, n_down };
        if n_up > sector_capacity(n_qubits, 0) || n_down > sector_capacity(n_qubits, 1) {
            return Err(err());
        }
        Ok(sector)
    }

    pub fn n_electrons(&self) -> usize {
        self.n_up + self.n_down
    }

    pub fn target(&self, spin: usize) -> usize {
        if spin == 0 {
            self.n_up
        } else {
            self.n_down
        }
    }

    pub fn contains(&self, x: Config, n_qubits: usize) -> bool {
        let (up, down) = x.spin_counts(n_qubits);
        up == self.n_up && down == self.n_down
    }

    /// All configurations of `n_qubits` with exactly this electron split, sorted.
    pub fn configs(&self, n_qubits: usize) -> Vec<Config> {
        let up_slots: Vec<usize> = (0..n_qubits).step_by(2).collect();
        let down_slots: Vec<usize> = (1..n_qubits).step_by(2).collect();
        let ups = combinations(&up_slots, self.n_up);
        let downs = combinations(&down_slots, self.n_down);
        let mut out = Vec::with_capacity(ups.len() * downs.len());
        for &u in &ups {
            for &d in &downs {
                out.push(Config(u | d));
            }
        }
        out.sort();
        out
    }
}

/// Number of qubits of a given spin (0 up, 1 down) among `n_qubits`.
pub fn sector_capacity(n_qubits: usize, spin: usize) -> usize {
    if spin == 0 {
        n_qubits.div_ceil(2)
    } else {
        n_qubits / 2
    }
}

fn combinations(slots: &[usize], k: usize) -> Vec<u64> {
    fn rec(slots: &[usize], k: usize, start: usize, acc: u64, out: &mut Vec<u64>) {
        if k == 0 {
            out.push(acc);
            return;
        }
        for i in start..slots.len() {
            if slots.len() - i < k {
                break;
            }
            rec(slots, k - 1, i + 1, acc | (1 << slots[i]), out);
        }
    }
    let mut out = Vec::new();
    if k <= slots.len() {
        rec(slots, k, 0, 0, &mut out);
    }
    out
}

/// All configurations an ansatz over `n_qubits` may emit.
pub fn feasible_configs(n_qubits: usize, sector: Option<Sector>) -> Vec<Config> {
    match sector {
        Some(s) => s.configs(n_qubits),
        None => (0..(1u64 << n_qubits)).map(Config).collect(),
    }
}

pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Size of the particle-number-constrained configuration space.
pub fn search_space_size(
    n_qubits: usize,
    n_electrons: usize,
    multiplicity: usize,
) -> Result<u64, PauliError> {
    let sector = Sector::from_electrons(n_qubits, n_electrons, multiplicity)?;
    let up = binomial(sector_capacity(n_qubits, 0) as u64, sector.n_up as u64)
        .ok_or(PauliError::Overflow)?;
    let down = binomial(sector_capacity(n_qubits, 1) as u64, sector.n_down as u64)
        .ok_or(PauliError::Overflow)?;
    up.checked_mul(down).ok_or(PauliError::Overflow)
}

/// An n-qubit Hamiltonian as a real linear combination of Pauli strings.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliHamiltonian {
    n_qubits: usize,
    n_electrons: Option<usize>,
    multiplicity: usize,
    terms: Vec<PauliString>,
    fci_energy: Option<f64>,
}

impl PauliHamiltonian {
    /// Builds a Hamiltonian, merging duplicate strings by summing coefficients.
    pub fn new(
        n_qubits: usize,
        n_electrons: Option<usize>,
        multiplicity: usize,
        terms: Vec<PauliString>,
    ) -> Result<Self, PauliError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(PauliError::Parse {
                line: 0,
                message: format!("n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"),
            });
        }
        if let Some(ne) = n_electrons {
            Sector::from_electrons(n_qubits, ne, multiplicity)?;
        }
        let mut merged: Vec<PauliString> = Vec::with_capacity(terms.len());
        let mut index: HashMap<Vec<Pauli>, usize> = HashMap::new();
        for t in terms {
            if t.len() != n_qubits {
                return Err(PauliError::LengthMismatch {
                    expected: n_qubits,
                    found: t.len(),
                });
            }
            match index.get(&t.ops) {
                Some(&i) => {
                    let c = merged[i].coefficient + t.coefficient;
                    merged[i] = PauliString::new(t.ops, c);
                }
                None => {
                    index.insert(t.ops.clone(), merged.len());
                    merged.push(t);
                }
            }
        }
        let n4 = (n_qubits as f64).powi(4);
        if n_qubits >= 2 && merged.len() as f64 > n4 {
            log::warn!(
                "{} terms exceeds n^4 = {n4} for {n_qubits} qubits",
                merged.len()
            );
        }
        Ok(Self {
            n_qubits,
            n_electrons,
            multiplicity,
            terms: merged,
            fci_energy: None,
        })
    }

    pub fn with_fci_energy(mut self, energy: Option<f64>) -> Self {
        self.fci_energy = energy;
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_electrons(&self) -> Option<usize> {
        self.n_electrons
    }

    pub fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn fci_energy(&self) -> Option<f64> {
        self.fci_energy
    }

    /// Coefficient of the all-identity term (0 if absent).
    pub fn identity_weight(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.is_identity())
            .map(|t| t.coefficient)
            .sum()
    }

    /// Electron split, if the file declares an electron count.
    pub fn sector(&self) -> Option<Sector> {
        self.n_electrons.map(|ne| {
            Sector::from_electrons(self.n_qubits, ne, self.multiplicity)
                .expect("validated at construction")
        })
    }

    /// Constrained space size, or `2^n` without a declared electron count.
    pub fn search_space_size(&self) -> Result<u64, PauliError> {
        match self.n_electrons {
            Some(ne) => search_space_size(self.n_qubits, ne, self.multiplicity),
            None => 1u64
                .checked_shl(self.n_qubits as u32)
                .ok_or(PauliError::Overflow),
        }
    }

    /// Returns a copy with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.terms = self
            .terms
            .iter()
            .map(|t| PauliString::new(t.ops.clone(), t.coefficient * factor))
            .collect();
        out.fci_energy = self.fci_energy.map(|e| e * factor);
        out
    }

    /// Text form accepted by [`parse_hamiltonian`].
    pub fn to_text(&self) -> String {
        let mut s = format!("%n_qubits {}\n", self.n_qubits);
        if let Some(ne) = self.n_electrons {
            s.push_str(&format!("%n_electrons {ne}\n"));
        }
        s.push_str(&format!("%multiplicity {}\n", self.multiplicity));
        if let Some(e) = self.fci_energy {
            s.push_str(&format!("%fci {e}\n"));
        }
        for t in &self.terms {
            s.push_str(&format!("{} {}\n", t.coefficient, t.label()));
        }
        s
    }
}

const HEADER_ORDER: [&str; 4] = ["n_qubits", "n_electrons", "multiplicity", "fci"];

/// Parses the Hamiltonian text format.
///
/// Header directives come first, in the order `%n_qubits`, `%n_electrons`,
/// `%multiplicity`, `%fci`; only `%n_qubits` is required. Without
/// `%n_electrons` the configuration space is unconstrained. Term lines are
/// `<coefficient> <pauli_string>`; `#` starts a comment.
pub fn parse_hamiltonian(text: &str) -> Result<PauliHamiltonian, PauliError> {
    let err = |line: usize, message: String| PauliError::Parse { line, message };
    let mut n_qubits: Option<usize> = None;
    let mut n_electrons: Option<usize> = None;
    let mut multiplicity: Option<usize> = None;
    let mut fci: Option<f64> = None;
    let mut last_header: Option<usize> = None;
    let mut terms = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(directive) = line.strip_prefix('%') {
            if !terms.is_empty() {
                return Err(err(line_no, "header directive after term lines".into()));
            }
            let mut parts = directive.split_whitespace();
            let key = parts.next().unwrap_or("");
            let value = parts
                .next()
                .ok_or_else(|| err(line_no, format!("directive %{key} has no value")))?;
            if parts.next().is_some() {
                return Err(err(line_no, format!("trailing tokens after %{key}")));
            }
            let pos = HEADER_ORDER
                .iter()
                .position(|&k| k == key)
                .ok_or_else(|| err(line_no, format!("unknown directive %{key}")))?;
            if last_header.is_some_and(|p| pos <= p) {
                return Err(err(line_no, format!("directive %{key} out of order or repeated")));
            }
            if pos > 0 && n_qubits.is_none() {
                return Err(err(line_no, "%n_qubits must come first".into()));
            }
            last_header = Some(pos);
            let int = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| err(line_no, format!("%{key} expects an integer, got '{v}'")))
            };
            match key {
                "n_qubits" => n_qubits = Some(int(value)?),
                "n_electrons" => n_electrons = Some(int(value)?),
                "multiplicity" => multiplicity = Some(int(value)?),
                _ => {
                    let e: f64 = value
                        .parse()
                        .ok()
                        .filter(|e: &f64| e.is_finite())
                        .ok_or_else(|| err(line_no, format!("%fci expects a number, got '{value}'")))?;
                    fci = Some(e);
                }
            }
            continue;
        }

        let n = n_qubits.ok_or_else(|| err(line_no, "missing %n_qubits header".into()))?;
        let mut parts = line.split_whitespace();
        let (coef, ops) = match (parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(o), None) => (c, o),
            _ => {
                return Err(err(
                    line_no,
                    "expected '<coefficient> <pauli_string>'".into(),
                ))
            }
        };
        let coefficient: f64 = coef
            .parse()
            .ok()
            .filter(|c: &f64| c.is_finite())
            .ok_or_else(|| err(line_no, format!("unparseable coefficient '{coef}'")))?;
        if let Some(bad) = ops.chars().find(|&c| Pauli::from_char(c).is_none()) {
            return Err(err(line_no, format!("invalid Pauli symbol '{bad}'")));
        }
        let count = ops.chars().count();
        if count != n {
            return Err(err(
                line_no,
                format!("pauli string has length {count}, expected {n}"),
            ));
        }
        terms.push(PauliString::parse(ops, coefficient).expect("validated symbols"));
    }

    let n = n_qubits.ok_or_else(|| err(0, "missing %n_qubits header".into()))?;
    let h = PauliHamiltonian::new(n, n_electrons, multiplicity.unwrap_or(1), terms).map_err(
        |e| match e {
            PauliError::Parse { message, .. } => err(1, message),
            other => other,
        },
    )?;
    Ok(h.with_fci_energy(fci))
}

/// Terms sharing one X/Y flip mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipGroup {
    pub flip_mask: u64,
    pub member_term_indices: Vec<usize>,
}

/// Flip groups of a Hamiltonian plus its diagonal terms, ready for
/// repeated local-energy evaluation.
#[derive(Debug, Clone)]
pub struct FlipGroups {
    n_qubits: usize,
    groups: Vec<FlipGroup>,
    diagonal: Vec<usize>,
    terms: Vec<PauliString>,
}

/// Groups the non-diagonal terms by flip mask, in order of first appearance.
pub fn group_flip_patterns(h: &PauliHamiltonian) -> FlipGroups {
    let mut groups: Vec<FlipGroup> = Vec::new();
    let mut by_mask: HashMap<u64, usize> = HashMap::new();
    let mut diagonal = Vec::new();
    for (i, t) in h.terms.iter().enumerate() {
        if t.is_diagonal() {
            diagonal.push(i);
            continue;
        }
        let g = *by_mask.entry(t.flip).or_insert_with(|| {
            groups.push(FlipGroup {
                flip_mask: t.flip,
                member_term_indices: Vec::new(),
            });
            groups.len() - 1
        });
        groups[g].member_term_indices.push(i);
    }
    FlipGroups {
        n_qubits: h.n_qubits,
        groups,
        diagonal,
        terms: h.terms.clone(),
    }
}

impl FlipGroups {
    pub fn groups(&self) -> &[FlipGroup] {
        &self.groups
    }

    /// Indices of all-I/Z terms.
    pub fn diagonal(&self) -> &[usize] {
        &self.diagonal
    }

    /// Number of distinct nonzero flip masks (M).
    pub fn count(&self) -> usize {
        self.groups.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// `(x', <x'|H|x>)` for the diagonal entry followed by one entry per flip
    /// group. Zero amplitudes are kept.
    pub fn connected_elements(&self, x: Config) -> Vec<(Config, Complex64)> {
        let mut out = Vec::with_capacity(self.groups.len() + 1);
        let diag: Complex64 = self
            .diagonal
            .iter()
            .map(|&i| self.terms[i].phase(x) * self.terms[i].coefficient)
            .sum();
        out.push((x, diag));
        for g in &self.groups {
            let amp: Complex64 = g
                .member_term_indices
                .iter()
                .map(|&i| self.terms[i].phase(x) * self.terms[i].coefficient)
                .sum();
            out.push((Config(x.0 ^ g.flip_mask), amp));
        }
        out
    }
}

impl fmt::Display for PauliHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
