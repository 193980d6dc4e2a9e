use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A Pauli word on up to 64 qubits in symplectic form.
///
/// Qubit `j` carries `I` (x=0,z=0), `X` (1,0), `Y` (1,1) or `Z` (0,1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PauliString {
    pub x: u64,
    pub z: u64,
}

/// `i^k` for `k` mod 4.
pub(crate) fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString { x: 0, z: 0 };

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Single-qubit operator letter at `qubit`.
    pub fn letter(&self, qubit: usize) -> char {
        match ((self.x >> qubit) & 1, (self.z >> qubit) & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (1, 1) => 'Y',
            _ => 'Z',
        }
    }

    pub fn word(&self, n_qubits: usize) -> String {
        (0..n_qubits).map(|q| self.letter(q)).collect()
    }

    pub fn parse_word(word: &str) -> Result<Self> {
        if word.len() > 64 {
            return Err(Error::InvalidInput("Pauli word longer than 64 qubits".into()));
        }
        let mut p = PauliString::default();
        for (q, ch) in word.chars().enumerate() {
            match ch {
                'I' => {}
                'X' => p.x |= 1 << q,
                'Y' => {
                    p.x |= 1 << q;
                    p.z |= 1 << q;
                }
                'Z' => p.z |= 1 << q,
                other => {
                    return Err(Error::InvalidInput(format!("bad Pauli letter '{other}'")));
                }
            }
        }
        Ok(p)
    }

    pub fn n_y(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Highest qubit acted on non-trivially, if any.
    pub fn support_max(&self) -> Option<usize> {
        let m = self.x | self.z;
        (m != 0).then(|| 63 - m.leading_zeros() as usize)
    }

    /// `self · other = i^k · result`; returns `(k mod 4, result)`.
    pub fn mul(&self, other: &PauliString) -> (u32, PauliString) {
        let mut k = 0u32;
        let both = (self.x | self.z) & (other.x | other.z);
        let mut bits = both;
        while bits != 0 {
            let q = bits.trailing_zeros();
            bits &= bits - 1;
            let a = letter_index((self.x >> q) & 1, (self.z >> q) & 1);
            let b = letter_index((other.x >> q) & 1, (other.z >> q) & 1);
            if a != b {
                // X·Y = iZ, Y·Z = iX, Z·X = iY; reversed order gives −i
                k += if (b + 3 - a) % 3 == 1 { 1 } else { 3 };
            }
        }
        (
            k % 4,
            PauliString {
                x: self.x ^ other.x,
                z: self.z ^ other.z,
            },
        )
    }

    pub fn anticommutes(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 1
    }

    /// `P|b⟩ = phase · |b ⊕ x⟩`.
    #[inline]
    pub fn apply_to_basis(&self, b: usize) -> (usize, Complex64) {
        let sign = if ((b as u64) & self.z).count_ones() % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        (b ^ self.x as usize, i_pow(self.n_y()) * sign)
    }
}

fn letter_index(x: u64, z: u64) -> u32 {
    match (x, z) {
        (1, 0) => 0, // X
        (1, 1) => 1, // Y
        _ => 2,      // Z
    }
}

/// Real-weighted sum of Pauli words.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitHamiltonian {
    pub n_qubits: usize,
    /// Sorted by Pauli word, no duplicates.
    pub terms: Vec<(f64, PauliString)>,
}

impl QubitHamiltonian {
    /// Merge duplicate words and drop terms with `|c| < threshold`.
    pub fn from_terms(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (f64, PauliString)>,
        threshold: f64,
    ) -> Self {
        let mut map: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (c, p) in terms {
            *map.entry(p).or_insert(0.0) += c;
        }
        QubitHamiltonian {
            n_qubits,
            terms: map
                .into_iter()
                .filter(|(_, c)| c.abs() >= threshold)
                .map(|(p, c)| (c, p))
                .collect(),
        }
    }

    pub fn constant(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(_, p)| p.is_identity())
            .map(|(c, _)| *c)
            .sum()
    }

    pub fn non_identity_terms(&self) -> impl Iterator<Item = &(f64, PauliString)> {
        self.terms.iter().filter(|(_, p)| !p.is_identity())
    }

    /// One term per line: `coefficient pauli_word`, qubit 0 leftmost.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n_qubits = None;
        let mut terms = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(c), Some(w), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected 'coefficient word'".into(),
                });
            };
            let c: f64 = c.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad coefficient '{c}'"),
            })?;
            match n_qubits {
                None => n_qubits = Some(w.len()),
                Some(n) if n != w.len() => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: "inconsistent word length".into(),
                    })
                }
                _ => {}
            }
            terms.push((c, PauliString::parse_word(w)?));
        }
        Ok(QubitHamiltonian::from_terms(n_qubits.unwrap_or(0), terms, 0.0))
    }

    /// Matrix of the operator restricted to computational basis states with
    /// exactly `n_particles` set bits (ascending bit-pattern order).
    pub fn number_sector_matrix(&self, n_particles: usize) -> Result<DMatrix<f64>> {
        let n = self.n_qubits;
        let basis: Vec<usize> = (0..1usize << n)
            .filter(|b| b.count_ones() as usize == n_particles)
            .collect();
        let mut lookup = vec![usize::MAX; 1 << n];
        for (i, &b) in basis.iter().enumerate() {
            lookup[b] = i;
        }
        let dim = basis.len();
        let mut re = DMatrix::zeros(dim, dim);
        let mut im = DMatrix::<f64>::zeros(dim, dim);
        for &(c, p) in &self.terms {
            for (col, &b) in basis.iter().enumerate() {
                let (b2, phase) = p.apply_to_basis(b);
                let row = lookup[b2];
                if row == usize::MAX {
                    continue; // leaves the sector; absent for number-conserving operators
                }
                re[(row, col)] += c * phase.re;
                im[(row, col)] += c * phase.im;
            }
        }
        let worst = im.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if worst > 1e-10 {
            return Err(Error::NonHermitian(worst));
        }
        Ok(re)
    }
}

impl fmt::Display for QubitHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, p) in &self.terms {
            writeln!(f, "{:.17e} {}", c, p.word(self.n_qubits))?;
        }
        Ok(())
    }
}

/// `N = Σ_j ½(I − Z_j)`.
pub fn number_operator(n_qubits: usize) -> QubitHamiltonian {
    let mut terms = vec![(0.5 * n_qubits as f64, PauliString::IDENTITY)];
    for j in 0..n_qubits {
        terms.push((-0.5, PauliString { x: 0, z: 1 << j }));
    }
    QubitHamiltonian::from_terms(n_qubits, terms, 0.0)
}

/// Largest coefficient magnitude of the commutator `[A, B]`.
pub fn commutator_max_coefficient(a: &QubitHamiltonian, b: &QubitHamiltonian) -> f64 {
    let mut acc: BTreeMap<PauliString, Complex64> = BTreeMap::new();
    for &(ca, pa) in &a.terms {
        for &(cb, pb) in &b.terms {
            if pa.anticommutes(&pb) {
                let (k, p) = pa.mul(&pb);
                *acc.entry(p).or_default() += i_pow(k) * (2.0 * ca * cb);
            }
        }
    }
    acc.values().fold(0.0_f64, |m, v| m.max(v.norm()))
}
