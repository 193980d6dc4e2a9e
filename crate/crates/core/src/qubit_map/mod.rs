//! Fermion-to-qubit mapping.
//!
//! Spin orbitals are interleaved: spatial orbital `p` with spin up is mode
//! `2p`, spin down is `2p + 1`. Mode `j` maps to qubit `j` under Jordan–Wigner,
//! `a†_j = ½(X_j − iY_j) Z_{j−1}⋯Z_0`.

mod pauli;

use std::collections::BTreeMap;

use num_complex::Complex64;

pub use pauli::{commutator_max_coefficient, number_operator, PauliString, QubitHamiltonian};

use crate::error::{Error, Result};
use crate::fcidump::IntegralSet;
use pauli::i_pow;

/// Merged Pauli terms below this magnitude are dropped.
pub const TERM_THRESHOLD: f64 = 1e-12;
/// Imaginary residue tolerated before an operator is declared non-Hermitian.
const HERMITIAN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LadderOp {
    pub mode: usize,
    pub dagger: bool,
}

impl LadderOp {
    pub fn create(mode: usize) -> Self {
        LadderOp { mode, dagger: true }
    }
    pub fn annihilate(mode: usize) -> Self {
        LadderOp {
            mode,
            dagger: false,
        }
    }
}

/// Real-weighted sum of products of ladder operators (applied right to left).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FermionOperator {
    pub n_modes: usize,
    pub terms: Vec<(f64, Vec<LadderOp>)>,
}

impl FermionOperator {
    pub fn new(n_modes: usize) -> Self {
        FermionOperator {
            n_modes,
            terms: Vec::new(),
        }
    }

    pub fn push(&mut self, coeff: f64, ops: Vec<LadderOp>) {
        self.terms.push((coeff, ops));
    }

    /// Hermitian adjoint: reverse each product and flip every dagger.
    pub fn adjoint(&self) -> FermionOperator {
        FermionOperator {
            n_modes: self.n_modes,
            terms: self
                .terms
                .iter()
                .map(|(c, ops)| {
                    (
                        *c,
                        ops.iter()
                            .rev()
                            .map(|o| LadderOp {
                                mode: o.mode,
                                dagger: !o.dagger,
                            })
                            .collect(),
                    )
                })
                .collect(),
        }
    }
}

#[inline]
pub fn spin_orbital(p: usize, spin_down: bool) -> usize {
    2 * p + spin_down as usize
}

/// `H = Σ h_pq a†_pσ a_qσ + ½ Σ (pr|qs) a†_pσ a†_qτ a_sτ a_rσ + E_core`
/// over `2·n_orb` interleaved spin orbitals.
pub fn to_spin_orbital(s: &IntegralSet) -> FermionOperator {
    let n = s.n_orb;
    let mut op = FermionOperator::new(2 * n);
    if s.core_energy != 0.0 {
        op.push(s.core_energy, Vec::new());
    }
    for p in 0..n {
        for q in 0..n {
            let h = s.one_body[(p, q)];
            if h == 0.0 {
                continue;
            }
            for spin in [false, true] {
                op.push(
                    h,
                    vec![
                        LadderOp::create(spin_orbital(p, spin)),
                        LadderOp::annihilate(spin_orbital(q, spin)),
                    ],
                );
            }
        }
    }
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for t in 0..n {
                    let g = s.eri(p, r, q, t);
                    if g == 0.0 {
                        continue;
                    }
                    for sigma in [false, true] {
                        for tau in [false, true] {
                            let (pp, qq) = (spin_orbital(p, sigma), spin_orbital(q, tau));
                            let (rr, tt) = (spin_orbital(r, sigma), spin_orbital(t, tau));
                            if pp == qq || rr == tt {
                                continue;
                            }
                            op.push(
                                0.5 * g,
                                vec![
                                    LadderOp::create(pp),
                                    LadderOp::create(qq),
                                    LadderOp::annihilate(tt),
                                    LadderOp::annihilate(rr),
                                ],
                            );
                        }
                    }
                }
            }
        }
    }
    op
}

/// Jordan–Wigner image of one ladder operator as two weighted Pauli words.
fn ladder_image(op: LadderOp) -> [(Complex64, PauliString); 2] {
    let j = op.mode;
    let below = (1u64 << j) - 1;
    let x_word = PauliString {
        x: 1 << j,
        z: below,
    };
    let y_word = PauliString {
        x: 1 << j,
        z: below | (1 << j),
    };
    let y_coeff = if op.dagger {
        Complex64::new(0.0, -0.5)
    } else {
        Complex64::new(0.0, 0.5)
    };
    [(Complex64::new(0.5, 0.0), x_word), (y_coeff, y_word)]
}

/// Map a Hermitian fermion operator to a real-weighted Pauli sum.
pub fn jordan_wigner(f: &FermionOperator) -> Result<QubitHamiltonian> {
    if f.n_modes > 64 {
        return Err(Error::Unsupported(format!(
            "{} modes exceed the 64-qubit word size",
            f.n_modes
        )));
    }
    let mut total: BTreeMap<PauliString, Complex64> = BTreeMap::new();
    let mut product: Vec<(Complex64, PauliString)> = Vec::with_capacity(16);
    let mut next: Vec<(Complex64, PauliString)> = Vec::with_capacity(16);
    for (coeff, ops) in &f.terms {
        product.clear();
        product.push((Complex64::new(*coeff, 0.0), PauliString::IDENTITY));
        for &op in ops {
            if op.mode >= f.n_modes {
                return Err(Error::InvalidInput(format!(
                    "mode {} outside {} modes",
                    op.mode, f.n_modes
                )));
            }
            next.clear();
            for &(c1, p1) in &product {
                for (c2, p2) in ladder_image(op) {
                    let (k, p) = p1.mul(&p2);
                    next.push((c1 * c2 * i_pow(k), p));
                }
            }
            std::mem::swap(&mut product, &mut next);
        }
        for &(c, p) in &product {
            *total.entry(p).or_default() += c;
        }
    }
    let mut terms = Vec::with_capacity(total.len());
    for (p, c) in total {
        if c.im.abs() > HERMITIAN_TOLERANCE {
            return Err(Error::NonHermitian(c.im));
        }
        terms.push((c.re, p));
    }
    Ok(QubitHamiltonian::from_terms(f.n_modes, terms, TERM_THRESHOLD))
}

/// Qubits needed for `n` spatial orbitals under a spin-orbital encoding.
pub fn count_qubits(n_spatial_orbitals: usize) -> usize {
    2 * n_spatial_orbitals
}

/// Convenience: integrals straight to a qubit Hamiltonian.
pub fn qubit_hamiltonian(s: &IntegralSet) -> Result<QubitHamiltonian> {
    jordan_wigner(&to_spin_orbital(s))
}
