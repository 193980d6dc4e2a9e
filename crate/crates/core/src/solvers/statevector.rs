//! Dense statevector simulation, parametrized circuits and measurement.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::Tensor4;
use crate::qubit_map::QubitHamiltonian;

use super::fci::FciResult;

/// Largest register the simulator allocates.
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// Computational basis state; bit `k` of `index` is qubit `k`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::Capacity {
                dim: n_qubits,
                limit: MAX_QUBITS,
            });
        }
        if index >= 1 << n_qubits {
            return Err(Error::InvalidInput(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Statevector {
            n_qubits,
            amplitudes,
        })
    }

    /// Lowest `n_occupied` qubits set.
    pub fn reference(n_qubits: usize, n_occupied: usize) -> Result<Self> {
        if n_occupied > n_qubits {
            return Err(Error::InvalidInput(format!(
                "{n_occupied} occupied modes exceed {n_qubits} qubits"
            )));
        }
        Self::basis(n_qubits, (1usize << n_occupied) - 1)
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!("state norm² is {norm}")));
        }
        Ok(Statevector {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn apply(&mut self, gate: &Gate, theta: f64) {
        let amps = &mut self.amplitudes;
        match *gate {
            Gate::Ry { qubit } => {
                let (s, c) = (0.5 * theta).sin_cos();
                let bit = 1 << qubit;
                for b in 0..amps.len() {
                    if b & bit == 0 {
                        let (a0, a1) = (amps[b], amps[b | bit]);
                        amps[b] = a0 * c - a1 * s;
                        amps[b | bit] = a0 * s + a1 * c;
                    }
                }
            }
            Gate::Rz { qubit } => {
                let bit = 1 << qubit;
                let lo = Complex64::from_polar(1.0, -0.5 * theta);
                let hi = lo.conj();
                for (b, a) in amps.iter_mut().enumerate() {
                    *a *= if b & bit == 0 { lo } else { hi };
                }
            }
            Gate::Cz { a, b } => {
                let mask = (1 << a) | (1 << b);
                for (i, amp) in amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
            Gate::Givens { a, b } => {
                let (s, c) = theta.sin_cos();
                let (ba, bb) = (1usize << a, 1usize << b);
                let (lo, hi) = (a.min(b), a.max(b));
                let between = ((1usize << hi) - 1) & !((1usize << (lo + 1)) - 1);
                for i in 0..amps.len() {
                    if i & ba != 0 && i & bb == 0 {
                        let j = i ^ ba ^ bb;
                        let sign = if (i & between).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                        let (u, v) = (amps[i], amps[j]);
                        amps[i] = u * c - v * (sign * s);
                        amps[j] = v * c + u * (sign * s);
                    }
                }
            }
            Gate::PairExchange { from, to } => {
                let (s, c) = theta.sin_cos();
                let fm = (1usize << from[0]) | (1usize << from[1]);
                let tm = (1usize << to[0]) | (1usize << to[1]);
                for i in 0..amps.len() {
                    if i & fm == fm && i & tm == 0 {
                        let j = i ^ fm ^ tm;
                        let (u, v) = (amps[i], amps[j]);
                        amps[i] = u * c - v * s;
                        amps[j] = v * c + u * s;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    /// `exp(−iθY/2)`, parametrized.
    Ry { qubit: usize },
    /// `exp(−iθZ/2)`, parametrized.
    Rz { qubit: usize },
    /// Controlled-Z, fixed.
    Cz { a: usize, b: usize },
    /// `exp(θ(a†_b a_a − a†_a a_b))` under Jordan–Wigner, parametrized.
    Givens { a: usize, b: usize },
    /// Rotation by θ between `|11⟩` on `from` and `|11⟩` on `to`, the other
    /// pair empty. Parametrized.
    PairExchange { from: [usize; 2], to: [usize; 2] },
}

impl Gate {
    pub fn is_parametrized(&self) -> bool {
        !matches!(self, Gate::Cz { .. })
    }

    fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Ry { qubit } | Gate::Rz { qubit } => vec![qubit],
            Gate::Cz { a, b } | Gate::Givens { a, b } => vec![a, b],
            Gate::PairExchange { from, to } => vec![from[0], from[1], to[0], to[1]],
        }
    }
}

/// A fixed gate sequence; parametrized gates consume parameters in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Ansatz {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
}

impl Ansatz {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            let mut q = g.qubits();
            let len = q.len();
            q.sort_unstable();
            q.dedup();
            if q.len() != len || q.iter().any(|&x| x >= n_qubits) {
                return Err(Error::InvalidInput(format!(
                    "gate {g:?} does not fit {n_qubits} qubits"
                )));
            }
        }
        let n_params = gates.iter().filter(|g| g.is_parametrized()).count();
        Ok(Ansatz {
            n_qubits,
            gates,
            n_params,
        })
    }

    /// `layers` repetitions of Ry·Rz on every qubit followed by a CZ chain.
    pub fn hardware_efficient(n_qubits: usize, layers: usize) -> Self {
        let mut gates = Vec::new();
        for _ in 0..layers {
            for q in 0..n_qubits {
                gates.push(Gate::Ry { qubit: q });
                gates.push(Gate::Rz { qubit: q });
            }
            for q in 1..n_qubits {
                gates.push(Gate::Cz { a: q - 1, b: q });
            }
        }
        Ansatz::new(n_qubits, gates).expect("hardware-efficient layout is valid")
    }

    /// Brick-wall layers over neighbouring spatial orbitals `(p, p+1)`, each
    /// block a pair exchange followed by one Givens rotation per spin.
    ///
    /// Qubits are interleaved spin orbitals, so `n_qubits` must be even.
    /// Every gate conserves particle number and spin projection and is the
    /// identity at zero angle.
    pub fn particle_conserving(n_qubits: usize, layers: usize) -> Result<Self> {
        if n_qubits % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "spin-orbital register needs an even qubit count, got {n_qubits}"
            )));
        }
        let n = n_qubits / 2;
        let mut gates = Vec::new();
        for _ in 0..layers {
            for start in [0, 1] {
                let mut p = start;
                while p + 1 < n {
                    let (u, d) = (2 * p, 2 * p + 1);
                    gates.push(Gate::PairExchange {
                        from: [u, d],
                        to: [u + 2, d + 2],
                    });
                    gates.push(Gate::Givens { a: u, b: u + 2 });
                    gates.push(Gate::Givens { a: d, b: d + 2 });
                    p += 2;
                }
            }
        }
        Ansatz::new(n_qubits, gates)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }
}

pub fn apply_ansatz(ansatz: &Ansatz, params: &[f64], reference: &Statevector) -> Result<Statevector> {
    if params.len() != ansatz.n_params {
        return Err(Error::Dimension {
            expected: ansatz.n_params,
            found: params.len(),
        });
    }
    if reference.n_qubits != ansatz.n_qubits {
        return Err(Error::Dimension {
            expected: ansatz.n_qubits,
            found: reference.n_qubits,
        });
    }
    let mut psi = reference.clone();
    let mut next = params.iter();
    for g in &ansatz.gates {
        let theta = if g.is_parametrized() {
            *next.next().expect("parameter count checked")
        } else {
            0.0
        };
        psi.apply(g, theta);
    }
    Ok(psi)
}

/// `⟨ψ|P|ψ⟩` for every term, in term order.
pub fn term_expectations(psi: &Statevector, h: &QubitHamiltonian) -> Result<Vec<f64>> {
    if h.n_qubits != psi.n_qubits {
        return Err(Error::Dimension {
            expected: h.n_qubits,
            found: psi.n_qubits,
        });
    }
    let amps = &psi.amplitudes;
    h.terms
        .iter()
        .map(|(_, p)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (b, a) in amps.iter().enumerate() {
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let (target, phase) = p.apply_to_basis(b);
                acc += amps[target].conj() * phase * a;
            }
            if acc.im.abs() > 1e-10 {
                return Err(Error::NonHermitian(acc.im.abs()));
            }
            Ok(acc.re)
        })
        .collect()
}

/// `⟨ψ|H|ψ⟩`.
pub fn exact_expectation(psi: &Statevector, h: &QubitHamiltonian) -> Result<f64> {
    let values = term_expectations(psi, h)?;
    Ok(h.terms.iter().zip(values).map(|((c, _), v)| c * v).sum())
}

fn annihilate(amps: &[Complex64], mode: usize) -> Vec<Complex64> {
    let bit = 1usize << mode;
    let below = bit - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
    for (b, a) in amps.iter().enumerate() {
        if b & bit != 0 {
            let sign = if (b & below).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            out[b ^ bit] = a * sign;
        }
    }
    out
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Spin-summed one- and two-particle RDMs over `n_spatial` orbitals of a
/// state on `2 n_spatial` interleaved spin-orbital qubits.
pub fn rdm_from_state(psi: &Statevector, n_spatial: usize) -> Result<(DMatrix<f64>, Tensor4)> {
    let n_modes = 2 * n_spatial;
    if psi.n_qubits != n_modes {
        return Err(Error::Dimension {
            expected: n_modes,
            found: psi.n_qubits,
        });
    }
    let single: Vec<Vec<Complex64>> = (0..n_modes).map(|k| annihilate(&psi.amplitudes, k)).collect();
    let rdm1 = DMatrix::from_fn(n_spatial, n_spatial, |p, q| {
        (0..2)
            .map(|s| inner(&single[2 * p + s], &single[2 * q + s]).re)
            .sum()
    });
    // double[k][l] = a_l a_k ψ
    let double: Vec<Vec<Vec<Complex64>>> = single
        .iter()
        .map(|v| (0..n_modes).map(|l| annihilate(v, l)).collect())
        .collect();
    let mut rdm2 = Tensor4::zeros(n_spatial);
    for p in 0..n_spatial {
        for q in 0..n_spatial {
            for r in 0..n_spatial {
                for s in 0..n_spatial {
                    let mut v = 0.0;
                    for sig in 0..2 {
                        for tau in 0..2 {
                            v += inner(
                                &double[2 * p + sig][2 * r + tau],
                                &double[2 * q + sig][2 * s + tau],
                            )
                            .re;
                        }
                    }
                    rdm2.set(p, q, r, s, v);
                }
            }
        }
    }
    Ok((rdm1, rdm2))
}

/// The FCI ground state as a qubit statevector in the interleaved
/// Jordan–Wigner ordering.
pub fn fci_to_statevector(fci: &FciResult) -> Result<Statevector> {
    let n_qubits = 2 * fci.n_orb;
    if n_qubits > MAX_QUBITS {
        return Err(Error::Capacity {
            dim: n_qubits,
            limit: MAX_QUBITS,
        });
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
    let nb = fci.beta_strings.len();
    for (ia, &a) in fci.alpha_strings.iter().enumerate() {
        for (ib, &b) in fci.beta_strings.iter().enumerate() {
            let mut modes: Vec<usize> = (0..fci.n_orb)
                .filter(|i| a & (1 << i) != 0)
                .map(|i| 2 * i)
                .collect();
            modes.extend((0..fci.n_orb).filter(|i| b & (1 << i) != 0).map(|i| 2 * i + 1));
            let mut inversions = 0;
            for i in 0..modes.len() {
                for j in i + 1..modes.len() {
                    if modes[i] > modes[j] {
                        inversions += 1;
                    }
                }
            }
            let index: usize = modes.iter().map(|m| 1usize << m).sum();
            let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            amps[index] = Complex64::new(sign * fci.vector[ia * nb + ib], 0.0);
        }
    }
    Ok(Statevector {
        n_qubits,
        amplitudes: amps,
    })
}
