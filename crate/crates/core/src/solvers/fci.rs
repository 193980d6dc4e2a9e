//! Full configuration interaction in the fixed-(N, S_z) determinant basis.
//!
//! Determinants are products of an alpha and a beta occupation string,
//! `|A⟩|B⟩ = Π_{i∈A} a†_{i↑} Π_{j∈B} a†_{j↓} |0⟩` with both products in
//! ascending orbital order. The Hamiltonian acts through spin-summed
//! excitation operators,
//! `H = Σ k_pq E_pq + ½ Σ (pq|rs) E_pq E_rs + E_core`,
//! `k_pq = h_pq − ½ Σ_r (pr|rq)`.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fcidump::IntegralSet;
use crate::linalg::{eigh, Tensor4};

/// Largest determinant space the solver accepts.
pub const FCI_CAPACITY: usize = 1 << 20;
/// Spaces up to this size are diagonalized densely.
const DENSE_LIMIT: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct FciResult {
    pub energy: f64,
    /// Spin-summed `γ_pq = ⟨E_pq⟩`.
    pub rdm1: DMatrix<f64>,
    /// Spin-summed `Γ_pqrs = Σ_στ ⟨a†_pσ a†_rτ a_sτ a_qσ⟩`, pairing with `(pq|rs)`.
    pub rdm2: Tensor4,
    /// Ground-state coefficients, alpha-major over the string lists below.
    pub vector: Vec<f64>,
    pub alpha_strings: Vec<u64>,
    pub beta_strings: Vec<u64>,
    pub n_orb: usize,
}

/// Occupation strings of `k` electrons in `n` orbitals, ascending.
fn strings(n: usize, k: usize) -> Vec<u64> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut s: u64 = (1 << k) - 1;
    let limit = 1u64 << n;
    while s < limit {
        out.push(s);
        // Gosper's hack: next integer with the same popcount
        let c = s & s.wrapping_neg();
        let r = s + c;
        s = (((r ^ s) >> 2) / c) | r;
    }
    out
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc.min(usize::MAX as u128) as usize
}

/// `E_pq` on a string: list of `(p, q, target index, sign)`.
type Excitations = Vec<Vec<(usize, usize, usize, f64)>>;

fn excitation_lists(n: usize, list: &[u64]) -> Excitations {
    let index: HashMap<u64, usize> = list.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    list.iter()
        .map(|&s| {
            let mut exc = Vec::new();
            for q in 0..n {
                if s & (1 << q) == 0 {
                    continue;
                }
                let sign_q = parity(s & ((1 << q) - 1));
                let s1 = s ^ (1 << q);
                for p in 0..n {
                    if s1 & (1 << p) != 0 {
                        continue;
                    }
                    let sign_p = parity(s1 & ((1 << p) - 1));
                    let t = s1 | (1 << p);
                    exc.push((p, q, index[&t], sign_q * sign_p));
                }
            }
            exc
        })
        .collect()
}

#[inline]
fn parity(bits: u64) -> f64 {
    if bits.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

struct Space<'a> {
    s: &'a IntegralSet,
    n: usize,
    alpha: Vec<u64>,
    beta: Vec<u64>,
    exc_a: Excitations,
    exc_b: Excitations,
    k: DMatrix<f64>,
}

impl<'a> Space<'a> {
    fn new(s: &'a IntegralSet, n_alpha: usize, n_beta: usize) -> Self {
        let n = s.n_orb;
        let alpha = strings(n, n_alpha);
        let beta = strings(n, n_beta);
        let exc_a = excitation_lists(n, &alpha);
        let exc_b = excitation_lists(n, &beta);
        let k = DMatrix::from_fn(n, n, |p, q| {
            s.one_body[(p, q)] - 0.5 * (0..n).map(|r| s.eri(p, r, r, q)).sum::<f64>()
        });
        Space {
            s,
            n,
            alpha,
            beta,
            exc_a,
            exc_b,
            k,
        }
    }

    fn dim(&self) -> usize {
        self.alpha.len() * self.beta.len()
    }

    /// `D[pq] = E_pq c` for every orbital pair, flattened as `(p*n+q)*dim + i`.
    fn excitation_vectors(&self, c: &[f64]) -> Vec<f64> {
        let (n, dim, nb) = (self.n, self.dim(), self.beta.len());
        let mut d = vec![0.0; n * n * dim];
        for (ia, exc) in self.exc_a.iter().enumerate() {
            for &(p, q, ja, sign) in exc {
                let base = (p * n + q) * dim;
                for ib in 0..nb {
                    d[base + ja * nb + ib] += sign * c[ia * nb + ib];
                }
            }
        }
        for ia in 0..self.alpha.len() {
            for (ib, exc) in self.exc_b.iter().enumerate() {
                let ci = c[ia * nb + ib];
                if ci == 0.0 {
                    continue;
                }
                for &(p, q, jb, sign) in exc {
                    d[(p * n + q) * dim + ia * nb + jb] += sign * ci;
                }
            }
        }
        d
    }

    /// `Σ_pq E_pq w[pq]` for vectors laid out like [`Self::excitation_vectors`].
    fn contract_excitations(&self, w: &[f64], out: &mut [f64]) {
        let (n, dim, nb) = (self.n, self.dim(), self.beta.len());
        for (ia, exc) in self.exc_a.iter().enumerate() {
            for &(p, q, ja, sign) in exc {
                let base = (p * n + q) * dim;
                for ib in 0..nb {
                    out[ja * nb + ib] += sign * w[base + ia * nb + ib];
                }
            }
        }
        for ia in 0..self.alpha.len() {
            for (ib, exc) in self.exc_b.iter().enumerate() {
                for &(p, q, jb, sign) in exc {
                    out[ia * nb + jb] += sign * w[(p * n + q) * dim + ia * nb + ib];
                }
            }
        }
    }

    fn sigma(&self, c: &[f64]) -> Vec<f64> {
        let (n, dim) = (self.n, self.dim());
        let d = self.excitation_vectors(c);
        let g = self.s.two_body.dense();
        // w[pq] = k_pq c + ½ Σ_rs (pq|rs) D[rs]; then σ = Σ E_pq w[pq]
        let mut w = vec![0.0; n * n * dim];
        for p in 0..n {
            for q in 0..n {
                let wpq = &mut w[(p * n + q) * dim..(p * n + q + 1) * dim];
                let kpq = self.k[(p, q)];
                if kpq != 0.0 {
                    axpy(kpq, c, wpq);
                }
                for r in 0..n {
                    for s in 0..n {
                        let v = g.get(p, q, r, s);
                        if v != 0.0 {
                            axpy(0.5 * v, &d[(r * n + s) * dim..(r * n + s + 1) * dim], wpq);
                        }
                    }
                }
            }
        }
        let mut out: Vec<f64> = c.iter().map(|x| x * self.s.core_energy).collect();
        self.contract_excitations(&w, &mut out);
        out
    }

    fn diagonal(&self) -> Vec<f64> {
        let s = self.s;
        let n = self.n;
        let occ = |bits: u64| (0..n).filter(move |&i| bits & (1 << i) != 0);
        let mut diag = Vec::with_capacity(self.dim());
        for &a in &self.alpha {
            for &b in &self.beta {
                let mut e = s.core_energy;
                for i in occ(a).chain(occ(b)) {
                    e += s.one_body[(i, i)];
                }
                for bits in [a, b] {
                    for i in occ(bits) {
                        for j in occ(bits) {
                            e += 0.5 * (s.eri(i, i, j, j) - s.eri(i, j, j, i));
                        }
                    }
                }
                for i in occ(a) {
                    for j in occ(b) {
                        e += s.eri(i, i, j, j);
                    }
                }
                diag.push(e);
            }
        }
        diag
    }

    fn dense_ground(&self) -> (f64, Vec<f64>) {
        let dim = self.dim();
        let mut h = DMatrix::zeros(dim, dim);
        let mut e = vec![0.0; dim];
        for j in 0..dim {
            e[j] = 1.0;
            let col = self.sigma(&e);
            e[j] = 0.0;
            for i in 0..dim {
                h[(i, j)] = col[i];
            }
        }
        let (w, v) = eigh(&h);
        (w[0], v.column(0).iter().copied().collect())
    }

    fn davidson_ground(&self) -> (f64, Vec<f64>) {
        const MAX_SUBSPACE: usize = 32;
        const TOL: f64 = 1e-10;
        let dim = self.dim();
        let diag = self.diagonal();
        let start = (0..dim)
            .min_by(|&a, &b| diag[a].total_cmp(&diag[b]))
            .unwrap_or(0);
        // small deterministic admixture so spin symmetry cannot trap the search
        let mut x: Vec<f64> = (0..dim)
            .map(|i| 1e-3 * (((i * 2654435761) % 1000) as f64 / 1000.0 - 0.5))
            .collect();
        x[start] = 1.0;
        normalize(&mut x);
        let mut basis: Vec<Vec<f64>> = vec![x];
        let mut sigmas: Vec<Vec<f64>> = vec![self.sigma(&basis[0])];
        let mut theta = 0.0;
        let mut ritz = basis[0].clone();
        for _ in 0..1000 {
            let m = basis.len();
            let sub = DMatrix::from_fn(m, m, |i, j| dot(&basis[i], &sigmas[j]));
            let (w, v) = eigh(&sub);
            theta = w[0];
            ritz = vec![0.0; dim];
            let mut hx = vec![0.0; dim];
            for k in 0..m {
                let c = v[(k, 0)];
                axpy(c, &basis[k], &mut ritz);
                axpy(c, &sigmas[k], &mut hx);
            }
            let mut r: Vec<f64> = hx.iter().zip(&ritz).map(|(a, b)| a - theta * b).collect();
            if dot(&r, &r).sqrt() < TOL {
                break;
            }
            for (i, ri) in r.iter_mut().enumerate() {
                let denom = theta - diag[i];
                *ri /= if denom.abs() < 1e-8 { 1e-8_f64.copysign(denom) } else { denom };
            }
            if m >= MAX_SUBSPACE {
                let hr = hx;
                basis = vec![ritz.clone()];
                sigmas = vec![hr];
            }
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &r);
                    axpy(-c, b, &mut r);
                }
            }
            let norm = dot(&r, &r).sqrt();
            if norm < 1e-14 {
                break;
            }
            r.iter_mut().for_each(|x| *x /= norm);
            sigmas.push(self.sigma(&r));
            basis.push(r);
        }
        normalize(&mut ritz);
        (theta, ritz)
    }

    fn rdms(&self, c: &[f64]) -> (DMatrix<f64>, Tensor4) {
        let (n, dim) = (self.n, self.dim());
        let d = self.excitation_vectors(c);
        let vec_pq = |p: usize, q: usize| &d[(p * n + q) * dim..(p * n + q + 1) * dim];
        let rdm1 = DMatrix::from_fn(n, n, |p, q| dot(c, vec_pq(p, q)));
        let mut rdm2 = Tensor4::zeros(n);
        for p in 0..n {
            for q in 0..n {
                let left = vec_pq(q, p);
                for r in 0..n {
                    for s in 0..n {
                        let mut v = dot(left, vec_pq(r, s));
                        if q == r {
                            v -= rdm1[(p, s)];
                        }
                        rdm2.set(p, q, r, s, v);
                    }
                }
            }
        }
        (rdm1, rdm2)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn normalize(x: &mut [f64]) {
    let n = dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= n);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) enum Diagonalizer {
    Auto,
    Dense,
    Davidson,
}

/// Lowest eigenpair of `s` with `n_elec` electrons, plus its RDMs.
///
/// The spin projection is `s.ms2` when `n_elec == s.n_elec`, otherwise the
/// lowest non-negative value compatible with `n_elec`.
pub fn fci_ground_state(s: &IntegralSet, n_elec: usize) -> Result<FciResult> {
    fci_with(s, n_elec, Diagonalizer::Auto)
}

pub(crate) fn fci_with(s: &IntegralSet, n_elec: usize, how: Diagonalizer) -> Result<FciResult> {
    let n = s.n_orb;
    if n_elec > 2 * n {
        return Err(Error::InvalidInput(format!(
            "{n_elec} electrons do not fit in {n} orbitals"
        )));
    }
    let ms2 = if n_elec == s.n_elec {
        s.ms2
    } else {
        (n_elec % 2) as i32
    };
    let n_alpha = ((n_elec as i64 + ms2 as i64) / 2) as usize;
    let n_beta = n_elec - n_alpha;
    if n_alpha > n || n_beta > n {
        return Err(Error::InvalidInput("spin projection out of range".into()));
    }
    let dim = binomial(n, n_alpha).saturating_mul(binomial(n, n_beta));
    if dim > FCI_CAPACITY || n > 63 {
        return Err(Error::Capacity {
            dim,
            limit: FCI_CAPACITY,
        });
    }
    let space = Space::new(s, n_alpha, n_beta);
    let dense = match how {
        Diagonalizer::Auto => dim <= DENSE_LIMIT,
        Diagonalizer::Dense => true,
        Diagonalizer::Davidson => false,
    };
    let (energy, vector) = if dense {
        space.dense_ground()
    } else {
        space.davidson_ground()
    };
    let (rdm1, rdm2) = space.rdms(&vector);
    Ok(FciResult {
        energy,
        rdm1,
        rdm2,
        vector,
        alpha_strings: space.alpha,
        beta_strings: space.beta,
        n_orb: n,
    })
}

/// Energy of a pair of spin-summed RDMs: `Σ h γ + ½ Σ (pq|rs) Γ + E_core`.
pub fn energy_from_rdms(s: &IntegralSet, rdm1: &DMatrix<f64>, rdm2: &Tensor4) -> f64 {
    let n = s.n_orb;
    let mut e = s.core_energy + s.one_body.component_mul(rdm1).sum();
    let g = s.two_body.dense();
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for t in 0..n {
                    e += 0.5 * g.get(p, q, r, t) * rdm2.get(p, q, r, t);
                }
            }
        }
    }
    e
}
