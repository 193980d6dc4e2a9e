//! Restricted closed-shell Hartree–Fock in an orthonormal orbital basis.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fcidump::IntegralSet;
use crate::linalg::{eigh, max_abs_diff};

/// Spin-summed one-particle density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub values: DMatrix<f64>,
}

impl DensityMatrix {
    pub fn new(values: DMatrix<f64>) -> Self {
        DensityMatrix { values }
    }

    pub fn zeros(n: usize) -> Self {
        DensityMatrix {
            values: DMatrix::zeros(n, n),
        }
    }

    /// `2 C_occ C_occᵀ` from the first `n_occ` columns of `c`.
    pub fn from_occupied(c: &DMatrix<f64>, n_occ: usize) -> Self {
        let occ = c.columns(0, n_occ);
        DensityMatrix {
            values: occ * occ.transpose() * 2.0,
        }
    }

    pub fn n_orb(&self) -> usize {
        self.values.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.values.trace()
    }

    /// `max |D·D − 2D|`, zero for a closed-shell determinant.
    pub fn idempotency_error(&self) -> f64 {
        let dd = &self.values * &self.values;
        max_abs_diff(&dd, &(&self.values * 2.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScfResult {
    pub orbital_energies: Vec<f64>,
    /// Columns are molecular orbitals, sorted by energy.
    pub coefficients: DMatrix<f64>,
    pub density: DensityMatrix,
    pub total_energy: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Total energy after every iteration.
    pub energy_history: Vec<f64>,
}

impl ScfResult {
    pub fn n_occ(&self) -> usize {
        (self.density.trace().round() as usize) / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScfOptions {
    pub max_iter: usize,
    pub density_tol: f64,
    /// Added to the virtual block of the Fock matrix during iterations.
    pub level_shift: f64,
}

impl Default for ScfOptions {
    fn default() -> Self {
        ScfOptions {
            max_iter: 200,
            density_tol: 1e-10,
            level_shift: 0.0,
        }
    }
}

/// `F = h + J(D) − ½K(D)`.
pub fn fock_matrix(d: &DensityMatrix, s: &IntegralSet) -> Result<DMatrix<f64>> {
    if d.n_orb() != s.n_orb {
        return Err(Error::Dimension {
            expected: s.n_orb,
            found: d.n_orb(),
        });
    }
    Ok(&s.one_body + s.two_electron_field(&d.values))
}

/// Mean-field total energy `½ Tr[D (h + F)] + E_core`.
pub fn rhf_energy(d: &DensityMatrix, s: &IntegralSet) -> f64 {
    s.electronic_energy(&d.values) + s.core_energy
}

/// Self-consistent field iterations from a uniform diagonal guess.
///
/// Non-convergence is reported through `converged`, not as an error.
pub fn run_rhf(s: &IntegralSet, opts: &ScfOptions) -> Result<ScfResult> {
    if s.n_elec % 2 != 0 {
        return Err(Error::Unsupported(format!(
            "closed-shell RHF needs an even electron count, got {}",
            s.n_elec
        )));
    }
    let n = s.n_orb;
    let n_occ = s.n_elec / 2;
    let mut d = DensityMatrix::new(DMatrix::from_diagonal_element(
        n,
        n,
        s.n_elec as f64 / n as f64,
    ));
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let mut f = fock_matrix(&d, s)?;
        if opts.level_shift != 0.0 {
            // shift the space not occupied by the current density
            let virt = DMatrix::identity(n, n) - &d.values * 0.5;
            f += virt * opts.level_shift;
        }
        let (_, c) = eigh(&f);
        let d_new = DensityMatrix::from_occupied(&c, n_occ);
        let change = max_abs_diff(&d_new.values, &d.values);
        d = d_new;
        history.push(rhf_energy(&d, s));
        if change < opts.density_tol {
            converged = true;
            break;
        }
    }
    // canonical orbitals of the final density
    let f = fock_matrix(&d, s)?;
    let (eps, c) = eigh(&f);
    let total_energy = rhf_energy(&d, s);
    Ok(ScfResult {
        orbital_energies: eps,
        coefficients: c,
        density: d,
        total_energy,
        converged,
        iterations,
        energy_history: history,
    })
}
