//! Divide-and-conquer Hartree–Fock.
//!
//! Each subsystem (fragment plus buffer) diagonalizes its block of the
//! global Fock matrix. A single Fermi level fills all subsystem orbitals,
//! and partition matrices stitch the subsystem densities into one global
//! density, which rebuilds the Fock matrix for the next pass.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fcidump::{restrict_to_orbitals, IntegralSet};
use crate::linalg::{eigh, submatrix};
use crate::mean_field::{fock_matrix, rhf_energy, run_rhf, DensityMatrix, ScfOptions};
use crate::partition::FragmentSpec;
use crate::solvers::Solver;

pub const DEFAULT_BETA: f64 = 1000.0;
/// Largest `|β x|` fed to the exponential in the occupation function.
const EXPONENT_CLAMP: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DcSubsystem {
    pub fragment: Vec<usize>,
    pub buffer: Vec<usize>,
}

impl DcSubsystem {
    pub fn new(fragment: Vec<usize>, buffer: Vec<usize>) -> Result<Self> {
        if let Some(p) = fragment.iter().find(|p| buffer.contains(p)) {
            return Err(Error::InvalidInput(format!(
                "orbital {p} is both fragment and buffer"
            )));
        }
        Ok(DcSubsystem { fragment, buffer })
    }

    /// Fragment orbitals followed by buffer orbitals.
    pub fn orbitals(&self) -> Vec<usize> {
        self.fragment.iter().chain(&self.buffer).copied().collect()
    }
}

/// Buffers of all orbitals within `k` steps of the fragment along the
/// orbital chain `0 − 1 − ⋯ − (n−1)`, closed into a ring if `periodic`.
pub fn orbital_neighbor_buffers(frags: &FragmentSpec, k: usize, periodic: bool) -> Vec<DcSubsystem> {
    let n = frags.n_orb();
    frags
        .fragments()
        .iter()
        .map(|f| {
            let buffer = (0..n)
                .filter(|p| !f.contains(p))
                .filter(|&p| {
                    f.iter().any(|&q| {
                        let d = p.abs_diff(q);
                        let d = if periodic { d.min(n - d) } else { d };
                        d <= k
                    })
                })
                .collect();
            DcSubsystem {
                fragment: f.clone(),
                buffer,
            }
        })
        .collect()
}

/// Buffers made of the `k` nearest fragments on each side in fragment
/// order, wrapping around if `periodic`.
pub fn fragment_neighbor_buffers(frags: &FragmentSpec, k: usize, periodic: bool) -> Vec<DcSubsystem> {
    let m = frags.len();
    let all = frags.fragments();
    (0..m)
        .map(|i| {
            let mut buffer: Vec<usize> = (0..m)
                .filter(|&j| j != i)
                .filter(|&j| {
                    let d = i.abs_diff(j);
                    let d = if periodic { d.min(m - d) } else { d };
                    d <= k
                })
                .flat_map(|j| all[j].iter().copied())
                .collect();
            buffer.sort_unstable();
            DcSubsystem {
                fragment: all[i].clone(),
                buffer,
            }
        })
        .collect()
}

/// `p_μν`: 1 inside the fragment, ½ between fragment and buffer, else 0.
pub fn partition_matrix(sub: &DcSubsystem, n_orb: usize) -> Result<DMatrix<f64>> {
    let sub = DcSubsystem::new(sub.fragment.clone(), sub.buffer.clone())?;
    let mut role = vec![0u8; n_orb];
    for &p in &sub.buffer {
        if p >= n_orb {
            return Err(Error::InvalidInput(format!("buffer orbital {p} out of range")));
        }
        role[p] = 1;
    }
    for &p in &sub.fragment {
        if p >= n_orb {
            return Err(Error::InvalidInput(format!("fragment orbital {p} out of range")));
        }
        role[p] = 2;
    }
    Ok(DMatrix::from_fn(n_orb, n_orb, |m, v| match (role[m], role[v]) {
        (2, 2) => 1.0,
        (2, 1) | (1, 2) => 0.5,
        _ => 0.0,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemSpectrum {
    pub energies: Vec<f64>,
    /// Full-basis coefficients, zero outside the subsystem.
    pub coefficients: DMatrix<f64>,
    pub partition: DMatrix<f64>,
}

impl SubsystemSpectrum {
    /// `w_q = Σ_μ p_μμ C_μq²`, the fragment weight of each orbital.
    fn weights(&self) -> Vec<f64> {
        let c = &self.coefficients;
        (0..c.ncols())
            .map(|q| (0..c.nrows()).map(|m| self.partition[(m, m)] * c[(m, q)].powi(2)).sum())
            .collect()
    }
}

/// Eigenpairs of the subsystem block of `F(D)`.
pub fn subsystem_hf(s: &IntegralSet, sub: &DcSubsystem, global: &DensityMatrix) -> Result<SubsystemSpectrum> {
    let f = fock_matrix(global, s)?;
    spectrum_from_fock(&f, sub)
}

fn spectrum_from_fock(f: &DMatrix<f64>, sub: &DcSubsystem) -> Result<SubsystemSpectrum> {
    let n = f.nrows();
    let partition = partition_matrix(sub, n)?;
    let idx = sub.orbitals();
    let (energies, v) = eigh(&submatrix(f, &idx, &idx));
    let mut coefficients = DMatrix::zeros(n, idx.len());
    for (a, &p) in idx.iter().enumerate() {
        for q in 0..idx.len() {
            coefficients[(p, q)] = v[(a, q)];
        }
    }
    Ok(SubsystemSpectrum {
        energies,
        coefficients,
        partition,
    })
}

/// `1 / (1 + exp(−β x))` with the exponent clamped.
pub fn occupation(x: f64, beta: f64) -> f64 {
    1.0 / (1.0 + (-(beta * x).clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP)).exp())
}

fn electron_count(spectra: &[(Vec<f64>, Vec<f64>)], fermi: f64, beta: f64) -> f64 {
    spectra
        .iter()
        .map(|(eps, w)| {
            eps.iter()
                .zip(w)
                .map(|(e, w)| 2.0 * w * occupation(fermi - e, beta))
                .sum::<f64>()
        })
        .sum()
}

/// Bisection for the global Fermi level matching `n_elec` to 1e-9 electrons.
pub fn fermi_level(spectra: &[SubsystemSpectrum], n_elec: usize, beta: f64) -> Result<f64> {
    if spectra.is_empty() {
        return Err(Error::Empty("no subsystem spectra".into()));
    }
    let prepared: Vec<(Vec<f64>, Vec<f64>)> = spectra
        .iter()
        .map(|s| (s.energies.clone(), s.weights()))
        .collect();
    let all = prepared.iter().flat_map(|(e, _)| e.iter().copied());
    let (min, max) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| (a.min(e), b.max(e)));
    let margin = 1.0 + EXPONENT_CLAMP / beta.abs().max(1e-300);
    let (mut lo, mut hi) = (min - margin, max + margin);
    let target = n_elec as f64;
    let (n_lo, n_hi) = (electron_count(&prepared, lo, beta), electron_count(&prepared, hi, beta));
    if !(n_lo <= target + 1e-9 && target - 1e-9 <= n_hi) {
        return Err(Error::Bracket {
            lo,
            n_lo,
            hi,
            n_hi,
            target,
        });
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        let n = electron_count(&prepared, mid, beta);
        if (n - target).abs() < 1e-10 || mid == lo || mid == hi {
            break;
        }
        if n < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// `D = Σ_α 2 p^α ∘ (C^α f C^αᵀ)`.
pub fn assemble_dc_density(spectra: &[SubsystemSpectrum], fermi: f64, beta: f64) -> DensityMatrix {
    let n = spectra.first().map_or(0, |s| s.coefficients.nrows());
    let mut d = DMatrix::zeros(n, n);
    for sp in spectra {
        let occ: Vec<f64> = sp.energies.iter().map(|e| occupation(fermi - e, beta)).collect();
        let mut scaled = sp.coefficients.clone();
        for (q, o) in occ.iter().enumerate() {
            scaled.column_mut(q).scale_mut(*o);
        }
        let local = &scaled * sp.coefficients.transpose();
        d += local.component_mul(&sp.partition) * 2.0;
    }
    DensityMatrix::new(d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcOptions {
    pub beta: f64,
    pub outer_tol: f64,
    pub max_outer: usize,
}

impl Default for DcOptions {
    fn default() -> Self {
        DcOptions {
            beta: DEFAULT_BETA,
            outer_tol: 1e-8,
            max_outer: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcResult {
    pub density: DensityMatrix,
    pub fermi_level: f64,
    pub mean_field_energy: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub change_history: Vec<f64>,
}

fn check_cover(s: &IntegralSet, subs: &[DcSubsystem]) -> Result<()> {
    let frags: Vec<Vec<usize>> = subs.iter().map(|x| x.fragment.clone()).collect();
    FragmentSpec::new(s.n_orb, frags).map(|_| ())
}

pub fn dc_scf_loop(s: &IntegralSet, subs: &[DcSubsystem], opts: &DcOptions) -> Result<DcResult> {
    check_cover(s, subs)?;
    let n = s.n_orb;
    let mut d = DensityMatrix::new(DMatrix::from_diagonal_element(n, n, s.n_elec as f64 / n as f64));
    let mut fermi = 0.0;
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_outer {
        let f = fock_matrix(&d, s)?;
        let spectra: Vec<SubsystemSpectrum> = subs
            .par_iter()
            .map(|sub| spectrum_from_fock(&f, sub))
            .collect::<Result<_>>()?;
        fermi = fermi_level(&spectra, s.n_elec, opts.beta)?;
        let next = assemble_dc_density(&spectra, fermi, opts.beta);
        let change = (&next.values - &d.values).abs().max();
        history.push(change);
        d = next;
        if change < opts.outer_tol {
            converged = true;
            break;
        }
    }
    Ok(DcResult {
        mean_field_energy: rhf_energy(&d, s),
        density: d,
        fermi_level: fermi,
        outer_iterations: history.len(),
        converged,
        change_history: history,
    })
}

/// Raw correlation energy of one subsystem. These are not additive and are
/// not assembled into a total.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemCorrelation {
    pub n_elec: usize,
    pub energy: f64,
}

/// Correlated-minus-RHF energy of every subsystem, each embedded in the
/// `J − ½K` field of the converged DC density outside it.
pub fn subsystem_correlation(
    s: &IntegralSet,
    subs: &[DcSubsystem],
    dc: &DcResult,
    solver: &Solver,
) -> Result<Vec<SubsystemCorrelation>> {
    subs.par_iter()
        .map(|sub| {
            let idx = sub.orbitals();
            let inside: f64 = idx.iter().map(|&p| dc.density.values[(p, p)]).sum();
            let n_elec = (2.0 * (inside / 2.0).round()).max(0.0) as usize;
            let problem = restrict_to_orbitals(s, &idx, Some(&dc.density))?.with_electrons(n_elec)?;
            let rhf = run_rhf(&problem, &ScfOptions::default())?;
            let corr = solver.solve(&problem, n_elec)?.energy - rhf.total_energy;
            Ok(SubsystemCorrelation {
                n_elec,
                energy: corr,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_cases() {
        let a = partition_matrix(&DcSubsystem::new(vec![0], vec![1]).unwrap(), 2).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.0]));
        let b = partition_matrix(&DcSubsystem::new(vec![0, 1], vec![]).unwrap(), 2).unwrap();
        assert_eq!(b, DMatrix::from_element(2, 2, 1.0));
        let c = partition_matrix(&DcSubsystem::new(vec![0], vec![]).unwrap(), 2).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert!(DcSubsystem::new(vec![0, 1], vec![1]).is_err());
    }

    fn diagonal_spectrum(eps: &[f64]) -> SubsystemSpectrum {
        let n = eps.len();
        SubsystemSpectrum {
            energies: eps.to_vec(),
            coefficients: DMatrix::identity(n, n),
            partition: DMatrix::from_element(n, n, 1.0),
        }
    }

    #[test]
    fn gapped_filling() {
        let sp = [diagonal_spectrum(&[-1.0, 1.0])];
        let ef = fermi_level(&sp, 2, DEFAULT_BETA).unwrap();
        assert!(ef > -1.0 && ef < 1.0);
        let d = assemble_dc_density(&sp, ef, DEFAULT_BETA);
        assert!((d.values[(0, 0)] - 2.0).abs() < 1e-12);
        assert!(d.values[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn symmetric_half_filling() {
        let sp = [diagonal_spectrum(&[-0.3, 0.3])];
        assert!(fermi_level(&sp, 2, DEFAULT_BETA).unwrap().abs() < 1e-12);
    }

    #[test]
    fn occupation_is_clamped() {
        assert_eq!(occupation(1e9, 1e3), 1.0);
        assert!(occupation(-1e9, 1e3) > 0.0);
        assert_eq!(occupation(0.0, 1e3), 0.5);
    }

    #[test]
    fn too_many_electrons_is_a_bracket_error() {
        let sp = [diagonal_spectrum(&[-1.0, 1.0])];
        assert!(matches!(fermi_level(&sp, 6, DEFAULT_BETA), Err(Error::Bracket { .. })));
    }
}
