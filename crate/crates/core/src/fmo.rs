//! Fragment molecular orbitals over an orbital partition.
//!
//! Monomers are solved self-consistently, each in the frozen `J − ½K` field
//! of all other monomer densities; dimers are then solved once in the field
//! of the remaining monomers. Energies are internal: they exclude the
//! interaction with the frozen field, which the pair corrections recover.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fcidump::{restrict_to_orbitals, IntegralSet};
use crate::mean_field::{run_rhf, DensityMatrix, ScfOptions, ScfResult};
use crate::partition::FragmentSpec;
use crate::solvers::Solver;

pub type PairMap = BTreeMap<(usize, usize), f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmoOptions {
    pub scc_tol: f64,
    pub max_scc_iter: usize,
    pub scf: ScfOptions,
}

impl Default for FmoOptions {
    fn default() -> Self {
        FmoOptions {
            scc_tol: 1e-6,
            max_scc_iter: 100,
            scf: ScfOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmoState {
    pub fragmentation: FragmentSpec,
    pub monomer_electrons: Vec<usize>,
    /// Full-basis densities, each supported on its fragment block.
    pub monomer_densities: Vec<DensityMatrix>,
    pub monomer_energies: Vec<f64>,
    /// Keyed by `(I, J)` with `I < J`.
    pub dimer_energies: PairMap,
    pub scc_iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmoCorrelation {
    pub monomer: Vec<f64>,
    pub dimer: PairMap,
}

/// Electrons per fragment: proportional to orbital count, rounded to even,
/// with the residual on the largest fragment (lowest orbital index on ties).
pub fn assign_electrons(n_elec: usize, frags: &FragmentSpec) -> Result<Vec<usize>> {
    let n_orb = frags.n_orb() as f64;
    let mut counts: Vec<i64> = frags
        .fragments()
        .iter()
        .map(|f| 2 * (n_elec as f64 * f.len() as f64 / (2.0 * n_orb)).round() as i64)
        .collect();
    let residual = n_elec as i64 - counts.iter().sum::<i64>();
    let largest = (0..frags.len())
        .max_by(|&a, &b| {
            let fa = &frags.fragments()[a];
            let fb = &frags.fragments()[b];
            fa.len()
                .cmp(&fb.len())
                .then(fb.iter().min().cmp(&fa.iter().min()))
        })
        .expect("at least one fragment");
    counts[largest] += residual;
    counts
        .iter()
        .zip(frags.fragments())
        .map(|(&c, f)| {
            if c < 0 || c as usize > 2 * f.len() {
                Err(Error::InvalidInput(format!(
                    "cannot place {c} electrons on fragment {f:?}"
                )))
            } else {
                Ok(c as usize)
            }
        })
        .collect()
}

/// Mean-field problem of `subset` with `n` electrons in the field of `frozen`.
fn embedded(s: &IntegralSet, subset: &[usize], frozen: &DMatrix<f64>, n: usize) -> Result<IntegralSet> {
    restrict_to_orbitals(s, subset, Some(&DensityMatrix::new(frozen.clone())))?.with_electrons(n)
}

/// `Tr(h D) + ½ Tr(D G(D))` of `subset` alone plus its share of the core energy.
fn internal_energy(s: &IntegralSet, subset: &[usize], d: &DMatrix<f64>, n: usize) -> Result<f64> {
    let bare = restrict_to_orbitals(s, subset, None)?;
    let share = if s.n_elec == 0 {
        s.core_energy
    } else {
        s.core_energy * n as f64 / s.n_elec as f64
    };
    Ok(bare.electronic_energy(d) + share)
}

fn scatter(n: usize, subset: &[usize], block: &DMatrix<f64>) -> DMatrix<f64> {
    let mut full = DMatrix::zeros(n, n);
    for (a, &p) in subset.iter().enumerate() {
        for (b, &q) in subset.iter().enumerate() {
            full[(p, q)] = block[(a, b)];
        }
    }
    full
}

fn frozen_sum(n: usize, densities: &[DensityMatrix], skip: &[usize]) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    for (k, dk) in densities.iter().enumerate() {
        if !skip.contains(&k) {
            d += &dk.values;
        }
    }
    d
}

fn solve_monomer(
    s: &IntegralSet,
    frag: &[usize],
    frozen: &DMatrix<f64>,
    n: usize,
    scf: &ScfOptions,
) -> Result<ScfResult> {
    run_rhf(&embedded(s, frag, frozen, n)?, scf)
}

pub fn monomer_scc_loop(s: &IntegralSet, frags: &FragmentSpec, opts: &FmoOptions) -> Result<FmoState> {
    if frags.n_orb() != s.n_orb {
        return Err(Error::Dimension {
            expected: s.n_orb,
            found: frags.n_orb(),
        });
    }
    let n = s.n_orb;
    let electrons = assign_electrons(s.n_elec, frags)?;
    let mut warnings = Vec::new();
    let zero = DMatrix::zeros(n, n);
    // isolated monomers start the loop
    let mut densities: Vec<DensityMatrix> = frags
        .fragments()
        .par_iter()
        .zip(&electrons)
        .map(|(f, &ne)| {
            let r = solve_monomer(s, f, &zero, ne, &opts.scf)?;
            Ok(DensityMatrix::new(scatter(n, f, &r.density.values)))
        })
        .collect::<Result<_>>()?;
    let mut previous_step: Option<Vec<DMatrix<f64>>> = None;
    let mut damping = false;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_scc_iter {
        iterations += 1;
        let results: Vec<ScfResult> = frags
            .fragments()
            .par_iter()
            .enumerate()
            .map(|(i, f)| solve_monomer(s, f, &frozen_sum(n, &densities, &[i]), electrons[i], &opts.scf))
            .collect::<Result<_>>()?;
        for (i, r) in results.iter().enumerate() {
            if !r.converged {
                warnings.push(format!("monomer {i} RHF not converged in sweep {iterations}"));
            }
        }
        let steps: Vec<DMatrix<f64>> = results
            .iter()
            .zip(frags.fragments())
            .zip(&densities)
            .map(|((r, f), d)| scatter(n, f, &r.density.values) - &d.values)
            .collect();
        let change = steps.iter().map(|m| m.abs().max()).fold(0.0, f64::max);
        if let Some(prev) = &previous_step {
            if steps.iter().zip(prev).any(|(a, b)| a.dot(b) < 0.0) {
                damping = true;
            }
        }
        let weight = if damping { 0.5 } else { 1.0 };
        for (d, step) in densities.iter_mut().zip(&steps) {
            d.values += step * weight;
        }
        previous_step = Some(steps);
        if change < opts.scc_tol {
            converged = true;
            break;
        }
    }
    let monomer_energies = frags
        .fragments()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let block = DMatrix::from_fn(f.len(), f.len(), |a, b| densities[i].values[(f[a], f[b])]);
            internal_energy(s, f, &block, electrons[i])
        })
        .collect::<Result<_>>()?;
    Ok(FmoState {
        fragmentation: frags.clone(),
        monomer_electrons: electrons,
        monomer_densities: densities,
        monomer_energies,
        dimer_energies: PairMap::new(),
        scc_iterations: iterations,
        converged,
        warnings,
    })
}

fn pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect()
}

fn dimer_problem(s: &IntegralSet, state: &FmoState, i: usize, j: usize) -> Result<(Vec<usize>, IntegralSet, usize)> {
    let frags = state.fragmentation.fragments();
    let subset: Vec<usize> = frags[i].iter().chain(&frags[j]).copied().collect();
    let ne = state.monomer_electrons[i] + state.monomer_electrons[j];
    let frozen = frozen_sum(s.n_orb, &state.monomer_densities, &[i, j]);
    Ok((subset.clone(), embedded(s, &subset, &frozen, ne)?, ne))
}

pub fn dimer_energies(s: &IntegralSet, state: &FmoState, opts: &FmoOptions) -> Result<FmoState> {
    let results: Vec<((usize, usize), f64, bool)> = pairs(state.fragmentation.len())
        .into_par_iter()
        .map(|(i, j)| {
            let (subset, problem, ne) = dimer_problem(s, state, i, j)?;
            let r = run_rhf(&problem, &opts.scf)?;
            Ok(((i, j), internal_energy(s, &subset, &r.density.values, ne)?, r.converged))
        })
        .collect::<Result<_>>()?;
    let mut out = state.clone();
    for (key, e, ok) in results {
        if !ok {
            out.warnings.push(format!("dimer {key:?} RHF not converged"));
        }
        out.dimer_energies.insert(key, e);
    }
    Ok(out)
}

fn pair_value(map: &PairMap, i: usize, j: usize) -> Result<f64> {
    map.get(&(i, j))
        .or_else(|| map.get(&(j, i)))
        .copied()
        .ok_or(Error::MissingPair(i, j))
}

/// `Σ_I E_I + Σ_{I>J} (E_IJ − E_I − E_J)`.
pub fn assemble_fmo_energy(monomers: &[f64], dimers: &PairMap) -> Result<f64> {
    let mut e: f64 = monomers.iter().sum();
    for (i, j) in pairs(monomers.len()) {
        e += pair_value(dimers, i, j)? - monomers[i] - monomers[j];
    }
    Ok(e)
}

/// The same two-body expansion applied to correlation energies.
pub fn assemble_fmo_correlation(c: &FmoCorrelation) -> Result<f64> {
    assemble_fmo_energy(&c.monomer, &c.dimer)
}

/// Correlated-minus-RHF energy of every monomer and dimer, each in the
/// converged monomer field. No further self-consistency.
pub fn fmo_correlation(s: &IntegralSet, state: &FmoState, solver: &Solver, opts: &FmoOptions) -> Result<FmoCorrelation> {
    let corr = |problem: &IntegralSet, ne: usize| -> Result<f64> {
        let rhf = run_rhf(problem, &opts.scf)?;
        Ok(solver.solve(problem, ne)?.energy - rhf.total_energy)
    };
    let frags = state.fragmentation.fragments();
    let monomer = frags
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let frozen = frozen_sum(s.n_orb, &state.monomer_densities, &[i]);
            let ne = state.monomer_electrons[i];
            corr(&embedded(s, f, &frozen, ne)?, ne)
        })
        .collect::<Result<_>>()?;
    let dimer = pairs(frags.len())
        .into_par_iter()
        .map(|(i, j)| {
            let (_, problem, ne) = dimer_problem(s, state, i, j)?;
            Ok(((i, j), corr(&problem, ne)?))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    Ok(FmoCorrelation { monomer, dimer })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmoReport {
    pub state: FmoState,
    pub energy: f64,
    pub correlation: Option<(FmoCorrelation, f64)>,
}

/// Monomer loop, dimers, two-body assembly and optionally correlation.
pub fn run_fmo(s: &IntegralSet, frags: &FragmentSpec, solver: Option<&Solver>, opts: &FmoOptions) -> Result<FmoReport> {
    let state = monomer_scc_loop(s, frags, opts)?;
    let state = dimer_energies(s, &state, opts)?;
    let energy = assemble_fmo_energy(&state.monomer_energies, &state.dimer_energies)?;
    let correlation = match solver {
        Some(solver) => {
            let c = fmo_correlation(s, &state, solver, opts)?;
            let total = assemble_fmo_correlation(&c)?;
            Some((c, total))
        }
        None => None,
    };
    Ok(FmoReport {
        state,
        energy,
        correlation,
    })
}
