//! Variational quantum eigensolver on the statevector simulator.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fcidump::IntegralSet;
use crate::linalg::Tensor4;
use crate::mean_field::{run_rhf, ScfOptions};
use crate::qubit_map::{qubit_hamiltonian, QubitHamiltonian};

use super::optim::{bfgs, nelder_mead, spsa, BfgsOptions, Minimum, NelderMeadOptions, SpsaOptions};
use super::sampling::{sampled_expectation_with, SamplingPlan, Shots};
use super::statevector::{apply_ansatz, exact_expectation, rdm_from_state, Ansatz, Statevector};
use super::CorrelatedSolution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    NelderMead(NelderMeadOptions),
    Spsa(SpsaOptions),
    Bfgs(BfgsOptions),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VqeOptions {
    /// `None` picks Nelder–Mead for exact expectations and SPSA under shot noise.
    pub optimizer: Option<Optimizer>,
    /// Half-width of the uniform initial parameter draw around zero.
    pub initial_spread: f64,
}

impl Default for VqeOptions {
    fn default() -> Self {
        VqeOptions {
            optimizer: None,
            initial_spread: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqeResult {
    /// Equal to the last entry of `energy_trace`.
    pub energy: f64,
    pub parameters: Vec<f64>,
    pub energy_trace: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimize `⟨ψ(θ)|H|ψ(θ)⟩` with `ψ(θ) = U(θ)|reference⟩`.
pub fn run_vqe(
    h: &QubitHamiltonian,
    ansatz: &Ansatz,
    reference: &Statevector,
    opts: &VqeOptions,
    plan: &SamplingPlan,
) -> Result<VqeResult> {
    if h.n_qubits != ansatz.n_qubits() {
        return Err(Error::Dimension {
            expected: ansatz.n_qubits(),
            found: h.n_qubits,
        });
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let spread = opts.initial_spread;
    let x0: Vec<f64> = (0..ansatz.n_params())
        .map(|_| {
            if spread > 0.0 {
                init_rng.random_range(-spread..spread)
            } else {
                0.0
            }
        })
        .collect();
    let optimizer = opts.optimizer.unwrap_or(match plan.shots {
        Shots::Exact => Optimizer::NelderMead(NelderMeadOptions::default()),
        Shots::Finite(_) => Optimizer::Spsa(SpsaOptions::default()),
    });
    let mut noise_rng = ChaCha8Rng::seed_from_u64(plan.seed);
    noise_rng.set_stream(1);
    let mut opt_rng = ChaCha8Rng::seed_from_u64(plan.seed);
    opt_rng.set_stream(2);
    let mut objective = |theta: &[f64]| -> Result<f64> {
        let psi = apply_ansatz(ansatz, theta, reference)?;
        match plan.shots {
            Shots::Exact => exact_expectation(&psi, h),
            Shots::Finite(m) => Ok(sampled_expectation_with(&psi, h, m, &mut noise_rng)?.mean),
        }
    };
    let Minimum {
        x,
        value,
        mut trace,
        evaluations,
        converged,
    } = match optimizer {
        Optimizer::NelderMead(o) => nelder_mead(&mut objective, &x0, &o)?,
        Optimizer::Spsa(o) => spsa(&mut objective, &x0, &o, &mut opt_rng)?,
        Optimizer::Bfgs(o) => bfgs(&mut objective, &x0, &o)?,
    };
    if trace.last() != Some(&value) {
        trace.push(value);
    }
    Ok(VqeResult {
        energy: value,
        parameters: x,
        energy_trace: trace,
        evaluations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnsatzKind {
    HardwareEfficient,
    ParticleConserving,
}

/// VQE applied to an integral set, as a drop-in correlated solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VqeSolver {
    pub ansatz: AnsatzKind,
    /// Defaults to the number of spatial orbitals plus two.
    pub layers: Option<usize>,
    pub options: VqeOptions,
    pub plan: SamplingPlan,
}

impl Default for VqeSolver {
    fn default() -> Self {
        VqeSolver {
            ansatz: AnsatzKind::ParticleConserving,
            layers: None,
            options: VqeOptions::default(),
            plan: SamplingPlan::exact(),
        }
    }
}

impl VqeSolver {
    pub fn build_ansatz(&self, n_qubits: usize) -> Result<Ansatz> {
        let layers = self.layers.unwrap_or(n_qubits / 2 + 2);
        match self.ansatz {
            AnsatzKind::HardwareEfficient => Ok(Ansatz::hardware_efficient(n_qubits, layers)),
            AnsatzKind::ParticleConserving => Ansatz::particle_conserving(n_qubits, layers),
        }
    }

    /// Runs in the RHF orbital basis of `s` with the Hartree–Fock determinant
    /// as reference; the RDMs are rotated back to the basis of `s`.
    pub fn solve(&self, s: &IntegralSet, n_elec: usize) -> Result<(CorrelatedSolution, VqeResult)> {
        let problem = s.with_electrons(n_elec)?;
        let scf = run_rhf(&problem, &ScfOptions::default())?;
        let c = &scf.coefficients;
        let mo = problem.rotate(c, n_elec)?;
        let h = qubit_hamiltonian(&mo)?;
        let ansatz = self.build_ansatz(h.n_qubits)?;
        let reference = Statevector::reference(h.n_qubits, n_elec)?;
        let result = run_vqe(&h, &ansatz, &reference, &self.options, &self.plan)?;
        let psi = apply_ansatz(&ansatz, &result.parameters, &reference)?;
        let (rdm1_mo, rdm2_mo) = rdm_from_state(&psi, s.n_orb)?;
        let rdm1: DMatrix<f64> = c * rdm1_mo * c.transpose();
        let rdm2: Tensor4 = rdm2_mo.transform(&c.transpose());
        Ok((
            CorrelatedSolution {
                energy: result.energy,
                rdm1,
                rdm2,
            },
            result,
        ))
    }
}
