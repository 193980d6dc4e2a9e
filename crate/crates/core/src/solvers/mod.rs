//! Correlated solvers: exact diagonalization and the variational eigensolver.

pub mod fci;
pub mod optim;
pub mod sampling;
pub mod statevector;
pub mod vqe;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::fcidump::IntegralSet;
use crate::linalg::Tensor4;

pub use fci::{energy_from_rdms, fci_ground_state, FciResult, FCI_CAPACITY};
pub use sampling::{sampled_expectation, sampled_expectation_with, SampledEstimate, SamplingPlan, Shots};
pub use statevector::{
    apply_ansatz, exact_expectation, fci_to_statevector, rdm_from_state, term_expectations, Ansatz,
    Gate, Statevector,
};
pub use vqe::{run_vqe, AnsatzKind, Optimizer, VqeOptions, VqeResult, VqeSolver};

/// Energy and spin-summed RDMs from any correlated solver.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedSolution {
    pub energy: f64,
    pub rdm1: DMatrix<f64>,
    pub rdm2: Tensor4,
}

/// Choice of correlated solver for fragment and embedding problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solver {
    Fci,
    Vqe(VqeSolver),
}

impl Solver {
    pub fn solve(&self, s: &IntegralSet, n_elec: usize) -> Result<CorrelatedSolution> {
        match self {
            Solver::Fci => {
                let r = fci_ground_state(s, n_elec)?;
                Ok(CorrelatedSolution {
                    energy: r.energy,
                    rdm1: r.rdm1,
                    rdm2: r.rdm2,
                })
            }
            Solver::Vqe(v) => Ok(v.solve(s, n_elec)?.0),
        }
    }
}
