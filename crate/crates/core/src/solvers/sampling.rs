//! Finite-shot estimation of Pauli-sum expectation values.
//!
//! Each non-identity term is measured independently with the same shot
//! count. A single shot of `P` returns ±1 with `Pr(+1) = (1 + ⟨P⟩)/2`, so
//! the number of `+1` outcomes in `M` shots is binomial.

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::qubit_map::QubitHamiltonian;

use super::statevector::{term_expectations, Statevector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Exact,
    Finite(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingPlan {
    pub shots: Shots,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn exact() -> Self {
        SamplingPlan {
            shots: Shots::Exact,
            seed: 0,
        }
    }

    pub fn finite(shots: u64, seed: u64) -> Self {
        SamplingPlan {
            shots: Shots::Finite(shots),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledEstimate {
    pub mean: f64,
    /// Plug-in estimate `Σ c²(1 − m²)/M` of the variance of `mean`.
    pub variance: f64,
}

/// Estimate `⟨ψ|H|ψ⟩` under `plan`, seeding a fresh generator from it.
pub fn sampled_expectation(
    psi: &Statevector,
    h: &QubitHamiltonian,
    plan: &SamplingPlan,
) -> Result<SampledEstimate> {
    match plan.shots {
        Shots::Exact => {
            let values = term_expectations(psi, h)?;
            let mean = h.terms.iter().zip(values).map(|((c, _), v)| c * v).sum();
            Ok(SampledEstimate {
                mean,
                variance: 0.0,
            })
        }
        Shots::Finite(m) => {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            sampled_expectation_with(psi, h, m, &mut rng)
        }
    }
}

/// Estimate with `shots` measurements per term, drawing from `rng`.
pub fn sampled_expectation_with<R: Rng + ?Sized>(
    psi: &Statevector,
    h: &QubitHamiltonian,
    shots: u64,
    rng: &mut R,
) -> Result<SampledEstimate> {
    if shots == 0 {
        return Err(Error::InvalidInput("shot count must be positive".into()));
    }
    let values = term_expectations(psi, h)?;
    let m = shots as f64;
    let mut mean = 0.0;
    let mut variance = 0.0;
    for ((c, p), v) in h.terms.iter().zip(values) {
        if p.is_identity() {
            mean += c;
            continue;
        }
        let prob = (0.5 * (1.0 + v)).clamp(0.0, 1.0);
        let plus = Binomial::new(shots, prob)
            .map_err(|e| Error::InvalidInput(format!("binomial: {e}")))?
            .sample(rng) as f64;
        let estimate = (2.0 * plus - m) / m;
        mean += c * estimate;
        variance += c * c * (1.0 - estimate * estimate) / m;
    }
    Ok(SampledEstimate { mean, variance })
}
