//! Ranking metrics, sampling-variance bounds and the bootstrap noise sweep.
//!
//! A decomposition is judged on an ensemble of related geometries by how
//! well its energies track the exact ones: the mean absolute deviation,
//! the Pearson and Spearman correlations, and the fraction of qubits it
//! needs. The efficiency index folds these into one number.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qubit_map::QubitHamiltonian;

pub const DEFAULT_BOOTSTRAP: usize = 20_000;

/// Noise levels (hartree) used by the sweep when none are given.
pub const DEFAULT_SIGMAS: [f64; 5] = [0.001, 0.002, 0.005, 0.01, 0.02];

#[derive(Debug, Clone, PartialEq)]
pub struct ConformerRecord {
    pub id: String,
    pub e_exact: f64,
    pub e_pd: f64,
}

impl ConformerRecord {
    pub fn new(id: impl Into<String>, e_exact: f64, e_pd: f64) -> Result<Self> {
        if !e_exact.is_finite() || !e_pd.is_finite() {
            return Err(Error::InvalidInput("record energies must be finite".into()));
        }
        Ok(ConformerRecord {
            id: id.into(),
            e_exact,
            e_pd,
        })
    }
}

/// Qubits used by the largest decomposed subproblem over those of the full system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QubitRatio {
    pub pd: usize,
    pub full: usize,
}

impl QubitRatio {
    pub fn value(&self) -> f64 {
        self.pd as f64 / self.full as f64
    }
}

impl fmt::Display for QubitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.pd, self.full)
    }
}

pub fn qubit_ratio(pd: usize, full: usize) -> Result<QubitRatio> {
    if full == 0 {
        return Err(Error::InvalidInput("full-system qubit count is zero".into()));
    }
    Ok(QubitRatio { pd, full })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub ratio: QubitRatio,
    pub mad: f64,
    pub rho_p: f64,
    pub rho_s: f64,
    /// `None` when the deviation or the ratio is zero.
    pub i_eff: Option<f64>,
    pub n_records: usize,
}

pub fn mad(records: &[ConformerRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("no records for the mean absolute deviation".into()));
    }
    let total: f64 = records.iter().map(|r| (r.e_pd - r.e_exact).abs()).sum();
    Ok(total / records.len() as f64)
}

fn pearson_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "{n} record(s); at least two are needed"
        )));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("a column has zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn spearman_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson_slices(&average_ranks(x), &average_ranks(y))
}

fn columns(records: &[ConformerRecord]) -> (Vec<f64>, Vec<f64>) {
    records.iter().map(|r| (r.e_exact, r.e_pd)).unzip()
}

pub fn pearson(records: &[ConformerRecord]) -> Result<f64> {
    let (x, y) = columns(records);
    pearson_slices(&x, &y)
}

pub fn spearman(records: &[ConformerRecord]) -> Result<f64> {
    let (x, y) = columns(records);
    spearman_slices(&x, &y)
}

/// `ρ_P ρ_S / MAD / ratio`.
pub fn efficiency_index(rho_p: f64, rho_s: f64, mad: f64, ratio: f64) -> Result<f64> {
    if mad <= 0.0 {
        return Err(Error::InvalidInput(
            "efficiency index needs a positive mean absolute deviation".into(),
        ));
    }
    if ratio <= 0.0 {
        return Err(Error::InvalidInput(
            "efficiency index needs a positive qubit ratio".into(),
        ));
    }
    Ok(rho_p * rho_s / mad / ratio)
}

pub fn metrics(records: &[ConformerRecord], ratio: QubitRatio) -> Result<MetricsReport> {
    let mad = mad(records)?;
    let rho_p = pearson(records)?;
    let rho_s = spearman(records)?;
    let i_eff = efficiency_index(rho_p, rho_s, mad, ratio.value()).ok();
    Ok(MetricsReport {
        ratio,
        mad,
        rho_p,
        rho_s,
        i_eff,
        n_records: records.len(),
    })
}

/// `Σ |c|² / M` over non-identity terms. `M = 0` gives an infinite bound.
pub fn variance_bound_hamiltonian(h: &QubitHamiltonian, shots_per_term: u64) -> f64 {
    let weight: f64 = h.non_identity_terms().map(|(c, _)| c * c).sum();
    if weight == 0.0 {
        return 0.0;
    }
    weight / shots_per_term as f64
}

pub fn variance_bound_total(hams: &[QubitHamiltonian], shots: &[u64]) -> Result<f64> {
    if hams.len() != shots.len() {
        return Err(Error::Dimension {
            expected: hams.len(),
            found: shots.len(),
        });
    }
    Ok(hams
        .iter()
        .zip(shots)
        .map(|(h, &m)| variance_bound_hamiltonian(h, m))
        .sum())
}

/// Bound on the variance of a sampled electron count over `n_spin_orbitals` modes.
pub fn variance_bound_electron_number(n_spin_orbitals: usize, shots: u64) -> f64 {
    n_spin_orbitals as f64 / shots as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweep {
    pub sigmas: Vec<f64>,
    pub mean_rho_p: Vec<f64>,
    pub std_rho_p: Vec<f64>,
    pub mean_rho_s: Vec<f64>,
    pub std_rho_s: Vec<f64>,
    pub n_bootstrap: usize,
    pub seed: u64,
}

/// Mean and population standard deviation, accumulated about the first
/// value so identical samples give their value back exactly and zero spread.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let pivot = values[0];
    let n = values.len() as f64;
    let shift = values.iter().map(|v| v - pivot).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|v| (v - pivot - shift).powi(2))
        .sum::<f64>()
        / n;
    (pivot + shift, var.sqrt())
}

/// Perturb every decomposed energy with independent Gaussian noise of
/// width σ and collect the correlation statistics over `n_bootstrap` draws.
///
/// Resample `r` at grid point `k` draws from its own ChaCha stream
/// `k · n_bootstrap + r`, so the sweep is bit-reproducible regardless of
/// thread count.
pub fn bootstrap_noise_sweep(
    records: &[ConformerRecord],
    sigmas: &[f64],
    n_bootstrap: usize,
    seed: u64,
) -> Result<NoiseSweep> {
    if records.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "bootstrap sweep needs at least three records, got {}",
            records.len()
        )));
    }
    if n_bootstrap == 0 {
        return Err(Error::InvalidInput("n_bootstrap must be positive".into()));
    }
    if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::InvalidInput(format!("noise level {s} is not a valid σ")));
    }
    let (exact, pd) = columns(records);
    // Checked once so the resamples below only fail on degenerate noise draws.
    pearson_slices(&exact, &pd)?;

    let mut sweep = NoiseSweep {
        sigmas: sigmas.to_vec(),
        mean_rho_p: Vec::with_capacity(sigmas.len()),
        std_rho_p: Vec::with_capacity(sigmas.len()),
        mean_rho_s: Vec::with_capacity(sigmas.len()),
        std_rho_s: Vec::with_capacity(sigmas.len()),
        n_bootstrap,
        seed,
    };
    for (k, &sigma) in sigmas.iter().enumerate() {
        let draws: Vec<(f64, f64)> = (0..n_bootstrap)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((k * n_bootstrap + r) as u64);
                let noisy: Vec<f64> = pd
                    .iter()
                    .map(|e| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        e + sigma * z
                    })
                    .collect();
                Ok((
                    pearson_slices(&exact, &noisy)?,
                    spearman_slices(&exact, &noisy)?,
                ))
            })
            .collect::<Result<_>>()?;
        let (rp, rs): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
        let (mp, sp) = mean_std(&rp);
        let (ms, ss) = mean_std(&rs);
        sweep.mean_rho_p.push(mp);
        sweep.std_rho_p.push(sp);
        sweep.mean_rho_s.push(ms);
        sweep.std_rho_s.push(ss);
    }
    Ok(sweep)
}
