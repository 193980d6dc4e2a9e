//! Single-shot density matrix embedding.
//!
//! Each fragment is embedded with the Schmidt bath of the mean-field
//! determinant, solved with a correlated solver, and the fragment energies
//! are summed once a global chemical potential makes the fragment electron
//! counts add up to the total.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fcidump::{IntegralSet, TwoBody};
use crate::linalg::{eigh, Tensor4};
use crate::mean_field::{run_rhf, DensityMatrix, ScfOptions};
use crate::partition::FragmentSpec;
use crate::solvers::{CorrelatedSolution, Solver};

/// Entanglement eigenvalues within this distance of 0 or 1 carry no bath.
pub const BATH_TOLERANCE: f64 = 1e-13;
/// Largest `max |(D/2)² − D/2|` accepted as a mean-field density.
pub const IDEMPOTENCY_TOLERANCE: f64 = 1e-5;

/// Fragment-plus-bath orbitals of one fragment.
#[derive(Debug, Clone, PartialEq)]
pub struct Bath {
    pub fragment: Vec<usize>,
    /// `n_orb × k`: fragment unit vectors, then bath orbitals.
    pub transform: DMatrix<f64>,
    /// Entanglement eigenvalue of each bath orbital, in column order.
    pub occupations: Vec<f64>,
    /// Spin-summed density of the fully occupied environment orbitals.
    pub core_density: DMatrix<f64>,
    pub n_elec_emb: usize,
    pub warning: Option<String>,
}

impl Bath {
    pub fn n_bath(&self) -> usize {
        self.transform.ncols() - self.fragment.len()
    }
}

pub fn build_bath(d: &DensityMatrix, fragment: &[usize]) -> Result<Bath> {
    let n = d.n_orb();
    let err = d.idempotency_error() / 2.0;
    if err > IDEMPOTENCY_TOLERANCE {
        return Err(Error::InvalidMeanField(err));
    }
    let mut in_frag = vec![false; n];
    for &p in fragment {
        if p >= n || in_frag[p] {
            return Err(Error::InvalidInput(format!("bad fragment orbital {p}")));
        }
        in_frag[p] = true;
    }
    let env: Vec<usize> = (0..n).filter(|&p| !in_frag[p]).collect();
    let half = DMatrix::from_fn(env.len(), env.len(), |a, b| 0.5 * d.values[(env[a], env[b])]);
    let (lambda, vecs) = eigh(&half);
    let mut bath: Vec<usize> = (0..env.len())
        .filter(|&k| lambda[k] > BATH_TOLERANCE && lambda[k] < 1.0 - BATH_TOLERANCE)
        .collect();
    if bath.len() > fragment.len() {
        // the Schmidt rank is at most the fragment size; the rest is round-off
        bath.sort_by(|&a, &b| {
            let ea = lambda[a] * (1.0 - lambda[a]);
            let eb = lambda[b] * (1.0 - lambda[b]);
            eb.total_cmp(&ea).then(a.cmp(&b))
        });
        bath.truncate(fragment.len());
        bath.sort_unstable();
    }
    let core: Vec<usize> = (0..env.len())
        .filter(|&k| lambda[k] >= 1.0 - BATH_TOLERANCE && !bath.contains(&k))
        .collect();
    let k = fragment.len() + bath.len();
    let mut transform = DMatrix::zeros(n, k);
    for (col, &p) in fragment.iter().enumerate() {
        transform[(p, col)] = 1.0;
    }
    for (j, &b) in bath.iter().enumerate() {
        for (a, &p) in env.iter().enumerate() {
            transform[(p, fragment.len() + j)] = vecs[(a, b)];
        }
    }
    let mut core_density = DMatrix::zeros(n, n);
    for &c in &core {
        for (a, &p) in env.iter().enumerate() {
            for (b, &q) in env.iter().enumerate() {
                core_density[(p, q)] += 2.0 * vecs[(a, c)] * vecs[(b, c)];
            }
        }
    }
    let projected = (transform.transpose() * &d.values * &transform).trace();
    let even = 2.0 * (projected / 2.0).round();
    let warning = ((projected - even).abs() > 0.01).then(|| {
        format!("embedded electron count {projected:.6} rounded to {even}")
    });
    let n_elec_emb = (even.max(0.0) as usize).min(2 * k);
    Ok(Bath {
        fragment: fragment.to_vec(),
        occupations: bath.iter().map(|&b| lambda[b]).collect(),
        transform,
        core_density,
        n_elec_emb,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingProblem {
    /// Embedding Hamiltonian including the chemical-potential shift.
    pub integrals: IntegralSet,
    pub n_elec_emb: usize,
    pub transform: DMatrix<f64>,
    pub fragment_size: usize,
    pub mu_applied: f64,
    /// Rotated one-body integrals without environment dressing or shift.
    pub bare_one_body: DMatrix<f64>,
    /// `J − ½K` of the core density in the embedding basis.
    pub environment_field: DMatrix<f64>,
}

pub fn build_embedding_hamiltonian(s: &IntegralSet, bath: &Bath, mu: f64) -> Result<EmbeddingProblem> {
    let t = &bath.transform;
    if t.nrows() != s.n_orb {
        return Err(Error::Dimension {
            expected: s.n_orb,
            found: t.nrows(),
        });
    }
    let g_core = s.two_electron_field(&bath.core_density);
    let bare = t.transpose() * &s.one_body * t;
    let field = t.transpose() * &g_core * t;
    let mut h = &bare + &field;
    for p in 0..bath.fragment.len() {
        h[(p, p)] -= mu;
    }
    let core = s.core_energy + bath.core_density.component_mul(&(&s.one_body + &g_core * 0.5)).sum();
    let two = TwoBody::from_dense(&s.two_body.dense().transform(t));
    let n_elec = bath.n_elec_emb;
    let integrals = IntegralSet::new(n_elec, (n_elec % 2) as i32, core, h, two)?;
    Ok(EmbeddingProblem {
        integrals,
        n_elec_emb: n_elec,
        transform: t.clone(),
        fragment_size: bath.fragment.len(),
        mu_applied: mu,
        bare_one_body: bare,
        environment_field: field,
    })
}

/// Electrons on the fragment orbitals, the first `fragment_size` slots.
pub fn fragment_electron_count(rdm1: &DMatrix<f64>, fragment_size: usize) -> f64 {
    (0..fragment_size).map(|p| rdm1[(p, p)]).sum()
}

/// Democratic fragment energy: every energy term is assigned to the
/// fragment owning its first orbital index, with the interaction between
/// the embedded electrons and the frozen environment counted at half weight.
/// Excludes the nuclear core energy.
pub fn fragment_energy(p: &EmbeddingProblem, rdm1: &DMatrix<f64>, rdm2: &Tensor4) -> f64 {
    let k = p.transform.ncols();
    let h = &p.bare_one_body + &p.environment_field * 0.5;
    let g = p.integrals.two_body.dense();
    let mut e = 0.0;
    for r in 0..p.fragment_size {
        for q in 0..k {
            e += h[(r, q)] * rdm1[(q, r)];
            for s in 0..k {
                for t in 0..k {
                    e += 0.5 * g.get(r, q, s, t) * rdm2.get(r, q, s, t);
                }
            }
        }
    }
    e
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmetOptions {
    pub mu_tol_electrons: f64,
    pub mu_bracket: (f64, f64),
    pub max_mu_iter: usize,
    /// Bracket expansions (doubling) before giving up.
    pub max_expansions: usize,
    /// Bracket width below which bisection hands over to the secant method.
    pub bisection_width: f64,
}

impl Default for DmetOptions {
    fn default() -> Self {
        DmetOptions {
            mu_tol_electrons: 1e-6,
            mu_bracket: (-0.1, 0.1),
            max_mu_iter: 100,
            max_expansions: 4,
            bisection_width: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmetResult {
    pub total_energy: f64,
    pub fragment_energies: Vec<f64>,
    pub fragment_electrons: Vec<f64>,
    /// Fragment plus bath orbital count of each embedding problem.
    pub embedding_sizes: Vec<usize>,
    pub mu_star: f64,
    pub total_electrons: f64,
    /// Evaluations of the electron count beyond the one at μ = 0.
    pub mu_iterations: usize,
    pub converged: bool,
    pub solver: &'static str,
    pub warnings: Vec<String>,
}

struct Sweep {
    energies: Vec<f64>,
    electrons: Vec<f64>,
}

impl Sweep {
    fn total(&self) -> f64 {
        self.electrons.iter().sum()
    }
}

fn sweep(s: &IntegralSet, baths: &[Bath], solver: &Solver, mu: f64) -> Result<Sweep> {
    let parts: Vec<(f64, f64)> = baths
        .par_iter()
        .map(|bath| {
            let p = build_embedding_hamiltonian(s, bath, mu)?;
            let CorrelatedSolution { rdm1, rdm2, .. } = solver.solve(&p.integrals, p.n_elec_emb)?;
            Ok((
                fragment_energy(&p, &rdm1, &rdm2),
                fragment_electron_count(&rdm1, p.fragment_size),
            ))
        })
        .collect::<Result<_>>()?;
    Ok(Sweep {
        energies: parts.iter().map(|x| x.0).collect(),
        electrons: parts.iter().map(|x| x.1).collect(),
    })
}

pub fn solve_single_shot(
    s: &IntegralSet,
    frags: &FragmentSpec,
    solver: &Solver,
    opts: &DmetOptions,
) -> Result<DmetResult> {
    if frags.n_orb() != s.n_orb {
        return Err(Error::Dimension {
            expected: s.n_orb,
            found: frags.n_orb(),
        });
    }
    let scf = run_rhf(s, &ScfOptions::default())?;
    let mut warnings = Vec::new();
    if !scf.converged {
        warnings.push(format!("mean field not converged after {} iterations", scf.iterations));
    }
    let baths: Vec<Bath> = frags
        .fragments()
        .iter()
        .map(|f| build_bath(&scf.density, f))
        .collect::<Result<_>>()?;
    warnings.extend(baths.iter().filter_map(|b| b.warning.clone()));
    let target = s.n_elec as f64;
    let tol = opts.mu_tol_electrons;
    let mut evals = 0;
    let mut eval = |mu: f64| -> Result<Sweep> {
        evals += 1;
        sweep(s, &baths, solver, mu)
    };

    let (mu_star, at, converged) = 'search: {
        let zero = eval(0.0)?;
        if (zero.total() - target).abs() < tol {
            break 'search (0.0, zero, true);
        }
        let (mut lo, mut hi) = opts.mu_bracket;
        let mut f_lo = eval(lo)?;
        let mut f_hi = eval(hi)?;
        let mut expansions = 0;
        while !(f_lo.total() <= target && target <= f_hi.total()) {
            if expansions == opts.max_expansions {
                return Err(Error::Bracket {
                    lo,
                    n_lo: f_lo.total(),
                    hi,
                    n_hi: f_hi.total(),
                    target,
                });
            }
            expansions += 1;
            lo *= 2.0;
            hi *= 2.0;
            f_lo = eval(lo)?;
            f_hi = eval(hi)?;
        }
        for end in [(lo, &f_lo), (hi, &f_hi)] {
            if (end.1.total() - target).abs() < tol {
                let (mu, sw) = end;
                let sw = Sweep {
                    energies: sw.energies.clone(),
                    electrons: sw.electrons.clone(),
                };
                break 'search (mu, sw, true);
            }
        }
        let mut monotone = true;
        let mut best: Option<(f64, Sweep)> = None;
        for _ in 0..opts.max_mu_iter {
            let secant = monotone && hi - lo < opts.bisection_width;
            let (n_lo, n_hi) = (f_lo.total() - target, f_hi.total() - target);
            let mut mu = if secant && n_hi != n_lo {
                lo - n_lo * (hi - lo) / (n_hi - n_lo)
            } else {
                0.5 * (lo + hi)
            };
            if !(mu > lo && mu < hi) {
                mu = 0.5 * (lo + hi);
            }
            let f_mu = eval(mu)?;
            let n_mu = f_mu.total() - target;
            if f_mu.total() < f_lo.total() - tol || f_mu.total() > f_hi.total() + tol {
                monotone = false;
            }
            if n_mu.abs() < tol {
                break 'search (mu, f_mu, true);
            }
            if n_mu < 0.0 {
                lo = mu;
                f_lo = f_mu;
            } else {
                hi = mu;
                f_hi = f_mu;
            }
            let closer = if (f_lo.total() - target).abs() < (f_hi.total() - target).abs() {
                (lo, &f_lo)
            } else {
                (hi, &f_hi)
            };
            best = Some((
                closer.0,
                Sweep {
                    energies: closer.1.energies.clone(),
                    electrons: closer.1.electrons.clone(),
                },
            ));
        }
        if !monotone {
            warnings.push("electron count not monotone in the chemical potential".into());
        }
        let (mu, sw) = best.expect("at least one iteration");
        break 'search (mu, sw, false);
    };
    if !converged {
        warnings.push(format!(
            "chemical potential not converged to {tol:e} electrons in {} steps",
            opts.max_mu_iter
        ));
    }
    let total_electrons = at.total();
    Ok(DmetResult {
        total_energy: at.energies.iter().sum::<f64>() + s.core_energy,
        fragment_energies: at.energies,
        fragment_electrons: at.electrons,
        embedding_sizes: baths.iter().map(|b| b.transform.ncols()).collect(),
        mu_star,
        total_electrons,
        mu_iterations: evals - 1,
        converged,
        solver: match solver {
            Solver::Fci => "fci",
            Solver::Vqe(_) => "vqe",
        },
        warnings,
    })
}
