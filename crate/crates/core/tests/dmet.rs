mod common;

use common::{load, reference};
use nalgebra::DMatrix;
use pdchem::dmet::*;
use pdchem::fcidump::{IntegralSet, TwoBody};
use pdchem::mean_field::{run_rhf, ScfOptions};
use pdchem::partition::FragmentSpec;
use pdchem::solvers::{fci_ground_state, Optimizer, Solver, VqeOptions, VqeSolver};
use proptest::prelude::*;

fn non_interacting(s: &IntegralSet) -> IntegralSet {
    IntegralSet::new(s.n_elec, 0, s.core_energy, s.one_body.clone(), TwoBody::zeros(s.n_orb)).unwrap()
}

fn projector(cols: &DMatrix<f64>) -> DMatrix<f64> {
    cols * cols.transpose()
}

/// Bath span straight from the occupied orbitals: singular vectors of the
/// fragment rows of `C_occ` pick the occupied combinations that touch the
/// fragment, and their environment parts are the bath.
fn schmidt_bath(c_occ: &DMatrix<f64>, fragment: &[usize]) -> DMatrix<f64> {
    let n = c_occ.nrows();
    let rows = DMatrix::from_fn(fragment.len(), c_occ.ncols(), |i, j| c_occ[(fragment[i], j)]);
    let svd = rows.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let mut cols = Vec::new();
    for (k, sv) in svd.singular_values.iter().enumerate() {
        if *sv > 1e-7 && *sv < 1.0 - 1e-7 {
            let rotated = c_occ * v_t.row(k).transpose();
            let mut env = rotated.clone();
            for &p in fragment {
                env[p] = 0.0;
            }
            cols.push(env.normalize());
        }
    }
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

#[test]
fn bath_matches_schmidt_decomposition_of_the_determinant() {
    for (id, frag) in [("h4_chain", vec![0, 1]), ("h6_ring", vec![2, 3]), ("h6_conf03", vec![0, 1, 2])] {
        let s = load(id);
        let scf = run_rhf(&s, &ScfOptions::default()).unwrap();
        let bath = build_bath(&scf.density, &frag).unwrap();
        let c_occ = scf.coefficients.columns(0, s.n_elec / 2).into_owned();
        let oracle = schmidt_bath(&c_occ, &frag);
        let ours = bath.transform.columns(frag.len(), bath.n_bath()).into_owned();
        assert_eq!(ours.ncols(), oracle.ncols(), "{id}");
        assert!((projector(&ours) - projector(&oracle)).abs().max() < 1e-8, "{id}");
        let proj = bath.transform.transpose() * &scf.density.values * &bath.transform;
        assert_eq!(bath.n_elec_emb as f64, proj.trace().round());
    }
}

#[test]
fn bath_never_exceeds_fragment_size() {
    for id in ["h2", "h4_chain", "h6_chain", "h6_ring", "h6_conf07"] {
        let s = load(id);
        let scf = run_rhf(&s, &ScfOptions::default()).unwrap();
        for size in 1..=s.n_orb {
            for start in 0..=(s.n_orb - size) {
                let frag: Vec<usize> = (start..start + size).collect();
                let b = build_bath(&scf.density, &frag).unwrap();
                assert!(b.n_bath() <= size, "{id} {frag:?}");
                let t = &b.transform;
                assert!((t.transpose() * t - DMatrix::identity(t.ncols(), t.ncols())).abs().max() < 1e-10);
            }
        }
    }
}

#[test]
fn whole_system_embedding_is_identity() {
    let s = load("h4_chain");
    let scf = run_rhf(&s, &ScfOptions::default()).unwrap();
    let b = build_bath(&scf.density, &[0, 1, 2, 3]).unwrap();
    let p = build_embedding_hamiltonian(&s, &b, 0.0).unwrap();
    assert_eq!(p.integrals, s);
}

#[test]
fn chemical_potential_shifts_fragment_diagonal_only() {
    let s = load("h6_ring");
    let scf = run_rhf(&s, &ScfOptions::default()).unwrap();
    let b = build_bath(&scf.density, &[1, 2]).unwrap();
    let p0 = build_embedding_hamiltonian(&s, &b, 0.0).unwrap();
    let p1 = build_embedding_hamiltonian(&s, &b, 0.37).unwrap();
    let diff = &p1.integrals.one_body - &p0.integrals.one_body;
    for i in 0..diff.nrows() {
        for j in 0..diff.ncols() {
            let expect = if i == j && i < 2 { -0.37 } else { 0.0 };
            assert!((diff[(i, j)] - expect).abs() < 1e-15);
        }
    }
    assert_eq!(p0.integrals.two_body, p1.integrals.two_body);
    assert_eq!(p0.integrals.core_energy, p1.integrals.core_energy);
}

#[test]
fn non_interacting_embedding_reproduces_full_energy() {
    let s = non_interacting(&load("h6_chain"));
    let scf = run_rhf(&s, &ScfOptions::default()).unwrap();
    let b = build_bath(&scf.density, &[0, 1]).unwrap();
    assert!(b.n_bath() < s.n_orb - 2);
    let p = build_embedding_hamiltonian(&s, &b, 0.0).unwrap();
    let emb = fci_ground_state(&p.integrals, p.n_elec_emb).unwrap();
    assert!((emb.energy - scf.total_energy).abs() < 1e-10);
}

#[test]
fn non_interacting_total_is_sum_of_orbital_energies() {
    for id in ["h4_chain", "h6_ring"] {
        let s = non_interacting(&load(id));
        let scf = run_rhf(&s, &ScfOptions::default()).unwrap();
        let expect = 2.0 * scf.orbital_energies[..s.n_elec / 2].iter().sum::<f64>() + s.core_energy;
        for size in [1, 2, 3] {
            let spec = FragmentSpec::contiguous(s.n_orb, size).unwrap();
            let r = solve_single_shot(&s, &spec, &Solver::Fci, &DmetOptions::default()).unwrap();
            assert!((r.total_energy - expect).abs() < 1e-9, "{id} {size}: {} vs {expect}", r.total_energy);
        }
    }
}

#[test]
fn single_fragment_equals_fci() {
    for id in ["h2", "h4_chain", "h6_chain", "h6_ring"] {
        let s = load(id);
        let (_, e_fci) = reference(id);
        let r = solve_single_shot(&s, &FragmentSpec::whole(s.n_orb).unwrap(), &Solver::Fci, &DmetOptions::default())
            .unwrap();
        assert!((r.total_energy - e_fci).abs() < 1e-8, "{id}");
        assert_eq!(r.mu_star, 0.0);
        assert_eq!(r.mu_iterations, 0);
    }
}

#[test]
fn mirror_fragments_share_energy() {
    let s = load("h4_chain");
    let spec = FragmentSpec::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
    let r = solve_single_shot(&s, &spec, &Solver::Fci, &DmetOptions::default()).unwrap();
    assert!((r.fragment_energies[0] - r.fragment_energies[1]).abs() < 1e-8);
    let (_, e_fci) = reference("h4_chain");
    assert!((r.total_energy - e_fci).abs() < 0.02);
}

#[test]
fn fragment_order_does_not_matter() {
    let s = load("h6_ring");
    let a = FragmentSpec::new(6, vec![vec![0, 1], vec![2, 3], vec![4, 5]]).unwrap();
    let b = FragmentSpec::new(6, vec![vec![4, 5], vec![0, 1], vec![2, 3]]).unwrap();
    let ra = solve_single_shot(&s, &a, &Solver::Fci, &DmetOptions::default()).unwrap();
    let rb = solve_single_shot(&s, &b, &Solver::Fci, &DmetOptions::default()).unwrap();
    assert!((ra.total_energy - rb.total_energy).abs() < 1e-10);
}

// Frozen deviations from FCI, measured once with the FCI fragment solver.
const H6_RING_PAIRS: f64 = -3.2310599492;
const H6_CHAIN_PAIRS: f64 = -3.2317115364;
const H4_CHAIN_SINGLES: f64 = -2.1678501149;

#[test]
fn regression_energies() {
    for (id, size, frozen) in [("h6_ring", 2, H6_RING_PAIRS), ("h6_chain", 2, H6_CHAIN_PAIRS), ("h4_chain", 1, H4_CHAIN_SINGLES)] {
        let s = load(id);
        let (_, e_fci) = reference(id);
        let spec = FragmentSpec::contiguous(s.n_orb, size).unwrap();
        let r = solve_single_shot(&s, &spec, &Solver::Fci, &DmetOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.total_electrons - s.n_elec as f64).abs() < 1e-6);
        assert!((r.total_energy - e_fci).abs() < 0.05);
        assert!((r.total_energy - frozen).abs() < 1e-7, "{id}: {}", r.total_energy);
    }
}

#[test]
fn electron_count_rises_with_chemical_potential() {
    let s = load("h6_ring");
    let scf = run_rhf(&s, &ScfOptions::default()).unwrap();
    let baths: Vec<_> = [[0, 1], [2, 3], [4, 5]]
        .iter()
        .map(|f| build_bath(&scf.density, f).unwrap())
        .collect();
    let count = |mu: f64| -> f64 {
        baths
            .iter()
            .map(|b| {
                let p = build_embedding_hamiltonian(&s, b, mu).unwrap();
                let r = fci_ground_state(&p.integrals, p.n_elec_emb).unwrap();
                fragment_electron_count(&r.rdm1, p.fragment_size)
            })
            .sum()
    };
    let mut prev = f64::NEG_INFINITY;
    for k in -8..=8 {
        let n = count(0.05 * k as f64);
        assert!(n >= prev - 1e-9);
        prev = n;
    }
}

#[test]
fn unbracketed_root_reports_both_ends() {
    let s = load("h4_chain");
    let spec = FragmentSpec::contiguous(4, 1).unwrap();
    let opts = DmetOptions {
        mu_bracket: (-1e-6, 1e-6),
        max_expansions: 0,
        ..Default::default()
    };
    match solve_single_shot(&s, &spec, &Solver::Fci, &opts) {
        Err(pdchem::Error::Bracket { n_lo, n_hi, target, .. }) => {
            assert_eq!(target, 4.0);
            assert!(n_lo.is_finite() && n_hi.is_finite());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn vqe_solver_agrees_with_fci_on_h4() {
    let s = load("h4_chain");
    let spec = FragmentSpec::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
    let fci = solve_single_shot(&s, &spec, &Solver::Fci, &DmetOptions::default()).unwrap();
    let vqe = Solver::Vqe(VqeSolver {
        options: VqeOptions {
            optimizer: Some(Optimizer::Bfgs(Default::default())),
            ..Default::default()
        },
        ..Default::default()
    });
    let r = solve_single_shot(&s, &spec, &vqe, &DmetOptions::default()).unwrap();
    assert_eq!(r.solver, "vqe");
    assert!((r.total_energy - fci.total_energy).abs() < 1e-4, "{} vs {}", r.total_energy, fci.total_energy);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dmet_electrons_match_for_random_partitions(perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(), cut in 1usize..5) {
        let s = load("h6_conf11");
        let spec = FragmentSpec::new(6, vec![perm[..cut].to_vec(), perm[cut..].to_vec()]).unwrap();
        let r = solve_single_shot(&s, &spec, &Solver::Fci, &DmetOptions::default()).unwrap();
        prop_assert!(r.converged);
        prop_assert!((r.total_electrons - 6.0).abs() < 1e-6);
    }
}
