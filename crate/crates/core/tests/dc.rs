mod common;

use common::{load, reference};
use nalgebra::DMatrix;
use pdchem::dc::*;
use pdchem::fcidump::IntegralSet;
use pdchem::mean_field::{fock_matrix, run_rhf, DensityMatrix, ScfOptions};
use pdchem::partition::FragmentSpec;
use pdchem::solvers::Solver;
use proptest::prelude::*;

fn full_buffers(spec: &FragmentSpec) -> Vec<DcSubsystem> {
    spec.fragments()
        .iter()
        .map(|f| DcSubsystem::new(f.clone(), (0..spec.n_orb()).filter(|p| !f.contains(p)).collect()).unwrap())
        .collect()
}

/// Eigenvalues of a symmetric 3×3 matrix from its characteristic cubic.
fn cubic_eigenvalues(a: &DMatrix<f64>) -> [f64; 3] {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let q = a.trace() / 3.0;
    let p2 = (0..3).map(|i| (a[(i, i)] - q).powi(2)).sum::<f64>() + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (a - DMatrix::identity(3, 3) * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let mut e = [e1, 3.0 * q - e1 - e3, e3];
    e.sort_by(f64::total_cmp);
    e
}

#[test]
fn subsystem_spectrum_matches_cubic_roots() {
    let s = load("h4_chain");
    let scf = run_rhf(&s, &ScfOptions::default()).unwrap();
    let sub = DcSubsystem::new(vec![0], vec![1, 2]).unwrap();
    let sp = subsystem_hf(&s, &sub, &scf.density).unwrap();
    let f = fock_matrix(&scf.density, &s).unwrap();
    let block = DMatrix::from_fn(3, 3, |i, j| f[(i, j)]);
    let oracle = cubic_eigenvalues(&block);
    for (a, b) in sp.energies.iter().zip(oracle) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
    assert!(sp.coefficients.row(3).iter().all(|&c| c == 0.0));
}

#[test]
fn full_subsystem_reproduces_canonical_orbitals() {
    let s = load("h6_ring");
    let scf = run_rhf(&s, &ScfOptions::default()).unwrap();
    let sub = DcSubsystem::new((0..6).collect(), vec![]).unwrap();
    let sp = subsystem_hf(&s, &sub, &scf.density).unwrap();
    for (a, b) in sp.energies.iter().zip(&scf.orbital_energies) {
        assert!((a - b).abs() < 1e-12);
    }
    let zero = subsystem_hf(&s, &sub, &DensityMatrix::zeros(6)).unwrap();
    let (h_eps, _) = pdchem::linalg::eigh(&s.one_body);
    assert_eq!(zero.energies, h_eps);
}

#[test]
fn full_buffers_reproduce_rhf() {
    for id in ["h4_chain", "h6_chain", "h6_conf02"] {
        let s = load(id);
        let (e_rhf, _) = reference(id);
        let scf = run_rhf(&s, &ScfOptions::default()).unwrap();
        for size in [1, 2, 3] {
            let spec = FragmentSpec::contiguous(s.n_orb, size).unwrap();
            let subs = full_buffers(&spec);
            let total = subs.iter().fold(DMatrix::zeros(s.n_orb, s.n_orb), |acc, sub| {
                acc + partition_matrix(sub, s.n_orb).unwrap()
            });
            assert_eq!(total, DMatrix::from_element(s.n_orb, s.n_orb, 1.0));
            let r = dc_scf_loop(&s, &subs, &DcOptions::default()).unwrap();
            assert!(r.converged, "{id} {size}");
            assert!((&r.density.values - &scf.density.values).abs().max() < 1e-6);
            assert!((r.mean_field_energy - e_rhf).abs() < 1e-6);
        }
    }
}

#[test]
fn block_hamiltonian_splits_exactly() {
    let a = load("h2");
    let b = load("h4_chain");
    let s = IntegralSet::direct_sum(&a, &b).unwrap();
    let subs = vec![
        DcSubsystem::new(vec![0, 1], vec![]).unwrap(),
        DcSubsystem::new(vec![2, 3, 4, 5], vec![]).unwrap(),
    ];
    let r = dc_scf_loop(&s, &subs, &DcOptions::default()).unwrap();
    assert!(r.converged);
    let ra = run_rhf(&a, &ScfOptions::default()).unwrap();
    let rb = run_rhf(&b, &ScfOptions::default()).unwrap();
    assert!((r.mean_field_energy - ra.total_energy - rb.total_energy).abs() < 1e-8);
    for i in 0..2 {
        for j in 2..6 {
            assert_eq!(r.density.values[(i, j)], 0.0);
        }
    }
    let block = r.density.values.view((2, 2), (4, 4)).into_owned();
    assert!((block - &rb.density.values).abs().max() < 1e-8);
}

#[test]
fn trace_is_conserved_after_fermi_level() {
    let s = load("h4_chain");
    let spec = FragmentSpec::contiguous(4, 2).unwrap();
    let subs = fragment_neighbor_buffers(&spec, 1, false);
    let scf = run_rhf(&s, &ScfOptions::default()).unwrap();
    let spectra: Vec<_> = subs.iter().map(|x| subsystem_hf(&s, x, &scf.density).unwrap()).collect();
    let ef = fermi_level(&spectra, 4, DEFAULT_BETA).unwrap();
    let d = assemble_dc_density(&spectra, ef, DEFAULT_BETA);
    assert!((d.trace() - 4.0).abs() < 1e-9);
    assert!((&d.values - d.values.transpose()).abs().max() == 0.0);
}

const H6_CHAIN_NEIGHBOR: f64 = -3.1292881219;

#[test]
fn neighbor_buffers_on_h6_chain() {
    let s = load("h6_chain");
    let (e_rhf, _) = reference("h6_chain");
    let spec = FragmentSpec::contiguous(6, 2).unwrap();
    let r = dc_scf_loop(&s, &fragment_neighbor_buffers(&spec, 1, false), &DcOptions::default()).unwrap();
    assert!(r.converged);
    assert!((r.density.trace() - 6.0).abs() < 1e-9);
    assert!((r.mean_field_energy - e_rhf).abs() < 0.05);
    assert!((r.mean_field_energy - H6_CHAIN_NEIGHBOR).abs() < 1e-7, "{}", r.mean_field_energy);
}

#[test]
fn thin_buffers_are_reported_unconverged() {
    let s = load("h6_chain");
    let spec = FragmentSpec::contiguous(6, 2).unwrap();
    let opts = DcOptions {
        max_outer: 60,
        ..Default::default()
    };
    let r = dc_scf_loop(&s, &orbital_neighbor_buffers(&spec, 1, false), &opts).unwrap();
    assert!(!r.converged);
    assert_eq!(r.outer_iterations, 60);
}

#[test]
fn subsystem_correlation_is_negative() {
    let s = load("h6_chain");
    let spec = FragmentSpec::contiguous(6, 2).unwrap();
    let subs = fragment_neighbor_buffers(&spec, 1, false);
    let r = dc_scf_loop(&s, &subs, &DcOptions::default()).unwrap();
    let corr = subsystem_correlation(&s, &subs, &r, &Solver::Fci).unwrap();
    assert_eq!(corr.len(), 3);
    assert!(corr.iter().all(|c| c.energy < 0.0 && c.n_elec % 2 == 0));
}

proptest! {
    #[test]
    fn partition_matrices_cover_all_pairs(perm in Just((0..7usize).collect::<Vec<_>>()).prop_shuffle(), cuts in proptest::collection::btree_set(1usize..7, 0..4)) {
        let mut frags = Vec::new();
        let mut start = 0;
        for &c in cuts.iter().chain(std::iter::once(&7)) {
            frags.push(perm[start..c].to_vec());
            start = c;
        }
        let spec = FragmentSpec::new(7, frags).unwrap();
        let total = full_buffers(&spec).iter().fold(DMatrix::zeros(7, 7), |acc, sub| acc + partition_matrix(sub, 7).unwrap());
        prop_assert_eq!(total, DMatrix::from_element(7, 7, 1.0));
    }

    #[test]
    fn partition_matrix_is_symmetric(frag in proptest::collection::btree_set(0usize..8, 1..4), buf in proptest::collection::btree_set(0usize..8, 0..4)) {
        let buffer: Vec<usize> = buf.difference(&frag).copied().collect();
        let sub = DcSubsystem::new(frag.into_iter().collect(), buffer).unwrap();
        let p = partition_matrix(&sub, 8).unwrap();
        prop_assert_eq!(&p, &p.transpose());
        prop_assert!(p.iter().all(|&v| v == 0.0 || v == 0.5 || v == 1.0));
    }
}
