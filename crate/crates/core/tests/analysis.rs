mod common;

use num_complex::Complex64;
use pdchem::analysis::*;
use pdchem::dmet::{solve_single_shot, DmetOptions};
use pdchem::partition::FragmentSpec;
use pdchem::qubit_map::{number_operator, qubit_hamiltonian};
use pdchem::solvers::{fci_ground_state, fci_to_statevector, sampled_expectation, SamplingPlan, Statevector};
use pdchem::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn recs(x: &[f64], y: &[f64]) -> Vec<ConformerRecord> {
    x.iter()
        .zip(y)
        .enumerate()
        .map(|(i, (&a, &b))| ConformerRecord::new(format!("r{i}"), a, b).unwrap())
        .collect()
}

/// (pd qubits, full qubits, MAD, ρ_P, ρ_S, printed index) for the nine published method/basis rows.
const PUBLISHED_ROWS: [(usize, usize, f64, f64, f64, f64); 9] = [
    (46, 216, 0.075, 0.96, 0.86, 52.0),
    (86, 216, 0.084, 0.87, 0.87, 23.0),
    (158, 216, 0.047, 0.89, 0.84, 22.0),
    (74, 404, 0.10, 0.93, 0.88, 45.0),
    (136, 404, 0.086, 0.77, 0.81, 22.0),
    (252, 404, 0.048, 0.85, 0.83, 24.0),
    (160, 984, 0.14, 0.83, 0.81, 30.0),
    (290, 984, 0.099, 0.66, 0.70, 16.0),
    (542, 984, 0.052, 0.74, 0.70, 18.0),
];

fn two_sig_figs(x: f64) -> f64 {
    let scale = 10f64.powi(x.abs().log10().floor() as i32 - 1);
    (x / scale).round() * scale
}

#[test]
fn efficiency_index_reproduces_published_rows() {
    for (pd, full, mad, rp, rs, expected) in PUBLISHED_ROWS {
        let ratio = qubit_ratio(pd, full).unwrap();
        let i = efficiency_index(rp, rs, mad, ratio.value()).unwrap();
        assert_eq!(two_sig_figs(i), expected, "{ratio}: {i}");
    }
}

#[test]
fn published_ratios() {
    assert!((qubit_ratio(46, 216).unwrap().value() - 0.213).abs() < 5e-4);
    assert_eq!(qubit_ratio(46, 320).unwrap().value(), 0.14375);
}

#[test]
fn spearman_hand_example() {
    let r = recs(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]);
    assert!((spearman(&r).unwrap() - 0.8).abs() < 1e-15);
}

#[test]
fn perfect_and_anti_correlation() {
    let x = [-1.5, -0.5, 0.5, 1.5];
    let y: Vec<f64> = x.iter().map(|v| -v).collect();
    let same = recs(&x, &x);
    assert_eq!(pearson(&same).unwrap(), 1.0);
    assert_eq!(spearman(&same).unwrap(), 1.0);
    assert!((pearson(&recs(&x, &y)).unwrap() + 1.0).abs() < 1e-15);
}

#[test]
fn metrics_without_deviation_leave_index_undefined() {
    let x = [1.0, 2.0, 4.0];
    let m = metrics(&recs(&x, &x), qubit_ratio(4, 4).unwrap()).unwrap();
    assert_eq!((m.mad, m.rho_p, m.rho_s), (0.0, 1.0, 1.0));
    assert_eq!(m.i_eff, None);
}

#[test]
fn single_record_correlation_is_an_error() {
    let r = recs(&[1.0], &[1.0]);
    assert!(matches!(metrics(&r, qubit_ratio(1, 2).unwrap()), Err(Error::UndefinedCorrelation(_))));
}

fn dmet_ensemble() -> Vec<ConformerRecord> {
    (0..20)
        .map(|i| {
            let id = format!("h6_conf{i:02}");
            let s = common::load(&id);
            let (_, fci) = common::reference(&id);
            let spec = FragmentSpec::contiguous(6, 2).unwrap();
            let r = solve_single_shot(&s, &spec, &pdchem::solvers::Solver::Fci, &DmetOptions::default()).unwrap();
            ConformerRecord::new(id, fci, r.total_energy).unwrap()
        })
        .collect()
}

const ENSEMBLE_MAD: f64 = 0.004997140535;
const ENSEMBLE_RHO_P: f64 = 0.995458533872;
const ENSEMBLE_RHO_S: f64 = 0.984962406015;

#[test]
fn dmet_ensemble_metrics_regression() {
    let records = dmet_ensemble();
    let m = metrics(&records, qubit_ratio(8, 12).unwrap()).unwrap();
    assert!((m.mad - ENSEMBLE_MAD).abs() < 1e-9, "{}", m.mad);
    assert!((m.rho_p - ENSEMBLE_RHO_P).abs() < 1e-9, "{}", m.rho_p);
    assert!((m.rho_s - ENSEMBLE_RHO_S).abs() < 1e-9, "{}", m.rho_s);
    assert!(m.i_eff.unwrap() > 0.0);

    let sweep = bootstrap_noise_sweep(&records, &[0.0, 1e-9], 2000, 11).unwrap();
    assert_eq!(sweep.mean_rho_p[0], m.rho_p);
    assert_eq!(sweep.std_rho_p[0], 0.0);
    assert_eq!(sweep.mean_rho_s[0], m.rho_s);
    assert!((sweep.mean_rho_p[1] - m.rho_p).abs() < 1e-6);
    assert!((sweep.mean_rho_s[1] - m.rho_s).abs() < 1e-6);

    let sweep = bootstrap_noise_sweep(&records, &DEFAULT_SIGMAS, DEFAULT_BOOTSTRAP, 7).unwrap();
    for k in 1..sweep.sigmas.len() {
        assert!(sweep.mean_rho_p[k] <= sweep.mean_rho_p[k - 1] + 2.0 * sweep.std_rho_p[k]);
        assert!(sweep.mean_rho_s[k] <= sweep.mean_rho_s[k - 1] + 2.0 * sweep.std_rho_s[k]);
    }
}

#[test]
fn noise_lowers_pearson_on_linear_data() {
    let x: Vec<f64> = (0..15).map(|i| -3.0 + 0.004 * i as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| v + 0.01).collect();
    let sweep = bootstrap_noise_sweep(&recs(&x, &y), &DEFAULT_SIGMAS, 5000, 3).unwrap();
    for k in 1..sweep.sigmas.len() {
        assert!(sweep.mean_rho_p[k] < sweep.mean_rho_p[k - 1]);
    }
    assert!(sweep.std_rho_p.iter().all(|s| *s >= 0.0));
}

#[test]
fn sweep_is_reproducible() {
    let x = [0.1, 0.4, 0.2, 0.9, 0.5];
    let y = [0.12, 0.41, 0.25, 0.85, 0.49];
    let a = bootstrap_noise_sweep(&recs(&x, &y), &[0.05], 500, 42).unwrap();
    let b = bootstrap_noise_sweep(&recs(&x, &y), &[0.05], 500, 42).unwrap();
    assert_eq!(a, b);
    assert!(bootstrap_noise_sweep(&recs(&x[..2], &y[..2]), &[0.05], 10, 1).is_err());
    assert!(bootstrap_noise_sweep(&recs(&x, &y), &[-0.1], 10, 1).is_err());
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn slope(ms: &[u64], vars: &[f64]) -> f64 {
    let xs: Vec<f64> = ms.iter().map(|m| (*m as f64).ln()).collect();
    let ys: Vec<f64> = vars.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

const SHOT_GRID: [u64; 3] = [100, 1000, 10_000];
const SEEDS: u64 = 200;

#[test]
fn sampled_energy_variance_respects_bound() {
    for name in ["h2", "h4_chain"] {
        let s = common::load(name);
        let h = qubit_hamiltonian(&s).unwrap();
        let psi = fci_to_statevector(&fci_ground_state(&s, s.n_elec).unwrap()).unwrap();
        let mut vars = vec![];
        for m in SHOT_GRID {
            let means: Vec<f64> = (0..SEEDS)
                .map(|seed| sampled_expectation(&psi, &h, &SamplingPlan::finite(m, seed)).unwrap().mean)
                .collect();
            let v = sample_variance(&means);
            assert!(v <= variance_bound_hamiltonian(&h, m), "{name} M={m}: {v}");
            vars.push(v);
        }
        let k = slope(&SHOT_GRID, &vars);
        assert!((k + 1.0).abs() <= 0.2, "{name} slope {k}");
    }
}

#[test]
fn sampled_electron_number_variance_respects_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let amps: Vec<Complex64> = (0..16)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let psi = Statevector::from_amplitudes(amps.iter().map(|a| a / norm).collect()).unwrap();
    let n_op = number_operator(4);
    for m in SHOT_GRID {
        let means: Vec<f64> = (0..SEEDS)
            .map(|seed| sampled_expectation(&psi, &n_op, &SamplingPlan::finite(m, seed)).unwrap().mean)
            .collect();
        assert!(sample_variance(&means) <= variance_bound_electron_number(4, m));
    }
}

#[test]
fn total_bound_sums_fragments() {
    let h = qubit_hamiltonian(&common::load("h2")).unwrap();
    let hams = vec![h.clone(), h.clone(), h.clone()];
    let single = variance_bound_hamiltonian(&h, 1);
    let total = variance_bound_total(&hams, &[100, 1000, 10]).unwrap();
    assert!((total - single * (0.01 + 0.001 + 0.1)).abs() < 1e-15 * single);
    assert_eq!(variance_bound_total(&hams[..1], &[50]).unwrap(), variance_bound_hamiltonian(&h, 50));
    let equal = variance_bound_total(&hams, &[10, 10, 10]).unwrap();
    let tenfold = variance_bound_total(&hams, &[100, 100, 100]).unwrap();
    assert!((equal / tenfold - 10.0).abs() < 1e-12);
}

fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(-5.0f64..5.0, n),
        )
    })
}

proptest! {
    #[test]
    fn spearman_ignores_monotone_transforms((x, y) in paired()) {
        let base = recs(&x, &y);
        let Ok(r) = spearman(&base) else { return Ok(()); };
        let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let ty: Vec<f64> = y.iter().map(|v| v * v * v + 2.0 * v).collect();
        prop_assert_eq!(spearman(&recs(&tx, &ty)).unwrap(), r);
    }

    #[test]
    fn pearson_affine_behaviour((x, y) in paired(), a in 0.1f64..10.0, b in -10.0f64..10.0) {
        let Ok(r) = pearson(&recs(&x, &y)) else { return Ok(()); };
        let up: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let down: Vec<f64> = y.iter().map(|v| -a * v + b).collect();
        prop_assert!((pearson(&recs(&x, &up)).unwrap() - r).abs() < 1e-12);
        prop_assert!((pearson(&recs(&x, &down)).unwrap() + r).abs() < 1e-12);
    }

    #[test]
    fn mad_shift_and_self((x, y) in paired(), c in -1.0f64..1.0) {
        prop_assert_eq!(mad(&recs(&x, &x)).unwrap(), 0.0);
        let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
        let direct = x.iter().zip(&y).map(|(a, b)| (b + c - a).abs()).sum::<f64>() / x.len() as f64;
        prop_assert!((mad(&recs(&x, &shifted)).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn correlations_stay_in_range((x, y) in paired()) {
        let r = recs(&x, &y);
        if let (Ok(p), Ok(s)) = (pearson(&r), spearman(&r)) {
            prop_assert!(p.abs() <= 1.0 && s.abs() <= 1.0);
        }
    }
}
