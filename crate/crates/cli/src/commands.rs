use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use pdchem::analysis::{
    bootstrap_noise_sweep, metrics, qubit_ratio, ConformerRecord, MetricsReport, NoiseSweep, DEFAULT_BOOTSTRAP,
    DEFAULT_SIGMAS,
};
use pdchem::dc::dc_scf_loop;
use pdchem::dmet::solve_single_shot;
use pdchem::fcidump::{parse_fcidump, IntegralSet};
use pdchem::fmo::run_fmo;
use pdchem::mean_field::run_rhf;
use pdchem::solvers::fci_ground_state;

use crate::config::{Method, RunConfig};
use crate::format::{energy, index, metric};
use crate::CliError;

/// Header plus rows, rendered as CSV.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV fields are UTF-8")
    }
}

/// Write to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, table: &Table) -> Result<(), CliError> {
    let text = table.to_csv();
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => write_stdout(&text),
    }
}

/// A closed pipe downstream (`| head`) is not an error.
fn write_stdout(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Runtime(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

pub fn load_integrals(path: &Path) -> Result<IntegralSet, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_fcidump(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn warn(messages: &[String]) {
    for m in messages {
        eprintln!("warning: {m}");
    }
}

pub fn cmd_scf(cfg: &RunConfig) -> Result<(), CliError> {
    let s = load_integrals(cfg.input()?)?;
    let r = run_rhf(&s, &cfg.scf_options())?;
    let mut t = Table::new(&["energy", "iterations", "converged"]);
    t.push(vec![energy(r.total_energy), r.iterations.to_string(), r.converged.to_string()]);
    emit(cfg.output.as_deref(), &t)
}

pub fn cmd_dmet(cfg: &RunConfig) -> Result<(), CliError> {
    let s = load_integrals(cfg.input()?)?;
    let frags = cfg.fragment_spec(s.n_orb)?;
    let r = solve_single_shot(&s, &frags, &cfg.solver(), &cfg.dmet_options())?;
    warn(&r.warnings);
    let mut t = Table::new(&["energy", "mu_star", "electrons", "mu_iterations", "converged", "solver"]);
    t.push(vec![
        energy(r.total_energy),
        energy(r.mu_star),
        energy(r.total_electrons),
        r.mu_iterations.to_string(),
        r.converged.to_string(),
        r.solver.to_string(),
    ]);
    emit(cfg.output.as_deref(), &t)
}

/// One row per monomer and dimer, then a `total` row. Dimer rows carry the
/// pair correction `E_IJ − E_I − E_J`.
pub fn cmd_fmo(cfg: &RunConfig) -> Result<(), CliError> {
    let s = load_integrals(cfg.input()?)?;
    let frags = cfg.fragment_spec(s.n_orb)?;
    let solver = cfg.fmo.correlation.then(|| cfg.solver());
    let r = run_fmo(&s, &frags, solver.as_ref(), &cfg.fmo_options())?;
    warn(&r.state.warnings);
    let mono = &r.state.monomer_energies;
    let corr = r.correlation.as_ref();
    let mut t = Table::new(&["kind", "i", "j", "energy", "correction", "correlation", "converged"]);
    for (i, e) in mono.iter().enumerate() {
        let c = corr.map(|(c, _)| energy(c.monomer[i])).unwrap_or_default();
        t.push(vec!["monomer".into(), i.to_string(), String::new(), energy(*e), String::new(), c, String::new()]);
    }
    for (&(i, j), e) in &r.state.dimer_energies {
        let c = corr
            .map(|(c, _)| energy(c.dimer[&(i, j)] - c.monomer[i] - c.monomer[j]))
            .unwrap_or_default();
        t.push(vec![
            "dimer".into(),
            i.to_string(),
            j.to_string(),
            energy(*e),
            energy(e - mono[i] - mono[j]),
            c,
            String::new(),
        ]);
    }
    t.push(vec![
        "total".into(),
        String::new(),
        String::new(),
        energy(r.energy),
        String::new(),
        corr.map(|(_, total)| energy(*total)).unwrap_or_default(),
        r.state.converged.to_string(),
    ]);
    emit(cfg.output.as_deref(), &t)
}

pub fn cmd_dc(cfg: &RunConfig) -> Result<(), CliError> {
    let s = load_integrals(cfg.input()?)?;
    let frags = cfg.fragment_spec(s.n_orb)?;
    let subs = cfg.dc_subsystems(&frags)?;
    let r = dc_scf_loop(&s, &subs, &cfg.dc_options())?;
    let mut t = Table::new(&["energy", "fermi_level", "electrons", "outer_iterations", "converged"]);
    t.push(vec![
        energy(r.mean_field_energy),
        energy(r.fermi_level),
        energy(r.density.trace()),
        r.outer_iterations.to_string(),
        r.converged.to_string(),
    ]);
    emit(cfg.output.as_deref(), &t)
}

pub fn cmd_vqe(cfg: &RunConfig) -> Result<(), CliError> {
    let s = load_integrals(cfg.input()?)?;
    let (_, r) = cfg.vqe_solver().solve(&s, s.n_elec)?;
    let mut t = Table::new(&["energy", "evaluations", "converged"]);
    t.push(vec![energy(r.energy), r.evaluations.to_string(), r.converged.to_string()]);
    if let Some(path) = &cfg.vqe.trace {
        let mut trace = Table::new(&["iteration", "energy"]);
        for (k, e) in r.energy_trace.iter().enumerate() {
            trace.push(vec![k.to_string(), energy(*e)]);
        }
        emit(Some(path), &trace)?;
    }
    emit(cfg.output.as_deref(), &t)
}

#[derive(Debug, Deserialize)]
struct ManifestRow {
    id: String,
    fcidump_path: PathBuf,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Exact and decomposed energy of one conformer, with the spin-orbital
/// count of the largest subproblem the decomposition handed to its solver.
fn rank_one(cfg: &RunConfig, id: &str, path: &Path) -> Result<(ConformerRecord, usize), CliError> {
    let s = load_integrals(path)?;
    let exact = fci_ground_state(&s, s.n_elec)?.energy;
    let frags = cfg.fragment_spec(s.n_orb)?;
    let (e_pd, orbitals) = match cfg.rank.method {
        Method::Fci => (exact, s.n_orb),
        Method::Dmet => {
            let r = solve_single_shot(&s, &frags, &cfg.solver(), &cfg.dmet_options())?;
            (r.total_energy, r.embedding_sizes.into_iter().max().unwrap_or(0))
        }
        Method::Fmo => {
            let r = run_fmo(&s, &frags, Some(&cfg.solver()), &cfg.fmo_options())?;
            let total = r.energy + r.correlation.map_or(0.0, |(_, c)| c);
            let sizes = frags.fragments().iter().map(Vec::len).collect::<Vec<_>>();
            let largest_pair = (0..sizes.len())
                .flat_map(|i| (i + 1..sizes.len()).map(move |j| (i, j)))
                .map(|(i, j)| sizes[i] + sizes[j])
                .max()
                .unwrap_or(sizes[0]);
            (total, largest_pair)
        }
        Method::Dc => {
            let subs = cfg.dc_subsystems(&frags)?;
            let r = dc_scf_loop(&s, &subs, &cfg.dc_options())?;
            (r.mean_field_energy, subs.iter().map(|x| x.orbitals().len()).max().unwrap_or(0))
        }
    };
    let record = ConformerRecord::new(id, exact, e_pd)?;
    Ok((record, 2 * orbitals))
}

fn metrics_path(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.rank.metrics.clone().or_else(|| {
        cfg.output.as_ref().map(|out| {
            let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            out.with_file_name(format!("{stem}_metrics.csv"))
        })
    })
}

pub fn metrics_table(m: &MetricsReport) -> Table {
    let mut t = Table::new(&["n", "ratio", "mad", "rho_p", "rho_s", "i_eff"]);
    t.push(vec![
        m.n_records.to_string(),
        m.ratio.to_string(),
        metric(m.mad),
        metric(m.rho_p),
        metric(m.rho_s),
        index(m.i_eff),
    ]);
    t
}

/// Per-conformer records go to the output, the metrics row next to it.
pub fn cmd_rank(cfg: &RunConfig) -> Result<(), CliError> {
    let manifest = cfg.input()?;
    let rows: Vec<ManifestRow> = read_csv(manifest)?;
    if rows.is_empty() {
        return Err(CliError::Usage(format!("{} lists no conformers", manifest.display())));
    }
    let base = manifest.parent().unwrap_or(Path::new(""));
    let results: Vec<(ConformerRecord, usize)> = rows
        .par_iter()
        .map(|row| rank_one(cfg, &row.id, &base.join(&row.fcidump_path)))
        .collect::<Result<_, _>>()?;

    let first = load_integrals(&base.join(&rows[0].fcidump_path))?;
    let full = 2 * first.n_orb;
    let pd = results.iter().map(|r| r.1).max().unwrap_or(full);
    let records: Vec<ConformerRecord> = results.into_iter().map(|r| r.0).collect();
    let mut t = Table::new(&["id", "e_exact", "e_pd"]);
    for r in &records {
        t.push(vec![r.id.clone(), energy(r.e_exact), energy(r.e_pd)]);
    }
    emit(cfg.output.as_deref(), &t)?;

    let report = metrics(&records, qubit_ratio(pd, full)?)?;
    let path = metrics_path(cfg);
    if path.is_none() {
        write_stdout("\n")?;
    }
    emit(path.as_deref(), &metrics_table(&report))
}

#[derive(Debug, Deserialize)]
struct RecordRow {
    id: String,
    e_exact: f64,
    e_pd: f64,
}

pub fn sweep_table(sweep: &NoiseSweep) -> Table {
    let mut t = Table::new(&["sigma", "mean_rho_p", "std_rho_p", "mean_rho_s", "std_rho_s"]);
    for k in 0..sweep.sigmas.len() {
        t.push(vec![
            sweep.sigmas[k].to_string(),
            metric(sweep.mean_rho_p[k]),
            metric(sweep.std_rho_p[k]),
            metric(sweep.mean_rho_s[k]),
            metric(sweep.std_rho_s[k]),
        ]);
    }
    t
}

pub fn cmd_sample_noise(cfg: &RunConfig) -> Result<(), CliError> {
    let rows: Vec<RecordRow> = read_csv(cfg.input()?)?;
    let records = rows
        .into_iter()
        .map(|r| ConformerRecord::new(r.id, r.e_exact, r.e_pd))
        .collect::<Result<Vec<_>, _>>()?;
    let sigmas = cfg.noise.sigmas.clone().unwrap_or_else(|| DEFAULT_SIGMAS.to_vec());
    let n_boot = cfg.noise.n_bootstrap.unwrap_or(DEFAULT_BOOTSTRAP);
    let sweep = bootstrap_noise_sweep(&records, &sigmas, n_boot, cfg.seed())?;
    emit(cfg.output.as_deref(), &sweep_table(&sweep))
}
