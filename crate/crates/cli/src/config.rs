//! Run configuration: a TOML file with one section per module, overridden
//! by command-line flags. Every key is optional.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use pdchem::dc::{fragment_neighbor_buffers, orbital_neighbor_buffers, DcOptions, DcSubsystem, DEFAULT_BETA};
use pdchem::dmet::DmetOptions;
use pdchem::fmo::FmoOptions;
use pdchem::mean_field::ScfOptions;
use pdchem::partition::FragmentSpec;
use pdchem::solvers::optim::{BfgsOptions, NelderMeadOptions, SpsaOptions};
use pdchem::solvers::{AnsatzKind, Optimizer, SamplingPlan, Solver, VqeOptions, VqeSolver};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub fragments: FragmentsSection,
    pub solver: SolverSection,
    pub scf: ScfSection,
    pub dmet: DmetSection,
    pub fmo: FmoSection,
    pub dc: DcSection,
    pub vqe: VqeSection,
    pub rank: RankSection,
    pub noise: NoiseSection,
}

/// Either explicit orbital lists or contiguous blocks of `size`; neither
/// means one fragment holding every orbital.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FragmentsSection {
    pub orbitals: Option<Vec<Vec<usize>>>,
    pub size: Option<usize>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    #[default]
    Fci,
    Vqe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzName {
    HardwareEfficient,
    ParticleConserving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerName {
    NelderMead,
    Spsa,
    Bfgs,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub kind: SolverKind,
    pub ansatz: Option<AnsatzName>,
    pub layers: Option<usize>,
    pub optimizer: Option<OptimizerName>,
    /// Shots per Pauli term; absent or 0 means exact expectation values.
    pub shots: Option<u64>,
    pub max_evals: Option<usize>,
    pub spsa_iterations: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScfSection {
    pub max_iter: Option<usize>,
    pub density_tol: Option<f64>,
    pub level_shift: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmetSection {
    pub mu_tol: Option<f64>,
    pub mu_bracket: Option<[f64; 2]>,
    pub max_mu_iter: Option<usize>,
    pub max_expansions: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FmoSection {
    pub scc_tol: Option<f64>,
    pub max_scc_iter: Option<usize>,
    /// Add monomer and dimer correlation energies from the configured solver.
    pub correlation: bool,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BufferMode {
    /// The `neighbors` adjacent fragments on each side.
    #[default]
    Fragment,
    /// The `neighbors` adjacent orbitals on each side.
    Orbital,
    /// Every orbital outside the fragment.
    Full,
    /// The lists in `buffers`, one per fragment.
    Explicit,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcSection {
    pub beta: Option<f64>,
    pub outer_tol: Option<f64>,
    pub max_outer: Option<usize>,
    pub buffer: BufferMode,
    pub neighbors: Option<usize>,
    pub periodic: bool,
    pub buffers: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqeSection {
    /// Where to write the `iteration,energy` optimizer trace.
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Dmet,
    Fmo,
    Dc,
    Fci,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankSection {
    pub method: Method,
    /// Where to write the metrics row; defaults to `<output stem>_metrics.csv`.
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub sigmas: Option<Vec<f64>>,
    pub n_bootstrap: Option<usize>,
}

/// Flags shared by every subcommand.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub input: Option<PathBuf>,
    pub config: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn load(flags: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                let mut cfg: RunConfig = toml::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
                // Paths in the file are relative to the file.
                let base = path.parent().unwrap_or(Path::new(""));
                for p in [&mut cfg.input, &mut cfg.output, &mut cfg.vqe.trace, &mut cfg.rank.metrics] {
                    if let Some(rel) = p.as_mut() {
                        *rel = base.join(&*rel);
                    }
                }
                cfg
            }
            None => RunConfig::default(),
        };
        if flags.input.is_some() {
            cfg.input = flags.input.clone();
        }
        if flags.output.is_some() {
            cfg.output = flags.output.clone();
        }
        if flags.seed.is_some() {
            cfg.seed = flags.seed;
        }
        if flags.jobs.is_some() {
            cfg.jobs = flags.jobs;
        }
        Ok(cfg)
    }

    pub fn input(&self) -> Result<&Path, CliError> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Usage("no input given (use --input or `input` in the config)".into()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn fragment_spec(&self, n_orb: usize) -> Result<FragmentSpec, CliError> {
        let spec = match (&self.fragments.orbitals, self.fragments.size) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "[fragments] takes either `orbitals` or `size`, not both".into(),
                ))
            }
            (Some(lists), None) => FragmentSpec::new(n_orb, lists.clone()),
            (None, Some(size)) => FragmentSpec::contiguous(n_orb, size),
            (None, None) => FragmentSpec::whole(n_orb),
        };
        spec.map_err(|e| CliError::Usage(format!("[fragments]: {e}")))
    }

    pub fn scf_options(&self) -> ScfOptions {
        let d = ScfOptions::default();
        ScfOptions {
            max_iter: self.scf.max_iter.unwrap_or(d.max_iter),
            density_tol: self.scf.density_tol.unwrap_or(d.density_tol),
            level_shift: self.scf.level_shift.unwrap_or(d.level_shift),
        }
    }

    pub fn dmet_options(&self) -> DmetOptions {
        let d = DmetOptions::default();
        DmetOptions {
            mu_tol_electrons: self.dmet.mu_tol.unwrap_or(d.mu_tol_electrons),
            mu_bracket: self.dmet.mu_bracket.map(|[a, b]| (a, b)).unwrap_or(d.mu_bracket),
            max_mu_iter: self.dmet.max_mu_iter.unwrap_or(d.max_mu_iter),
            max_expansions: self.dmet.max_expansions.unwrap_or(d.max_expansions),
            ..d
        }
    }

    pub fn fmo_options(&self) -> FmoOptions {
        let d = FmoOptions::default();
        FmoOptions {
            scc_tol: self.fmo.scc_tol.unwrap_or(d.scc_tol),
            max_scc_iter: self.fmo.max_scc_iter.unwrap_or(d.max_scc_iter),
            scf: self.scf_options(),
        }
    }

    pub fn dc_options(&self) -> DcOptions {
        let d = DcOptions::default();
        DcOptions {
            beta: self.dc.beta.unwrap_or(DEFAULT_BETA),
            outer_tol: self.dc.outer_tol.unwrap_or(d.outer_tol),
            max_outer: self.dc.max_outer.unwrap_or(d.max_outer),
        }
    }

    pub fn dc_subsystems(&self, frags: &FragmentSpec) -> Result<Vec<DcSubsystem>, CliError> {
        let k = self.dc.neighbors.unwrap_or(1);
        let subs = match self.dc.buffer {
            BufferMode::Fragment => fragment_neighbor_buffers(frags, k, self.dc.periodic),
            BufferMode::Orbital => orbital_neighbor_buffers(frags, k, self.dc.periodic),
            BufferMode::Full => frags
                .fragments()
                .iter()
                .map(|f| DcSubsystem {
                    fragment: f.clone(),
                    buffer: (0..frags.n_orb()).filter(|p| !f.contains(p)).collect(),
                })
                .collect(),
            BufferMode::Explicit => {
                let lists = self.dc.buffers.as_ref().ok_or_else(|| {
                    CliError::Usage("[dc] buffer = \"explicit\" needs `buffers`".into())
                })?;
                if lists.len() != frags.len() {
                    return Err(CliError::Usage(format!(
                        "[dc] has {} buffer lists for {} fragments",
                        lists.len(),
                        frags.len()
                    )));
                }
                frags
                    .fragments()
                    .iter()
                    .zip(lists)
                    .map(|(f, b)| {
                        if let Some(p) = b.iter().find(|p| **p >= frags.n_orb()) {
                            return Err(CliError::Usage(format!("[dc] buffer orbital {p} out of range")));
                        }
                        DcSubsystem::new(f.clone(), b.clone()).map_err(|e| CliError::Usage(format!("[dc]: {e}")))
                    })
                    .collect::<Result<_, _>>()?
            }
        };
        Ok(subs)
    }

    pub fn sampling_plan(&self) -> SamplingPlan {
        match self.solver.shots {
            None | Some(0) => SamplingPlan::exact(),
            Some(m) => SamplingPlan::finite(m, self.seed()),
        }
    }

    pub fn vqe_solver(&self) -> VqeSolver {
        let s = &self.solver;
        let optimizer = s.optimizer.map(|name| match name {
            OptimizerName::NelderMead => {
                let d = NelderMeadOptions::default();
                Optimizer::NelderMead(NelderMeadOptions {
                    max_evals: s.max_evals.unwrap_or(d.max_evals),
                    ..d
                })
            }
            OptimizerName::Spsa => {
                let d = SpsaOptions::default();
                Optimizer::Spsa(SpsaOptions {
                    iterations: s.spsa_iterations.unwrap_or(d.iterations),
                    ..d
                })
            }
            OptimizerName::Bfgs => {
                let d = BfgsOptions::default();
                Optimizer::Bfgs(BfgsOptions {
                    max_evals: s.max_evals.unwrap_or(d.max_evals),
                    ..d
                })
            }
        });
        VqeSolver {
            ansatz: match s.ansatz {
                Some(AnsatzName::HardwareEfficient) => AnsatzKind::HardwareEfficient,
                _ => AnsatzKind::ParticleConserving,
            },
            layers: s.layers,
            options: VqeOptions {
                optimizer,
                ..VqeOptions::default()
            },
            plan: self.sampling_plan(),
        }
    }

    pub fn solver(&self) -> Solver {
        match self.solver.kind {
            SolverKind::Fci => Solver::Fci,
            SolverKind::Vqe => Solver::Vqe(self.vqe_solver()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg.solver(), Solver::Fci);
        assert_eq!(cfg.dmet_options(), DmetOptions::default());
        assert_eq!(cfg.fragment_spec(4).unwrap().len(), 1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[dmet]\nmu_tolerance = 1.0").is_err());
    }

    #[test]
    fn sections_parse() {
        let cfg: RunConfig = toml::from_str(
            "seed = 3\n[fragments]\nsize = 2\n[solver]\nkind = \"vqe\"\nshots = 100\noptimizer = \"spsa\"\n[dc]\nbuffer = \"orbital\"\nneighbors = 2\n[rank]\nmethod = \"fmo\"",
        )
        .unwrap();
        assert_eq!(cfg.fragment_spec(6).unwrap().len(), 3);
        assert_eq!(cfg.sampling_plan(), SamplingPlan::finite(100, 3));
        assert!(matches!(cfg.solver(), Solver::Vqe(_)));
        assert_eq!(cfg.dc.buffer, BufferMode::Orbital);
        assert_eq!(cfg.rank.method, Method::Fmo);
    }

    #[test]
    fn fragments_are_validated_against_orbital_count() {
        let cfg: RunConfig = toml::from_str("[fragments]\norbitals = [[0, 1], [2, 5]]").unwrap();
        assert!(matches!(cfg.fragment_spec(4), Err(CliError::Usage(_))));
    }
}
