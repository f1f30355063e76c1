//! Run configuration: TOML schema, validation, and input loading.
//!
//! Validation is exhaustive: every violation in the file is collected and
//! reported, not just the first. Loading only happens once the schema-level
//! checks pass for the fields involved, and file/shape problems join the
//! same violation list so a bad config never half-runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use dotlab_core::stats::{Centering, CltMode, CltParams, RateParams};
use dotlab_core::{
    build_cost, io, CostKind, CostMatrix, DiscreteMeasure, Divergence, SolveConfig,
};

pub const KNOWN_DIVERGENCES: &str = "entropic, power:p=<real> (p > 1)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Solve,
    Rate,
    Clt,
}

impl CommandKind {
    fn as_str(&self) -> &'static str {
        match self {
            CommandKind::Solve => "solve",
            CommandKind::Rate => "rate",
            CommandKind::Clt => "clt",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub command: Option<String>,
    pub divergence: Option<String>,
    pub epsilon: Option<f64>,
    /// "euclidean" or a path to a dense cost CSV.
    pub cost: Option<String>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub mu: Option<PopulationSpec>,
    pub nu: Option<PopulationSpec>,
    pub rate: Option<RateSection>,
    pub clt: Option<CltSection>,
    pub solve: Option<SolveSection>,
}

/// Exactly one of `csv`, `grid`, or inline `atoms` + `weights`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub csv: Option<PathBuf>,
    pub grid: Option<GridSpec>,
    pub atoms: Option<Vec<Vec<f64>>>,
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub points_per_axis: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltSection {
    pub mode: String,
    pub n: usize,
    pub m: Option<usize>,
    pub replicates: usize,
    pub centering: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub plan: Option<PathBuf>,
    pub potentials: Option<PathBuf>,
    pub tol_marginal: Option<f64>,
    pub tol_newton: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub newton_max_iter: Option<usize>,
}

/// Everything a run needs, fully loaded and shape-checked.
#[derive(Debug)]
pub struct Loaded {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub cost: CostMatrix,
    pub div: Divergence,
    pub epsilon: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub solve_cfg: SolveConfig,
    pub plan_out: Option<PathBuf>,
    pub potentials_out: Option<PathBuf>,
    pub rate_params: Option<RateParams>,
    pub clt_params: Option<CltParams>,
    /// One-line echo of the effective configuration for the metadata file.
    pub echo: String,
}

fn load_population(
    label: &str,
    spec: Option<&PopulationSpec>,
    violations: &mut Vec<String>,
) -> Option<DiscreteMeasure> {
    let Some(spec) = spec else {
        violations.push(format!("[{label}] section is required"));
        return None;
    };
    let chosen = [spec.csv.is_some(), spec.grid.is_some(), spec.atoms.is_some()];
    if chosen.iter().filter(|&&c| c).count() != 1 {
        violations.push(format!(
            "[{label}] must set exactly one of csv, grid, or atoms"
        ));
        return None;
    }
    if spec.atoms.is_some() != spec.weights.is_some() {
        violations.push(format!("[{label}] atoms and weights go together"));
        return None;
    }
    if let Some(path) = &spec.csv {
        if !path.exists() {
            violations.push(format!("[{label}] csv path {} does not exist", path.display()));
            return None;
        }
        return match io::read_measure_csv(path) {
            Ok(m) => Some(m),
            Err(e) => {
                violations.push(format!("[{label}] csv {}: {e}", path.display()));
                None
            }
        };
    }
    if let Some(grid) = &spec.grid {
        if grid.dim == 0 || grid.points_per_axis == 0 || !(grid.min < grid.max) {
            violations.push(format!(
                "[{label}] grid needs dim >= 1, points_per_axis >= 1, min < max"
            ));
            return None;
        }
        return match DiscreteMeasure::uniform_grid(
            grid.dim,
            grid.points_per_axis,
            grid.min,
            grid.max,
        ) {
            Ok(m) => Some(m),
            Err(e) => {
                violations.push(format!("[{label}] grid: {e}"));
                None
            }
        };
    }
    let atoms = spec.atoms.clone().unwrap();
    let weights = spec.weights.clone().unwrap();
    match DiscreteMeasure::new_renormalizing(atoms, weights) {
        Ok(m) => Some(m),
        Err(e) => {
            violations.push(format!("[{label}] atoms: {e}"));
            None
        }
    }
}

fn load_cost(
    spec: Option<&str>,
    mu: Option<&DiscreteMeasure>,
    nu: Option<&DiscreteMeasure>,
    violations: &mut Vec<String>,
) -> Option<CostMatrix> {
    let Some(spec) = spec else {
        violations.push("cost is required (\"euclidean\" or a csv path)".to_owned());
        return None;
    };
    if spec == "euclidean" {
        let (mu, nu) = (mu?, nu?);
        return match build_cost(mu, nu, CostKind::Euclidean) {
            Ok(c) => Some(c),
            Err(e) => {
                violations.push(format!("cost: {e}"));
                None
            }
        };
    }
    let path = Path::new(spec);
    if !path.exists() {
        violations.push(format!("cost path {spec} does not exist"));
        return None;
    }
    let cost = match io::read_cost_csv(path) {
        Ok(c) => c,
        Err(e) => {
            violations.push(format!("cost {spec}: {e}"));
            return None;
        }
    };
    if let (Some(mu), Some(nu)) = (mu, nu) {
        if cost.rows() != mu.len() || cost.cols() != nu.len() {
            violations.push(format!(
                "cost table is {}x{} but populations have {} and {} atoms",
                cost.rows(),
                cost.cols(),
                mu.len(),
                nu.len()
            ));
            return None;
        }
    }
    Some(cost)
}

fn load_divergence(name: Option<&str>, violations: &mut Vec<String>) -> Option<Divergence> {
    let Some(name) = name else {
        violations.push(format!("divergence is required; known: {KNOWN_DIVERGENCES}"));
        return None;
    };
    match Divergence::from_name(name) {
        Ok(d) => Some(d),
        Err(e) => {
            violations.push(format!(
                "unknown divergence {name:?} ({e}); known: {KNOWN_DIVERGENCES}"
            ));
            None
        }
    }
}

fn solve_config(section: Option<&SolveSection>, epsilon: f64) -> SolveConfig {
    let defaults = SolveConfig::default();
    let section = section.cloned().unwrap_or_default();
    SolveConfig {
        epsilon,
        tol_marginal: section.tol_marginal.unwrap_or(defaults.tol_marginal),
        tol_newton: section.tol_newton.unwrap_or(defaults.tol_newton),
        max_sweeps: section.max_sweeps.unwrap_or(defaults.max_sweeps),
        newton_max_iter: section.newton_max_iter.unwrap_or(defaults.newton_max_iter),
        record_dual_trace: false,
    }
}

/// Validate and load a parsed config for the given command; returns the
/// complete list of violations on failure.
pub fn load(cfg: &ConfigFile, kind: CommandKind) -> Result<Loaded, Vec<String>> {
    let mut violations = Vec::new();

    if let Some(cmd) = &cfg.command {
        if cmd != kind.as_str() {
            violations.push(format!(
                "config says command = {cmd:?} but was run as {:?}",
                kind.as_str()
            ));
        }
    }
    let epsilon = cfg.epsilon.unwrap_or(1.0);
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        violations.push(format!("epsilon must be positive, got {epsilon}"));
    }

    let mu = load_population("mu", cfg.mu.as_ref(), &mut violations);
    let nu = load_population("nu", cfg.nu.as_ref(), &mut violations);
    let cost = load_cost(cfg.cost.as_deref(), mu.as_ref(), nu.as_ref(), &mut violations);
    let div = load_divergence(cfg.divergence.as_deref(), &mut violations);
    let seed = cfg.seed.unwrap_or(0);

    let mut rate_params = None;
    let mut clt_params = None;
    match kind {
        CommandKind::Solve => {
            if cfg.rate.is_some() || cfg.clt.is_some() {
                violations.push("solve config must not carry [rate] or [clt]".to_owned());
            }
        }
        CommandKind::Rate => {
            if cfg.output.is_none() {
                violations.push("rate config needs an output path".to_owned());
            }
            match &cfg.rate {
                None => violations.push("[rate] section is required".to_owned()),
                Some(r) => {
                    if r.n_grid.len() < 4 {
                        violations.push("[rate] n_grid needs at least 4 sizes".to_owned());
                    }
                    if r.n_grid.windows(2).any(|w| w[0] >= w[1]) || r.n_grid.first() == Some(&0)
                    {
                        violations
                            .push("[rate] n_grid must be strictly increasing and positive"
                                .to_owned());
                    }
                    if r.replicates < 50 {
                        violations.push(format!(
                            "[rate] replicates must be >= 50, got {}",
                            r.replicates
                        ));
                    }
                    rate_params = Some(RateParams {
                        n_grid: r.n_grid.clone(),
                        replicates: r.replicates,
                        master_seed: seed,
                    });
                }
            }
        }
        CommandKind::Clt => {
            if cfg.output.is_none() {
                violations.push("clt config needs an output path".to_owned());
            }
            match &cfg.clt {
                None => violations.push("[clt] section is required".to_owned()),
                Some(c) => {
                    let mode = CltMode::parse(&c.mode);
                    if mode.is_none() {
                        violations.push(format!(
                            "[clt] unknown mode {:?}; known: one_sample_mu, one_sample_nu, \
                             two_sample",
                            c.mode
                        ));
                    }
                    let centering = match &c.centering {
                        None => Some(Centering::ReplicateMean),
                        Some(s) => {
                            let parsed = Centering::parse(s);
                            if parsed.is_none() {
                                violations.push(format!(
                                    "[clt] unknown centering {s:?}; known: replicate_mean, \
                                     population_value"
                                ));
                            }
                            parsed
                        }
                    };
                    if c.n == 0 {
                        violations.push("[clt] n must be positive".to_owned());
                    }
                    if c.replicates < 500 {
                        violations.push(format!(
                            "[clt] replicates must be >= 500, got {}",
                            c.replicates
                        ));
                    }
                    if mode == Some(CltMode::TwoSample) && !matches!(c.m, Some(m) if m > 0) {
                        violations.push("[clt] two_sample mode needs a positive m".to_owned());
                    }
                    if mode != Some(CltMode::TwoSample) && c.m.is_some() {
                        violations.push("[clt] m only applies to two_sample mode".to_owned());
                    }
                    if let (Some(mode), Some(centering)) = (mode, centering) {
                        clt_params = Some(CltParams {
                            mode,
                            n: c.n,
                            m: c.m,
                            replicates: c.replicates,
                            centering,
                            master_seed: seed,
                        });
                    }
                }
            }
        }
    }

    if !violations.is_empty() {
        return Err(violations);
    }
    let (mu, nu, cost, div) = (mu.unwrap(), nu.unwrap(), cost.unwrap(), div.unwrap());
    let echo = echo_line(cfg, kind, epsilon, seed, &mu, &nu);
    Ok(Loaded {
        solve_cfg: solve_config(cfg.solve.as_ref(), epsilon),
        plan_out: cfg.solve.as_ref().and_then(|s| s.plan.clone()),
        potentials_out: cfg.solve.as_ref().and_then(|s| s.potentials.clone()),
        mu,
        nu,
        cost,
        div,
        epsilon,
        seed,
        output: cfg.output.clone(),
        rate_params,
        clt_params,
        echo,
    })
}

fn echo_line(
    cfg: &ConfigFile,
    kind: CommandKind,
    epsilon: f64,
    seed: u64,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> String {
    let mut echo = format!(
        "command={} divergence={} epsilon={} cost={} seed={} mu_atoms={} nu_atoms={}",
        kind.as_str(),
        cfg.divergence.as_deref().unwrap_or("?"),
        epsilon,
        cfg.cost.as_deref().unwrap_or("?"),
        seed,
        mu.len(),
        nu.len()
    );
    if let Some(r) = &cfg.rate {
        let _ = write!(echo, " n_grid={:?} replicates={}", r.n_grid, r.replicates);
    }
    if let Some(c) = &cfg.clt {
        let _ = write!(
            echo,
            " mode={} n={} m={:?} replicates={} centering={}",
            c.mode,
            c.n,
            c.m,
            c.replicates,
            c.centering.as_deref().unwrap_or("replicate_mean")
        );
    }
    echo
}

/// Parse the TOML text; the error carries the offending line/column.
pub fn parse(text: &str) -> Result<ConfigFile, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}
