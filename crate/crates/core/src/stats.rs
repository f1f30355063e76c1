//! Replicated sampling experiments around the regularized transport cost.
//!
//! Fix population measures `mu`, `nu`, a cost and a divergence, and write
//! `S(a, b)` for the regularized cost between measures `a` and `b`. The
//! experiments here probe how `S(mu_n, nu_n)` behaves when the inputs are
//! empirical measures of `n` i.i.d. draws:
//!
//! * [`StatsProblem::rate_experiment`]: log-log fit of the mean absolute
//!   error against `n`, expected slope around -1/2;
//! * [`StatsProblem::bias_variance_table`] companions: the plug-in cost is
//!   biased upward (a supremum of empirical averages), and `n * Var` stays
//!   bounded;
//! * [`StatsProblem::efron_stein_check`]: the jackknife-style
//!   bounded-differences estimate dominates the empirical variance;
//! * [`StatsProblem::deviation_profile`]: tail exceedance against a
//!   sub-Gaussian envelope, diagnostic only;
//! * [`StatsProblem::clt_experiment`]: standardized replicates of the
//!   one- or two-sample statistic against the standard normal, with the
//!   asymptotic variance computed exactly from the population potentials
//!   and re-estimated from one replicate's extended potentials;
//! * [`StatsProblem::linearization_diagnostic`]: the quadratic remainder of
//!   the first-order expansion dies out faster than `1/n`.
//!
//! Replicates are independent tasks with per-replicate seeds derived from
//! the master seed, merged by index: reports are bit-identical for a given
//! seed no matter how many worker threads run.

use rayon::prelude::*;
use thiserror::Error;

use crate::divergence::Divergence;
use crate::measure::{counts_from_indices, draw_indices, CostMatrix, DiscreteMeasure};
use crate::rng::{replicate_rng, stream_id};
use crate::solver::{
    extend_potential, solve_scaled, DualSolution, Side, SolveConfig, SolverError,
};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Measure(#[from] crate::measure::MeasureError),
    #[error(transparent)]
    Divergence(#[from] crate::divergence::DivergenceError),
    #[error("experiment aborted: {excluded} of {total} replicates failed to converge")]
    ExperimentAborted { excluded: usize, total: usize },
    #[error("asymptotic variance {sigma_sq:e} is numerically zero; standardization undefined")]
    ZeroVariance { sigma_sq: f64 },
    #[error("invalid experiment parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Fraction of replicates allowed to fail (after one retry) before the
/// whole experiment is abandoned.
const MAX_EXCLUDED_FRACTION: f64 = 0.01;

/// A population-level problem instance shared by all experiments.
#[derive(Debug, Clone, Copy)]
pub struct StatsProblem<'a> {
    pub pop_mu: &'a DiscreteMeasure,
    pub pop_nu: &'a DiscreteMeasure,
    pub cost: &'a CostMatrix,
    pub div: &'a Divergence,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub value: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

/// Asymptotic variances of the empirical cost. With `Psi(x,y) =
/// eps * psi((f(x) + g(y) - c(x,y))/eps)` at the population potentials:
///
/// * one-sample: `sigma1 = Var_mu(f - E_nu(Psi|X))`, `sigma2` symmetric;
/// * two-sample: `sigma3 = Var_mu(f) + Var_mu(E_nu(Psi|X))
///   - 2 E_nu[Cov_mu(f, Psi|Y)]`, `sigma4` symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variances {
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub sigma3_sq: f64,
    pub sigma4_sq: f64,
}

/// The two algebraic routes to each two-sample cross term. Conditioning on
/// the own coordinate (`Cov(pot, conditional mean)`) and averaging the
/// conditional covariance over the other coordinate coincide on finite
/// product populations; the table exists to make that visible numerically.
#[derive(Debug, Clone, Copy)]
pub struct CrossTermTable {
    pub f_cov_with_conditional_mean: f64,
    pub f_avg_conditional_cov: f64,
    pub g_cov_with_conditional_mean: f64,
    pub g_avg_conditional_cov: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CltMode {
    OneSampleMu,
    OneSampleNu,
    TwoSample,
}

impl CltMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CltMode::OneSampleMu => "one_sample_mu",
            CltMode::OneSampleNu => "one_sample_nu",
            CltMode::TwoSample => "two_sample",
        }
    }

    pub fn parse(s: &str) -> Option<CltMode> {
        match s {
            "one_sample_mu" => Some(CltMode::OneSampleMu),
            "one_sample_nu" => Some(CltMode::OneSampleNu),
            "two_sample" => Some(CltMode::TwoSample),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Centering {
    ReplicateMean,
    PopulationValue,
}

impl Centering {
    pub fn as_str(&self) -> &'static str {
        match self {
            Centering::ReplicateMean => "replicate_mean",
            Centering::PopulationValue => "population_value",
        }
    }

    pub fn parse(s: &str) -> Option<Centering> {
        match s {
            "replicate_mean" => Some(Centering::ReplicateMean),
            "population_value" => Some(Centering::PopulationValue),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RateParams {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub n_grid: Vec<usize>,
    /// `E |S_n - S|` per grid point.
    pub mean_abs_error: Vec<f64>,
    /// `mean(S_n) - S` per grid point.
    pub bias: Vec<f64>,
    /// Population variance (divisor R) per grid point, so that
    /// `mse = bias^2 + variance` is an identity.
    pub variance: Vec<f64>,
    pub mse: Vec<f64>,
    pub stderr: Vec<f64>,
    /// OLS slope of `log(mean_abs_error)` on `log(n)`; absent when some
    /// mean error is exactly zero (degenerate populations).
    pub fitted_slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub seeds: u64,
    pub replicates: usize,
    pub excluded: usize,
    pub degenerate_zero_error: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct BiasVarianceRow {
    pub n: usize,
    pub bias: f64,
    pub variance: f64,
    pub bias_sq_plus_variance: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EfronSteinCheck {
    pub empirical_var: f64,
    pub es_bound_estimate: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct DeviationRow {
    pub t: f64,
    pub empirical_exceedance: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone)]
pub struct DeviationProfile {
    pub kappa: f64,
    pub rows: Vec<DeviationRow>,
}

#[derive(Debug, Clone)]
pub struct CltParams {
    pub mode: CltMode,
    pub n: usize,
    /// Second sample size, two-sample mode only.
    pub m: Option<usize>,
    pub replicates: usize,
    pub centering: Centering,
    pub master_seed: u64,
}

#[derive(Debug, Clone)]
pub struct CltReport {
    pub mode: CltMode,
    pub n: usize,
    pub m: Option<usize>,
    pub lambda: Option<f64>,
    pub standardized: Vec<f64>,
    pub sigma_sq_exact: f64,
    pub sigma_sq_plugin: Option<f64>,
    pub ks_distance: f64,
    pub centering: Centering,
    pub warnings: Vec<String>,
    pub master_seed: u64,
    pub excluded: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LinearizationRow {
    pub n: usize,
    pub n_var_remainder: f64,
}

impl<'a> StatsProblem<'a> {
    fn solve_cfg(&self) -> SolveConfig {
        SolveConfig {
            epsilon: self.epsilon,
            ..SolveConfig::default()
        }
    }

    fn check_shapes(&self) -> Result<()> {
        if self.cost.rows() != self.pop_mu.len() || self.cost.cols() != self.pop_nu.len() {
            return Err(StatsError::InvalidParams(format!(
                "cost is {}x{}, populations want {}x{}",
                self.cost.rows(),
                self.cost.cols(),
                self.pop_mu.len(),
                self.pop_nu.len()
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(StatsError::InvalidParams(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Solve on the full population supports.
    pub fn exact_value_and_potentials(&self) -> Result<ExactSolution> {
        self.check_shapes()?;
        let sol = solve_scaled(
            self.pop_mu,
            self.pop_nu,
            self.cost,
            self.div,
            &self.solve_cfg(),
        )?;
        Ok(ExactSolution {
            value: sol.dual_value,
            f: sol.f,
            g: sol.g,
        })
    }

    /// Solve with one retry at a 10x looser root tolerance; `Ok(None)`
    /// marks a replicate to be excluded, hard errors propagate.
    fn solve_replicate(
        &self,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        cost: &CostMatrix,
    ) -> Result<Option<DualSolution>> {
        let cfg = self.solve_cfg();
        match solve_scaled(mu, nu, cost, self.div, &cfg) {
            Ok(sol) => Ok(Some(sol)),
            Err(SolverError::NotConverged { .. }) => {
                let relaxed = SolveConfig {
                    tol_newton: cfg.tol_newton * 10.0,
                    ..cfg
                };
                match solve_scaled(mu, nu, cost, self.div, &relaxed) {
                    Ok(sol) => Ok(Some(sol)),
                    Err(SolverError::NotConverged { .. }) => Ok(None),
                    Err(e) => Err(e.into()),
                }
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Empirical value `S(mu_n, nu_n)` from index draws; either side may be
    /// the full population (empty indices slot).
    fn empirical_value(
        &self,
        idx_mu: Option<&[usize]>,
        idx_nu: Option<&[usize]>,
    ) -> Result<Option<f64>> {
        let all_rows: Vec<usize> = (0..self.pop_mu.len()).collect();
        let all_cols: Vec<usize> = (0..self.pop_nu.len()).collect();
        let (mu, rows) = match idx_mu {
            Some(idx) => {
                let counts = counts_from_indices(self.pop_mu.len(), idx);
                let (m, kept) = self.pop_mu.from_counts(&counts)?;
                (m, kept)
            }
            None => (self.pop_mu.clone(), all_rows),
        };
        let (nu, cols) = match idx_nu {
            Some(idx) => {
                let counts = counts_from_indices(self.pop_nu.len(), idx);
                let (m, kept) = self.pop_nu.from_counts(&counts)?;
                (m, kept)
            }
            None => (self.pop_nu.clone(), all_cols),
        };
        let sub = self.cost.restrict(&rows, &cols);
        Ok(self
            .solve_replicate(&mu, &nu, &sub)?
            .map(|sol| sol.dual_value))
    }

    /// Mean-error decay against `n`, two-sample empirical inputs.
    pub fn rate_experiment(&self, params: &RateParams) -> Result<RateReport> {
        self.check_shapes()?;
        if params.replicates < 50 {
            return Err(StatsError::InvalidParams(format!(
                "rate experiment needs >= 50 replicates, got {}",
                params.replicates
            )));
        }
        if params.n_grid.len() < 4
            || params.n_grid.windows(2).any(|w| w[0] >= w[1])
            || params.n_grid[0] == 0
        {
            return Err(StatsError::InvalidParams(
                "n_grid must hold >= 4 strictly increasing positive sizes".to_owned(),
            ));
        }
        let exact = self.exact_value_and_potentials()?.value;
        let replicates = params.replicates;
        let total = params.n_grid.len() * replicates;

        let mut mean_abs_error = Vec::new();
        let mut bias = Vec::new();
        let mut variance = Vec::new();
        let mut mse = Vec::new();
        let mut stderr = Vec::new();
        let mut excluded = 0usize;

        for (block, &n) in params.n_grid.iter().enumerate() {
            let values: Vec<Option<f64>> = (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let mut rng =
                        replicate_rng(params.master_seed, stream_id(block as u32, r as u32));
                    let idx_mu = draw_indices(self.pop_mu, n, &mut rng);
                    let idx_nu = draw_indices(self.pop_nu, n, &mut rng);
                    self.empirical_value(Some(&idx_mu), Some(&idx_nu))
                })
                .collect::<Result<Vec<_>>>()?;
            let kept: Vec<f64> = values.iter().flatten().copied().collect();
            excluded += replicates - kept.len();
            if kept.is_empty() {
                return Err(StatsError::ExperimentAborted { excluded, total });
            }
            let r = kept.len() as f64;
            let mean: f64 = kept.iter().sum::<f64>() / r;
            let mae: f64 = kept.iter().map(|v| (v - exact).abs()).sum::<f64>() / r;
            let var: f64 = kept.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / r;
            let m: f64 = kept.iter().map(|v| (v - exact) * (v - exact)).sum::<f64>() / r;
            mean_abs_error.push(mae);
            bias.push(mean - exact);
            variance.push(var);
            mse.push(m);
            stderr.push((var / r).sqrt());
        }
        if excluded as f64 > MAX_EXCLUDED_FRACTION * total as f64 {
            return Err(StatsError::ExperimentAborted { excluded, total });
        }

        let degenerate = mean_abs_error.iter().any(|&v| v <= 0.0);
        let (fitted_slope, slope_stderr) = if degenerate {
            (None, None)
        } else {
            let xs: Vec<f64> = params.n_grid.iter().map(|&n| (n as f64).ln()).collect();
            let ys: Vec<f64> = mean_abs_error.iter().map(|v| v.ln()).collect();
            let (slope, se) = ols_slope(&xs, &ys);
            (Some(slope), Some(se))
        };

        Ok(RateReport {
            n_grid: params.n_grid.clone(),
            mean_abs_error,
            bias,
            variance,
            mse,
            stderr,
            fitted_slope,
            slope_stderr,
            seeds: params.master_seed,
            replicates,
            excluded,
            degenerate_zero_error: degenerate,
        })
    }

    /// Per-`n` split of the mean squared error; `bias^2 + variance = mse`
    /// holds as an identity because the variance uses divisor `R`.
    pub fn bias_variance_table(&self, report: &RateReport) -> Vec<BiasVarianceRow> {
        report
            .n_grid
            .iter()
            .enumerate()
            .map(|(k, &n)| BiasVarianceRow {
                n,
                bias: report.bias[k],
                variance: report.variance[k],
                bias_sq_plus_variance: report.bias[k] * report.bias[k] + report.variance[k],
                mse: report.mse[k],
            })
            .collect()
    }

    /// Jackknife-style bounded-differences check: resample a single
    /// coordinate on each side and compare `Var(Z)` against
    /// `n E(Z - Z'_x)_+^2 + n E(Z - Z'_y)_+^2`.
    pub fn efron_stein_check(
        &self,
        n: usize,
        trials: usize,
        master_seed: u64,
    ) -> Result<EfronSteinCheck> {
        self.check_shapes()?;
        if n < 5 || trials < 2 {
            return Err(StatsError::InvalidParams(
                "efron-stein needs n >= 5 and trials >= 2".to_owned(),
            ));
        }
        let samples: Vec<Option<(f64, f64, f64)>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = replicate_rng(master_seed, stream_id(0, t as u32));
                let mut idx_x = draw_indices(self.pop_mu, n, &mut rng);
                let mut idx_y = draw_indices(self.pop_nu, n, &mut rng);
                let x_new = draw_indices(self.pop_mu, 1, &mut rng)[0];
                let y_new = draw_indices(self.pop_nu, 1, &mut rng)[0];
                let z = match self.empirical_value(Some(&idx_x), Some(&idx_y))? {
                    Some(v) => v,
                    None => return Ok(None),
                };
                let x_old = idx_x[0];
                idx_x[0] = x_new;
                let z_x = match self.empirical_value(Some(&idx_x), Some(&idx_y))? {
                    Some(v) => v,
                    None => return Ok(None),
                };
                idx_x[0] = x_old;
                idx_y[0] = y_new;
                let z_y = match self.empirical_value(Some(&idx_x), Some(&idx_y))? {
                    Some(v) => v,
                    None => return Ok(None),
                };
                let dx = (z - z_x).max(0.0).powi(2);
                let dy = (z - z_y).max(0.0).powi(2);
                Ok(Some((z, dx, dy)))
            })
            .collect::<Result<Vec<_>>>()?;
        let kept: Vec<(f64, f64, f64)> = samples.iter().flatten().copied().collect();
        let excluded = trials - kept.len();
        if kept.len() < 2 || excluded as f64 > MAX_EXCLUDED_FRACTION * trials as f64 {
            return Err(StatsError::ExperimentAborted {
                excluded,
                total: trials,
            });
        }
        let t = kept.len() as f64;
        let mean_z: f64 = kept.iter().map(|s| s.0).sum::<f64>() / t;
        let var: f64 = kept.iter().map(|s| (s.0 - mean_z).powi(2)).sum::<f64>() / t;
        let mean_dx: f64 = kept.iter().map(|s| s.1).sum::<f64>() / t;
        let mean_dy: f64 = kept.iter().map(|s| s.2).sum::<f64>() / t;
        Ok(EfronSteinCheck {
            empirical_var: var,
            es_bound_estimate: n as f64 * (mean_dx + mean_dy),
            trials: kept.len(),
        })
    }

    /// Tail exceedance of `|S_n - S|` against the envelope `min(1, 4e^-t)`
    /// along `q(t) = kappa sqrt(t/n)`. The scale `kappa` is calibrated at
    /// `t = 1`: since `4e^-1 > 1`, the quantile level clamps to the sample
    /// minimum. Diagnostic output; the only contract is that the
    /// exceedance is nonincreasing in `t`, which holds for any positive
    /// scale.
    pub fn deviation_profile(
        &self,
        n: usize,
        replicates: usize,
        master_seed: u64,
    ) -> Result<DeviationProfile> {
        self.check_shapes()?;
        if replicates < 1000 {
            return Err(StatsError::InvalidParams(format!(
                "deviation profile needs >= 1000 replicates, got {replicates}"
            )));
        }
        let exact = self.exact_value_and_potentials()?.value;
        let values: Vec<Option<f64>> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(master_seed, stream_id(0, r as u32));
                let idx_mu = draw_indices(self.pop_mu, n, &mut rng);
                let idx_nu = draw_indices(self.pop_nu, n, &mut rng);
                self.empirical_value(Some(&idx_mu), Some(&idx_nu))
            })
            .collect::<Result<Vec<_>>>()?;
        let deviations: Vec<f64> = values
            .iter()
            .flatten()
            .map(|v| (v - exact).abs())
            .collect();
        let excluded = replicates - deviations.len();
        if deviations.is_empty() || excluded as f64 > MAX_EXCLUDED_FRACTION * replicates as f64 {
            return Err(StatsError::ExperimentAborted {
                excluded,
                total: replicates,
            });
        }
        let d_min = deviations.iter().copied().fold(f64::INFINITY, f64::min);
        let kappa = d_min * (n as f64).sqrt();
        let r = deviations.len() as f64;
        let rows = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&t| {
                let q = kappa * (t / n as f64).sqrt();
                let exceed = deviations.iter().filter(|&&d| d > q).count() as f64 / r;
                DeviationRow {
                    t,
                    empirical_exceedance: exceed,
                    envelope: (4.0 * (-t).exp()).min(1.0),
                }
            })
            .collect();
        Ok(DeviationProfile { kappa, rows })
    }

    /// Exact asymptotic variances from given potentials (population-level
    /// finite sums). Shift-invariant in the potential gauge.
    pub fn asymptotic_variances(&self, f: &[f64], g: &[f64]) -> Result<Variances> {
        let (psi, a, b) = self.psi_star(f, g)?;
        let mu = self.pop_mu;
        let nu = self.pop_nu;
        let (n, m) = (mu.len(), nu.len());

        let var_mu = |v: &dyn Fn(usize) -> f64| -> f64 {
            let mean: f64 = (0..n).map(|i| mu.weight(i) * v(i)).sum();
            (0..n)
                .map(|i| mu.weight(i) * (v(i) - mean) * (v(i) - mean))
                .sum()
        };
        let var_nu = |v: &dyn Fn(usize) -> f64| -> f64 {
            let mean: f64 = (0..m).map(|j| nu.weight(j) * v(j)).sum();
            (0..m)
                .map(|j| nu.weight(j) * (v(j) - mean) * (v(j) - mean))
                .sum()
        };

        let sigma1_sq = var_mu(&|i| f[i] - a[i]);
        let sigma2_sq = var_nu(&|j| g[j] - b[j]);

        let mean_f: f64 = (0..n).map(|i| mu.weight(i) * f[i]).sum();
        let mean_g: f64 = (0..m).map(|j| nu.weight(j) * g[j]).sum();
        // E_nu[ Cov_mu(f, Psi | Y) ]
        let mut cross_f = 0.0;
        for j in 0..m {
            let e_f_psi: f64 = (0..n)
                .map(|i| mu.weight(i) * f[i] * psi[i * m + j])
                .sum();
            cross_f += nu.weight(j) * (e_f_psi - mean_f * b[j]);
        }
        // E_mu[ Cov_nu(g, Psi | X) ]
        let mut cross_g = 0.0;
        for i in 0..n {
            let e_g_psi: f64 = (0..m)
                .map(|j| nu.weight(j) * g[j] * psi[i * m + j])
                .sum();
            cross_g += mu.weight(i) * (e_g_psi - mean_g * a[i]);
        }
        let sigma3_sq = var_mu(&|i| f[i]) + var_mu(&|i| a[i]) - 2.0 * cross_f;
        let sigma4_sq = var_nu(&|j| g[j]) + var_nu(&|j| b[j]) - 2.0 * cross_g;
        Ok(Variances {
            sigma1_sq,
            sigma2_sq,
            sigma3_sq,
            sigma4_sq,
        })
    }

    /// Both routes to each cross term, for inspection. See
    /// [`CrossTermTable`].
    pub fn cross_term_table(&self, f: &[f64], g: &[f64]) -> Result<CrossTermTable> {
        let (psi, a, b) = self.psi_star(f, g)?;
        let mu = self.pop_mu;
        let nu = self.pop_nu;
        let (n, m) = (mu.len(), nu.len());
        let mean_f: f64 = (0..n).map(|i| mu.weight(i) * f[i]).sum();
        let mean_g: f64 = (0..m).map(|j| nu.weight(j) * g[j]).sum();
        let mean_a: f64 = (0..n).map(|i| mu.weight(i) * a[i]).sum();
        let mean_b: f64 = (0..m).map(|j| nu.weight(j) * b[j]).sum();

        let f_cov_with_conditional_mean: f64 = (0..n)
            .map(|i| mu.weight(i) * (f[i] - mean_f) * (a[i] - mean_a))
            .sum();
        let mut f_avg_conditional_cov = 0.0;
        for j in 0..m {
            let e_f_psi: f64 = (0..n)
                .map(|i| mu.weight(i) * f[i] * psi[i * m + j])
                .sum();
            f_avg_conditional_cov += nu.weight(j) * (e_f_psi - mean_f * b[j]);
        }
        let g_cov_with_conditional_mean: f64 = (0..m)
            .map(|j| nu.weight(j) * (g[j] - mean_g) * (b[j] - mean_b))
            .sum();
        let mut g_avg_conditional_cov = 0.0;
        for i in 0..n {
            let e_g_psi: f64 = (0..m)
                .map(|j| nu.weight(j) * g[j] * psi[i * m + j])
                .sum();
            g_avg_conditional_cov += mu.weight(i) * (e_g_psi - mean_g * a[i]);
        }
        Ok(CrossTermTable {
            f_cov_with_conditional_mean,
            f_avg_conditional_cov,
            g_cov_with_conditional_mean,
            g_avg_conditional_cov,
        })
    }

    /// `Psi` matrix and its conditional means given X (rows) and Y (cols).
    fn psi_star(&self, f: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.check_shapes()?;
        let (n, m) = (self.pop_mu.len(), self.pop_nu.len());
        if f.len() != n || g.len() != m {
            return Err(StatsError::InvalidParams(format!(
                "potentials are {}/{}, populations want {}/{}",
                f.len(),
                g.len(),
                n,
                m
            )));
        }
        let eps = self.epsilon;
        let mut psi = vec![0.0; n * m];
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; m];
        for i in 0..n {
            let row = self.cost.row(i);
            for j in 0..m {
                let v = eps * self.div.psi((f[i] + g[j] - row[j]) / eps)?;
                psi[i * m + j] = v;
                a[i] += self.pop_nu.weight(j) * v;
                b[j] += self.pop_mu.weight(i) * v;
            }
        }
        Ok((psi, a, b))
    }

    /// Standardized replicates of the empirical cost against the standard
    /// normal.
    pub fn clt_experiment(&self, params: &CltParams) -> Result<CltReport> {
        self.check_shapes()?;
        if params.replicates < 500 {
            return Err(StatsError::InvalidParams(format!(
                "clt experiment needs >= 500 replicates, got {}",
                params.replicates
            )));
        }
        if params.n == 0 {
            return Err(StatsError::InvalidParams("n must be positive".to_owned()));
        }
        let m = match (params.mode, params.m) {
            (CltMode::TwoSample, Some(m)) if m > 0 => Some(m),
            (CltMode::TwoSample, _) => {
                return Err(StatsError::InvalidParams(
                    "two_sample mode needs a positive m".to_owned(),
                ))
            }
            (_, _) => None,
        };

        let mut warnings = Vec::new();
        if !self.div.is_dual_regular() {
            warnings.push(format!(
                "divergence {} is not dual regular; proceeding, plug-in variance skipped",
                self.div.name()
            ));
        }

        let exact = self.exact_value_and_potentials()?;
        let variances = self.asymptotic_variances(&exact.f, &exact.g)?;
        let n = params.n;
        let (scale, sigma_sq_exact, lambda) = match params.mode {
            CltMode::OneSampleMu => ((n as f64).sqrt(), variances.sigma1_sq, None),
            CltMode::OneSampleNu => ((n as f64).sqrt(), variances.sigma2_sq, None),
            CltMode::TwoSample => {
                let m = m.unwrap() as f64;
                let nf = n as f64;
                let lambda = m / (nf + m);
                if !(0.05..=0.95).contains(&lambda) {
                    warnings.push(format!(
                        "sample-size ratio lambda = {lambda} is outside [0.05, 0.95]; \
                         the normal limit may be a poor description"
                    ));
                }
                (
                    (nf * m / (nf + m)).sqrt(),
                    lambda * variances.sigma3_sq + (1.0 - lambda) * variances.sigma4_sq,
                    Some(lambda),
                )
            }
        };
        if sigma_sq_exact <= 1e-14 {
            return Err(StatsError::ZeroVariance {
                sigma_sq: sigma_sq_exact,
            });
        }

        let draw = |r: u32| -> (Option<Vec<usize>>, Option<Vec<usize>>) {
            let mut rng = replicate_rng(params.master_seed, stream_id(0, r));
            match params.mode {
                CltMode::OneSampleMu => (Some(draw_indices(self.pop_mu, n, &mut rng)), None),
                CltMode::OneSampleNu => (None, Some(draw_indices(self.pop_nu, n, &mut rng))),
                CltMode::TwoSample => (
                    Some(draw_indices(self.pop_mu, n, &mut rng)),
                    Some(draw_indices(self.pop_nu, m.unwrap(), &mut rng)),
                ),
            }
        };
        let values: Vec<Option<f64>> = (0..params.replicates)
            .into_par_iter()
            .map(|r| {
                let (ix, iy) = draw(r as u32);
                self.empirical_value(ix.as_deref(), iy.as_deref())
            })
            .collect::<Result<Vec<_>>>()?;
        let kept: Vec<f64> = values.iter().flatten().copied().collect();
        let excluded = params.replicates - kept.len();
        if kept.is_empty() || excluded as f64 > MAX_EXCLUDED_FRACTION * params.replicates as f64 {
            return Err(StatsError::ExperimentAborted {
                excluded,
                total: params.replicates,
            });
        }

        let center = match params.centering {
            Centering::ReplicateMean => kept.iter().sum::<f64>() / kept.len() as f64,
            Centering::PopulationValue => exact.value,
        };
        let sd = sigma_sq_exact.sqrt();
        let standardized: Vec<f64> = kept.iter().map(|v| scale * (v - center) / sd).collect();
        let ks_distance = ks_statistic(&standardized);

        let sigma_sq_plugin = match self.plugin_sigma_sq(params, m) {
            Ok(v) => v,
            Err(e) => {
                warnings.push(format!("plug-in variance unavailable: {e}"));
                None
            }
        };

        Ok(CltReport {
            mode: params.mode,
            n,
            m,
            lambda,
            standardized,
            sigma_sq_exact,
            sigma_sq_plugin,
            ks_distance,
            centering: params.centering,
            warnings,
            master_seed: params.master_seed,
            excluded,
        })
    }

    /// Re-estimate the standardization variance from replicate 0: solve on
    /// its empirical support, extend the potentials across the population
    /// support, and plug into the exact variance formulas.
    fn plugin_sigma_sq(&self, params: &CltParams, m: Option<usize>) -> Result<Option<f64>> {
        if !self.div.is_dual_regular() {
            return Ok(None);
        }
        let mut rng = replicate_rng(params.master_seed, stream_id(0, 0));
        let (idx_mu, idx_nu) = match params.mode {
            CltMode::OneSampleMu => (Some(draw_indices(self.pop_mu, params.n, &mut rng)), None),
            CltMode::OneSampleNu => (None, Some(draw_indices(self.pop_nu, params.n, &mut rng))),
            CltMode::TwoSample => (
                Some(draw_indices(self.pop_mu, params.n, &mut rng)),
                Some(draw_indices(self.pop_nu, m.unwrap(), &mut rng)),
            ),
        };
        let all_rows: Vec<usize> = (0..self.pop_mu.len()).collect();
        let all_cols: Vec<usize> = (0..self.pop_nu.len()).collect();
        let (emp_mu, rows) = match &idx_mu {
            Some(idx) => {
                let counts = counts_from_indices(self.pop_mu.len(), idx);
                self.pop_mu.from_counts(&counts)?
            }
            None => (self.pop_mu.clone(), all_rows.clone()),
        };
        let (emp_nu, cols) = match &idx_nu {
            Some(idx) => {
                let counts = counts_from_indices(self.pop_nu.len(), idx);
                self.pop_nu.from_counts(&counts)?
            }
            None => (self.pop_nu.clone(), all_cols.clone()),
        };
        let sub = self.cost.restrict(&rows, &cols);
        let sol = match self.solve_replicate(&emp_mu, &emp_nu, &sub)? {
            Some(sol) => sol,
            None => return Ok(None),
        };
        let cfg = self.solve_cfg();

        // f over the full mu support: solved where sampled, extended elsewhere.
        let mut f_hat = vec![f64::NAN; self.pop_mu.len()];
        for (k, &i) in rows.iter().enumerate() {
            f_hat[i] = sol.f[k];
        }
        for i in 0..self.pop_mu.len() {
            if f_hat[i].is_nan() {
                let full_row = self.cost.row(i);
                let row: Vec<f64> = cols.iter().map(|&j| full_row[j]).collect();
                f_hat[i] = extend_potential(&sol, Side::Mu, &emp_nu, &row, self.div, &cfg)?;
            }
        }
        let mut g_hat = vec![f64::NAN; self.pop_nu.len()];
        for (k, &j) in cols.iter().enumerate() {
            g_hat[j] = sol.g[k];
        }
        for j in 0..self.pop_nu.len() {
            if g_hat[j].is_nan() {
                let col: Vec<f64> = rows.iter().map(|&i| self.cost.at(i, j)).collect();
                g_hat[j] = extend_potential(&sol, Side::Nu, &emp_mu, &col, self.div, &cfg)?;
            }
        }

        let v = self.asymptotic_variances(&f_hat, &g_hat)?;
        Ok(Some(match params.mode {
            CltMode::OneSampleMu => v.sigma1_sq,
            CltMode::OneSampleNu => v.sigma2_sq,
            CltMode::TwoSample => {
                let mf = m.unwrap() as f64;
                let lambda = mf / (params.n as f64 + mf);
                lambda * v.sigma3_sq + (1.0 - lambda) * v.sigma4_sq
            }
        }))
    }

    /// `n * Var(R_n)` for the first-order remainder
    /// `R_n = S(mu_n, nu) - int f* dmu_n + int Psi* d(mu_n x nu)`; should
    /// shrink as `n` grows.
    pub fn linearization_diagnostic(
        &self,
        n_grid: &[usize],
        replicates: usize,
        master_seed: u64,
    ) -> Result<Vec<LinearizationRow>> {
        self.check_shapes()?;
        if n_grid.is_empty() || replicates < 2 {
            return Err(StatsError::InvalidParams(
                "linearization needs a nonempty n_grid and >= 2 replicates".to_owned(),
            ));
        }
        let exact = self.exact_value_and_potentials()?;
        let (_, a, _) = self.psi_star(&exact.f, &exact.g)?;
        // per-atom contribution of the first-order functional
        let first_order: Vec<f64> = (0..self.pop_mu.len())
            .map(|i| exact.f[i] - a[i])
            .collect();

        let mut out = Vec::new();
        for (block, &n) in n_grid.iter().enumerate() {
            let remainders: Vec<Option<f64>> = (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let mut rng =
                        replicate_rng(master_seed, stream_id(block as u32, r as u32));
                    let idx = draw_indices(self.pop_mu, n, &mut rng);
                    let value = self.empirical_value(Some(&idx), None)?;
                    Ok(value.map(|v| {
                        let lin: f64 =
                            idx.iter().map(|&i| first_order[i]).sum::<f64>() / n as f64;
                        v - lin
                    }))
                })
                .collect::<Result<Vec<_>>>()?;
            let kept: Vec<f64> = remainders.iter().flatten().copied().collect();
            let excluded = replicates - kept.len();
            if kept.len() < 2 || excluded as f64 > MAX_EXCLUDED_FRACTION * replicates as f64 {
                return Err(StatsError::ExperimentAborted {
                    excluded,
                    total: replicates,
                });
            }
            let r = kept.len() as f64;
            let mean = kept.iter().sum::<f64>() / r;
            let var = kept.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / r;
            out.push(LinearizationRow {
                n,
                n_var_remainder: n as f64 * var,
            });
        }
        Ok(out)
    }
}

/// OLS slope and its standard error for points `(x_k, y_k)`.
fn ols_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean_x: f64 = xs.iter().sum::<f64>() / k;
    let mean_y: f64 = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let dof = (xs.len().saturating_sub(2)).max(1) as f64;
    (slope, (rss / dof / sxx).sqrt())
}

/// Standard normal CDF by a rational tail approximation (absolute error
/// below `1e-7`).
pub fn standard_normal_cdf(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - standard_normal_cdf(-x);
    }
    const P: f64 = 0.2316419;
    const B: [f64; 5] = [
        0.319381530,
        -0.356563782,
        1.781477937,
        -1.821255978,
        1.330274429,
    ];
    let t = 1.0 / (1.0 + P * x);
    let poly = t * (B[0] + t * (B[1] + t * (B[2] + t * (B[3] + t * B[4]))));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    1.0 - pdf * poly
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `values` and the standard normal, evaluated exactly at the order
/// statistics.
pub fn ks_statistic(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "ks_statistic needs at least one value");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in sorted.iter().enumerate() {
        let cdf = standard_normal_cdf(v);
        d = d.max(((i + 1) as f64 / n - cdf).abs());
        d = d.max((i as f64 / n - cdf).abs());
    }
    d
}
