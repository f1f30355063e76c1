//! Acceptance gate: one test per numbered criterion, each printing a
//! single PASS/FAIL line with the measured quantities. Oracles used here
//! (log-domain fixed point, primal grid search, direct summation) are
//! implemented in this file, independent of the library's solve path.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every
//! line on success.

use std::sync::OnceLock;
use std::time::Instant;

use dotlab_core::solver::ipf_coupling;
use dotlab_core::stats::{
    Centering, CltMode, CltParams, CltReport, RateParams, RateReport, StatsProblem,
};
use dotlab_core::{
    build_cost, io, marginal_residuals, oscillation, random_instance, recover_plan,
    replicate_rng, solve, solve_scaled, weak_duality_gap, CostKind, CostMatrix,
    DiscreteMeasure, Divergence, SolveConfig,
};
use rand::Rng;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err(format!($($arg)+));
        }
    };
}

fn finish(num: &str, name: &str, outcome: Result<String, String>) {
    match outcome {
        Ok(detail) => println!("criterion {num} {name}: PASS ({detail})"),
        Err(detail) => {
            println!("criterion {num} {name}: FAIL ({detail})");
            panic!("criterion {num} {name}: {detail}");
        }
    }
}

// ---------------------------------------------------------------- fixtures

/// Uniform two-point instance on {0, 1} with |x - y| cost.
fn instance_a() -> (DiscreteMeasure, DiscreteMeasure, CostMatrix) {
    let mu = DiscreteMeasure::uniform_grid(1, 2, 0.0, 1.0).unwrap();
    let nu = mu.clone();
    let cost = build_cost(&mu, &nu, CostKind::Euclidean).unwrap();
    (mu, nu, cost)
}

/// Asymmetric instance: mu = (0.3, 0.7) on {0, 1}, nu uniform on
/// {0, 0.5, 1}, |x - y| cost. Nondegenerate asymptotic variances.
fn instance_b() -> (DiscreteMeasure, DiscreteMeasure, CostMatrix) {
    let mu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.3, 0.7]).unwrap();
    let nu = DiscreteMeasure::uniform_grid(1, 3, 0.0, 1.0).unwrap();
    let cost = build_cost(&mu, &nu, CostKind::Euclidean).unwrap();
    (mu, nu, cost)
}

/// Five-atom uniform grids on [0, 1] for the rate experiments.
fn grid5() -> (DiscreteMeasure, DiscreteMeasure, CostMatrix) {
    let mu = DiscreteMeasure::uniform_grid(1, 5, 0.0, 1.0).unwrap();
    let nu = mu.clone();
    let cost = build_cost(&mu, &nu, CostKind::Euclidean).unwrap();
    (mu, nu, cost)
}

// ---------------------------------------------------------------- oracles

/// Independent entropic fixed-point oracle in the log domain; uses only
/// weights, costs, exp and logsumexp.
fn sinkhorn_log_value(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostMatrix) -> f64 {
    let (n, m) = (mu.len(), nu.len());
    let lse = |terms: &mut dyn Iterator<Item = f64>| -> f64 {
        let collected: Vec<f64> = terms.collect();
        let max = collected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + collected.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    };
    let mut f = vec![0.0f64; n];
    let mut g = vec![0.0f64; m];
    for _ in 0..100_000 {
        for i in 0..n {
            f[i] = 1.0
                - lse(&mut (0..m).map(|j| nu.weight(j).ln() + g[j] - cost.at(i, j)));
        }
        for j in 0..m {
            g[j] = 1.0
                - lse(&mut (0..n).map(|i| mu.weight(i).ln() + f[i] - cost.at(i, j)));
        }
        // independent residual: both marginal families of the density
        let mut worst = 0.0f64;
        for i in 0..n {
            let s: f64 = (0..m)
                .map(|j| nu.weight(j) * (f[i] + g[j] - cost.at(i, j) - 1.0).exp())
                .sum();
            worst = worst.max((s - 1.0).abs());
        }
        for j in 0..m {
            let s: f64 = (0..n)
                .map(|i| mu.weight(i) * (f[i] + g[j] - cost.at(i, j) - 1.0).exp())
                .sum();
            worst = worst.max((s - 1.0).abs());
        }
        if worst <= 1e-13 {
            break;
        }
    }
    let mut value = 0.0;
    for i in 0..n {
        value += mu.weight(i) * f[i];
    }
    for j in 0..m {
        value += nu.weight(j) * g[j];
    }
    for i in 0..n {
        for j in 0..m {
            value -= mu.weight(i) * nu.weight(j) * (f[i] + g[j] - cost.at(i, j) - 1.0).exp();
        }
    }
    value
}

/// Primal grid search over the one-parameter coupling family of the
/// symmetric two-point instance: pi = [[a, 1/2 - a], [1/2 - a, a]].
fn primal_family_minimum(phi: impl Fn(f64) -> f64) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..=50_000u32 {
        let a = f64::from(k) * 1e-5;
        let transport = 1.0 - 2.0 * a;
        let penalty = 0.5 * (phi(4.0 * a) + phi(4.0 * (0.5 - a)));
        best = best.min(transport + penalty);
    }
    best
}

// ------------------------------------------------------- shared experiments

const RATE_SEED: u64 = 20_260_814;
const CLT_SEED: u64 = 31_001;

fn rate_params() -> RateParams {
    RateParams {
        n_grid: vec![50, 100, 200, 400, 800, 1600],
        replicates: 200,
        master_seed: RATE_SEED,
    }
}

fn run_rate(div: &Divergence) -> RateReport {
    let (mu, nu, cost) = grid5();
    let problem = StatsProblem {
        pop_mu: &mu,
        pop_nu: &nu,
        cost: &cost,
        div,
        epsilon: 1.0,
    };
    problem.rate_experiment(&rate_params()).expect("rate experiment failed")
}

fn rate_entropic() -> &'static RateReport {
    static REPORT: OnceLock<RateReport> = OnceLock::new();
    REPORT.get_or_init(|| run_rate(&Divergence::entropic()))
}

fn rate_quadratic() -> &'static RateReport {
    static REPORT: OnceLock<RateReport> = OnceLock::new();
    REPORT.get_or_init(|| run_rate(&Divergence::power(2.0).unwrap()))
}

fn clt_one_sample_params() -> CltParams {
    CltParams {
        mode: CltMode::OneSampleMu,
        n: 1000,
        m: None,
        replicates: 1000,
        centering: Centering::ReplicateMean,
        master_seed: CLT_SEED,
    }
}

fn run_clt(params: &CltParams) -> CltReport {
    let (mu, nu, cost) = instance_b();
    let div = Divergence::entropic();
    let problem = StatsProblem {
        pop_mu: &mu,
        pop_nu: &nu,
        cost: &cost,
        div: &div,
        epsilon: 1.0,
    };
    problem.clt_experiment(params).expect("clt experiment failed")
}

fn clt_one_sample() -> &'static CltReport {
    static REPORT: OnceLock<CltReport> = OnceLock::new();
    REPORT.get_or_init(|| run_clt(&clt_one_sample_params()))
}

// ---------------------------------------------------------------- criteria

#[test]
fn criterion_01_closed_forms() {
    finish("01", "closed_forms", (|| {
        let started = Instant::now();
        let (mu, nu, cost) = instance_a();
        let cfg = SolveConfig::default();

        let entropic = Divergence::entropic();
        let sol = solve(&mu, &nu, &cost, &entropic, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            (sol.dual_value - 0.37989).abs() <= 1e-5,
            "entropic value {} is not 0.37989 +- 1e-5",
            sol.dual_value
        );
        let plan = recover_plan(&sol, &mu, &nu, &cost, &entropic);
        let expected = [[0.36553, 0.13447], [0.13447, 0.36553]];
        for i in 0..2 {
            for j in 0..2 {
                ensure!(
                    (plan.mass(i, j) - expected[i][j]).abs() <= 1e-4,
                    "entropic plan[{i}][{j}] = {} wants {} +- 1e-4",
                    plan.mass(i, j),
                    expected[i][j]
                );
            }
        }

        let quadratic = Divergence::power(2.0).unwrap();
        let sol_q = solve(&mu, &nu, &cost, &quadratic, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            (sol_q.dual_value - 0.4375).abs() <= 1e-8,
            "quadratic value {} is not 0.4375 +- 1e-8",
            sol_q.dual_value
        );
        for (j, gj) in sol_q.g.iter().enumerate() {
            ensure!(
                (gj - 2.5).abs() <= 1e-8,
                "quadratic g[{j}] = {gj} wants 2.5 +- 1e-8"
            );
        }

        // cross-check 1: independent log-domain fixed point
        let oracle = sinkhorn_log_value(&mu, &nu, &cost);
        ensure!(
            (oracle - sol.dual_value).abs() <= 1e-7,
            "fixed-point oracle {oracle} vs solve {}",
            sol.dual_value
        );
        // cross-check 2: primal search over the one-parameter family
        let primal_e = primal_family_minimum(|x| if x == 0.0 { 0.0 } else { x * x.ln() });
        ensure!(
            (primal_e - sol.dual_value).abs() <= 1e-5,
            "entropic primal family min {primal_e} vs dual {}",
            sol.dual_value
        );
        let primal_q = primal_family_minimum(|x| x * x - 1.0);
        ensure!(
            (primal_q - sol_q.dual_value).abs() <= 1e-8,
            "quadratic primal family min {primal_q} vs dual {}",
            sol_q.dual_value
        );

        let elapsed = started.elapsed();
        ensure!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
        Ok(format!(
            "S_entropic={:.10}, S_quadratic={}, oracle gap {:.1e}, {elapsed:?}",
            sol.dual_value,
            sol_q.dual_value,
            (oracle - sol.dual_value).abs()
        ))
    })());
}

#[test]
fn criterion_02_entropic_oracle_equivalence() {
    finish("02", "entropic_oracle_equivalence", (|| {
        let started = Instant::now();
        let mut rng = replicate_rng(0xACC2, 0);
        let div = Divergence::entropic();
        let cfg = SolveConfig::default();
        let mut worst = 0.0f64;
        for k in 0..50 {
            let atoms = |n: usize| (0..n).map(|i| vec![i as f64]).collect::<Vec<_>>();
            let mu = DiscreteMeasure::new(atoms(10), vec![0.1; 10]).unwrap();
            let nu = DiscreteMeasure::new(atoms(10), vec![0.1; 10]).unwrap();
            let values: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
            let cost = CostMatrix::from_table(values, 10, 10).unwrap();
            let sol = solve(&mu, &nu, &cost, &div, &cfg)
                .map_err(|e| format!("instance {k}: {e}"))?;
            let oracle = sinkhorn_log_value(&mu, &nu, &cost);
            worst = worst.max((sol.dual_value - oracle).abs());
        }
        ensure!(worst <= 1e-7, "worst value disagreement {worst:e} > 1e-7");
        let elapsed = started.elapsed();
        ensure!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30 s");
        Ok(format!("worst disagreement {worst:.2e} over 50 instances, {elapsed:?}"))
    })());
}

#[test]
fn criterion_03_optimality_certificates() {
    finish("03", "optimality_certificates", (|| {
        let mut rng = replicate_rng(0xACC3, 0);
        let mut max_residual = 0.0f64;
        let mut max_gap = 0.0f64;
        for k in 0..30 {
            let (mu, nu, cost) = random_instance(&mut rng, 8);
            let div = if k % 2 == 0 {
                Divergence::entropic()
            } else {
                Divergence::power(2.0).unwrap()
            };
            let epsilon = [1.0, 0.5, 2.0][k % 3];
            let cfg = SolveConfig {
                epsilon,
                ..SolveConfig::default()
            };
            let sol = solve_scaled(&mu, &nu, &cost, &div, &cfg)
                .map_err(|e| format!("instance {k}: {e}"))?;
            let (rx, ry) = marginal_residuals(&sol.f, &sol.g, &mu, &nu, &cost, &div, epsilon);
            for r in rx.iter().chain(&ry) {
                max_residual = max_residual.max(r.abs());
            }
            let plan = recover_plan(&sol, &mu, &nu, &cost, &div);
            let gap = weak_duality_gap(&sol, &plan, &mu, &nu, &cost, &div)
                .map_err(|e| format!("instance {k} gap: {e}"))?;
            max_gap = max_gap.max(gap.abs());
        }
        ensure!(max_residual <= 1e-9, "max marginal residual {max_residual:e} > 1e-9");
        ensure!(max_gap <= 1e-7, "max duality gap {max_gap:e} > 1e-7");
        Ok(format!(
            "max residual {max_residual:.2e}, max gap {max_gap:.2e} over 30 solves"
        ))
    })());
}

#[test]
fn criterion_04_lemma_level_invariants() {
    finish("04", "lemma_level_invariants", (|| {
        let mut rng = replicate_rng(0xACC4, 0);
        let cfg = SolveConfig::default();
        let mut worst_osc_slack = f64::NEG_INFINITY;
        let mut worst_norm_slack = f64::NEG_INFINITY;
        let mut min_duality_slack = f64::INFINITY;
        for k in 0..200 {
            let (mu, nu, cost) = random_instance(&mut rng, 8);
            let div = if k % 2 == 0 {
                Divergence::entropic()
            } else {
                Divergence::power(2.0).unwrap()
            };
            let sol = solve(&mu, &nu, &cost, &div, &cfg)
                .map_err(|e| format!("instance {k}: {e}"))?;
            let sup = cost.sup_norm();
            worst_osc_slack = worst_osc_slack
                .max(oscillation(&sol.f) - 2.0 * sup)
                .max(oscillation(&sol.g) - 2.0 * sup);
            let inv1 = div.psi_prime_inverse(1.0).map_err(|e| e.to_string())?;
            let g_norm = sol.g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            worst_norm_slack = worst_norm_slack.max(g_norm - (inv1.abs() + 5.0 * sup));
            for p in 0..10 {
                let seed: Vec<f64> = (0..mu.len() * nu.len())
                    .map(|_| 0.05 + rng.random::<f64>())
                    .collect();
                let plan = ipf_coupling(&seed, &mu, &nu, 500, 1e-13)
                    .map_err(|e| format!("instance {k} plan {p}: {e}"))?;
                let gap = weak_duality_gap(&sol, &plan, &mu, &nu, &cost, &div)
                    .map_err(|e| format!("instance {k} plan {p}: {e}"))?;
                min_duality_slack = min_duality_slack.min(gap);
            }
        }
        ensure!(
            worst_osc_slack <= 1e-8,
            "oscillation bound violated by {worst_osc_slack:e}"
        );
        ensure!(
            worst_norm_slack <= 1e-6,
            "uniform potential bound violated by {worst_norm_slack:e}"
        );
        ensure!(
            min_duality_slack >= -1e-10,
            "weak duality violated: slack {min_duality_slack:e}"
        );
        Ok(format!(
            "200 instances: osc slack {worst_osc_slack:.1e}, norm slack \
             {worst_norm_slack:.1e}, min primal-dual slack {min_duality_slack:.2e} \
             over 2000 plans"
        ))
    })());
}

#[test]
fn criterion_05_epsilon_scaling() {
    finish("05", "epsilon_scaling", (|| {
        let mut rng = replicate_rng(0xACC5, 0);
        let cfg = SolveConfig::default();
        let mut max_value_err = 0.0f64;
        let mut max_plan_err = 0.0f64;
        for k in 0..50 {
            let (mu, nu, cost) = random_instance(&mut rng, 8);
            let div = if k % 2 == 0 {
                Divergence::entropic()
            } else {
                Divergence::power(2.0).unwrap()
            };
            for &eps in &[0.1, 0.5, 2.0] {
                let scaled_cfg = SolveConfig {
                    epsilon: eps,
                    ..SolveConfig::default()
                };
                let direct = solve_scaled(&mu, &nu, &cost, &div, &scaled_cfg)
                    .map_err(|e| format!("instance {k} eps {eps}: {e}"))?;
                // independent unit-level solve of the rescaled instance
                let unit_cost =
                    CostMatrix::from_table(
                        cost.values().iter().map(|c| c / eps).collect(),
                        mu.len(),
                        nu.len(),
                    )
                    .unwrap();
                let unit = solve(&mu, &nu, &unit_cost, &div, &cfg)
                    .map_err(|e| format!("instance {k} eps {eps} unit: {e}"))?;
                max_value_err =
                    max_value_err.max((direct.dual_value - eps * unit.dual_value).abs());
                let p_direct = recover_plan(&direct, &mu, &nu, &cost, &div);
                let p_unit = recover_plan(&unit, &mu, &nu, &unit_cost, &div);
                for i in 0..mu.len() {
                    for j in 0..nu.len() {
                        max_plan_err = max_plan_err
                            .max((p_direct.mass(i, j) - p_unit.mass(i, j)).abs());
                    }
                }
            }
        }
        ensure!(max_value_err <= 1e-10, "value scaling error {max_value_err:e} > 1e-10");
        ensure!(max_plan_err <= 1e-8, "plan agreement error {max_plan_err:e} > 1e-8");
        Ok(format!(
            "50 instances x eps {{0.1, 0.5, 2}}: value err {max_value_err:.2e}, \
             plan err {max_plan_err:.2e}"
        ))
    })());
}

#[test]
fn criterion_06_sample_complexity_rate() {
    finish("06", "sample_complexity_rate", (|| {
        let started = Instant::now();
        let entropic = rate_entropic();
        let quadratic = rate_quadratic();
        for (name, report) in [("entropic", entropic), ("quadratic", quadratic)] {
            let slope = report
                .fitted_slope
                .ok_or_else(|| format!("{name}: degenerate zero-error report"))?;
            ensure!(
                (-0.65..=-0.35).contains(&slope),
                "{name} slope {slope} outside [-0.65, -0.35]"
            );
            ensure!(
                report.excluded == 0,
                "{name}: {} replicates excluded",
                report.excluded
            );
        }
        let elapsed = started.elapsed();
        ensure!(elapsed.as_secs_f64() < 600.0, "took {elapsed:?}, budget 10 min");
        Ok(format!(
            "entropic slope {:.4} (se {:.4}), quadratic slope {:.4} (se {:.4}), {elapsed:?}",
            entropic.fitted_slope.unwrap(),
            entropic.slope_stderr.unwrap(),
            quadratic.fitted_slope.unwrap(),
            quadratic.slope_stderr.unwrap()
        ))
    })());
}

#[test]
fn criterion_07_bias_sign_and_variance_bound() {
    finish("07", "bias_sign_and_variance_bound", (|| {
        let mut detail = String::new();
        for (name, report) in [("entropic", rate_entropic()), ("quadratic", rate_quadratic())] {
            for (k, &n) in report.n_grid.iter().enumerate() {
                ensure!(
                    report.bias[k] >= -2.0 * report.stderr[k],
                    "{name} n={n}: bias {} below -2 stderr {}",
                    report.bias[k],
                    report.stderr[k]
                );
            }
            let n_var: Vec<f64> = report
                .n_grid
                .iter()
                .zip(&report.variance)
                .map(|(&n, &v)| n as f64 * v)
                .collect();
            let max = n_var.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = n_var.iter().copied().fold(f64::INFINITY, f64::min);
            ensure!(
                max <= 3.0 * min,
                "{name}: n*Var spread [{min:.3e}, {max:.3e}] exceeds factor 3"
            );
            detail.push_str(&format!("{name} n*Var ratio {:.2}; ", max / min));
        }
        Ok(format!("{detail}bias >= -2se at all 12 grid points"))
    })());
}

#[test]
fn criterion_08_efron_stein() {
    finish("08", "efron_stein", (|| {
        let (mu, nu, cost) = instance_a();
        let div = Divergence::entropic();
        let problem = StatsProblem {
            pop_mu: &mu,
            pop_nu: &nu,
            cost: &cost,
            div: &div,
            epsilon: 1.0,
        };
        let es = problem
            .efron_stein_check(100, 500, 0xE5)
            .map_err(|e| e.to_string())?;
        ensure!(
            es.empirical_var <= 1.25 * es.es_bound_estimate,
            "Var {:.3e} exceeds 1.25 x bound {:.3e}",
            es.empirical_var,
            es.es_bound_estimate
        );
        Ok(format!(
            "Var {:.3e} <= 1.25 x {:.3e} over {} trials",
            es.empirical_var, es.es_bound_estimate, es.trials
        ))
    })());
}

#[test]
fn criterion_09_hoeffding_suite() {
    finish("09", "hoeffding_suite", (|| {
        let started = Instant::now();
        let mut rng = replicate_rng(0xACC9, 0);
        let mut max_recon = 0.0f64;
        let mut max_center = 0.0f64;
        let mut max_ortho = 0.0f64;
        let mut violations = 0usize;
        for _ in 0..1000 {
            let (mu, nu, _) = random_instance(&mut rng, 8);
            let (n, m) = (mu.len(), nu.len());
            let kernel: Vec<f64> =
                (0..n * m).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let parts = dotlab_core::decompose(&kernel, &mu, &nu).map_err(|e| e.to_string())?;
            for i in 0..n {
                for j in 0..m {
                    let back = parts.k0 + parts.k1[i] + parts.k2[j] + parts.k3_at(i, j);
                    max_recon = max_recon.max((back - kernel[i * m + j]).abs());
                }
            }
            let e1: f64 = (0..n).map(|i| mu.weight(i) * parts.k1[i]).sum();
            let e2: f64 = (0..m).map(|j| nu.weight(j) * parts.k2[j]).sum();
            max_center = max_center.max(e1.abs()).max(e2.abs());
            // pairwise orthogonality under the product measure
            let mut ip_12 = 0.0;
            let mut ip_13 = 0.0;
            let mut ip_23 = 0.0;
            for i in 0..n {
                for j in 0..m {
                    let w = mu.weight(i) * nu.weight(j);
                    ip_12 += w * parts.k1[i] * parts.k2[j];
                    ip_13 += w * parts.k1[i] * parts.k3_at(i, j);
                    ip_23 += w * parts.k2[j] * parts.k3_at(i, j);
                }
            }
            max_ortho = max_ortho.max(ip_12.abs()).max(ip_13.abs()).max(ip_23.abs());
            let h_f: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let h_g: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let (lhs, rhs) =
                dotlab_core::projection_inequality_check(&h_f, &h_g, &kernel, &mu, &nu)
                    .map_err(|e| e.to_string())?;
            if lhs > rhs + 1e-10 {
                violations += 1;
            }
        }
        ensure!(max_recon <= 1e-10, "reconstruction error {max_recon:e} > 1e-10");
        ensure!(max_center <= 1e-10, "centering error {max_center:e} > 1e-10");
        ensure!(max_ortho <= 1e-10, "orthogonality error {max_ortho:e} > 1e-10");
        ensure!(violations == 0, "{violations} projection inequality violations");
        let elapsed = started.elapsed();
        ensure!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
        Ok(format!(
            "1000 draws: recon {max_recon:.1e}, center {max_center:.1e}, \
             ortho {max_ortho:.1e}, 0 violations, {elapsed:?}"
        ))
    })());
}

#[test]
fn criterion_10_one_sample_clt() {
    finish("10", "one_sample_clt", (|| {
        let started = Instant::now();
        // direct-sum oracle for sigma1^2, naive loops only
        let (mu, nu, cost) = instance_b();
        let div = Divergence::entropic();
        let problem = StatsProblem {
            pop_mu: &mu,
            pop_nu: &nu,
            cost: &cost,
            div: &div,
            epsilon: 1.0,
        };
        let exact = problem.exact_value_and_potentials().map_err(|e| e.to_string())?;
        let mut a = vec![0.0f64; mu.len()];
        for i in 0..mu.len() {
            for j in 0..nu.len() {
                a[i] += nu.weight(j) * (exact.f[i] + exact.g[j] - cost.at(i, j) - 1.0).exp();
            }
        }
        let mean: f64 = (0..mu.len())
            .map(|i| mu.weight(i) * (exact.f[i] - a[i]))
            .sum();
        let sigma1_direct: f64 = (0..mu.len())
            .map(|i| {
                let d = exact.f[i] - a[i] - mean;
                mu.weight(i) * d * d
            })
            .sum();
        ensure!(sigma1_direct > 1e-6, "direct-sum sigma1^2 {sigma1_direct:e} is degenerate");

        let report = clt_one_sample();
        ensure!(
            (report.sigma_sq_exact - sigma1_direct).abs() <= 1e-10,
            "library sigma1^2 {} vs direct sum {sigma1_direct}",
            report.sigma_sq_exact
        );
        ensure!(
            report.ks_distance <= 0.06,
            "KS distance {} > 0.06",
            report.ks_distance
        );
        let elapsed = started.elapsed();
        ensure!(elapsed.as_secs_f64() < 600.0, "took {elapsed:?}, budget 10 min");
        Ok(format!(
            "sigma1^2 {:.6e} (direct sum agrees), KS {:.4}, plugin {:?}, {elapsed:?}",
            report.sigma_sq_exact, report.ks_distance, report.sigma_sq_plugin
        ))
    })());
}

#[test]
fn criterion_11_two_sample_clt() {
    finish("11", "two_sample_clt", (|| {
        let report = run_clt(&CltParams {
            mode: CltMode::TwoSample,
            n: 1000,
            m: Some(1000),
            replicates: 1000,
            centering: Centering::ReplicateMean,
            master_seed: CLT_SEED + 1,
        });
        ensure!(report.lambda == Some(0.5), "lambda {:?} wants 0.5", report.lambda);
        ensure!(
            report.ks_distance <= 0.06,
            "KS distance {} > 0.06",
            report.ks_distance
        );
        Ok(format!(
            "KS {:.4} with sigma3^2/sigma4^2 mix {:.6e}",
            report.ks_distance, report.sigma_sq_exact
        ))
    })());
}

#[test]
fn criterion_12_population_value_centering() {
    finish("12", "population_value_centering", (|| {
        let report = run_clt(&CltParams {
            centering: Centering::PopulationValue,
            master_seed: CLT_SEED + 2,
            ..clt_one_sample_params()
        });
        ensure!(
            report.ks_distance <= 0.08,
            "KS distance {} > 0.08",
            report.ks_distance
        );
        Ok(format!("KS {:.4} centered at the exact value", report.ks_distance))
    })());
}

#[test]
fn criterion_13_linearization() {
    finish("13", "linearization", (|| {
        let (mu, nu, cost) = instance_b();
        let div = Divergence::entropic();
        let problem = StatsProblem {
            pop_mu: &mu,
            pop_nu: &nu,
            cost: &cost,
            div: &div,
            epsilon: 1.0,
        };
        let rows = problem
            .linearization_diagnostic(&[100, 400, 1600], 400, 31_013)
            .map_err(|e| e.to_string())?;
        for w in rows.windows(2) {
            ensure!(
                w[1].n_var_remainder < w[0].n_var_remainder,
                "n*Var(R_n) not decreasing: {:?}",
                rows.iter().map(|r| r.n_var_remainder).collect::<Vec<_>>()
            );
        }
        Ok(format!(
            "n*Var(R_n) = {:?} over n = {:?}",
            rows.iter().map(|r| r.n_var_remainder).collect::<Vec<_>>(),
            rows.iter().map(|r| r.n).collect::<Vec<_>>()
        ))
    })());
}

#[test]
fn criterion_14_determinism() {
    finish("14", "determinism", (|| {
        let first_rate = io::render_rate_report_csv(rate_entropic());
        let rerun_rate = io::render_rate_report_csv(&run_rate(&Divergence::entropic()));
        ensure!(
            first_rate == rerun_rate,
            "rate report bytes differ across reruns with seed {RATE_SEED}"
        );
        let first_clt = io::render_clt_report_csv(clt_one_sample());
        let rerun_clt = io::render_clt_report_csv(&run_clt(&clt_one_sample_params()));
        ensure!(
            first_clt == rerun_clt,
            "clt report bytes differ across reruns with seed {CLT_SEED}"
        );
        Ok(format!(
            "rate CSV ({} bytes) and clt CSV ({} bytes) byte-identical on rerun",
            first_rate.len(),
            first_clt.len()
        ))
    })());
}
