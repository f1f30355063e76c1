//! Built-in invariant suite over randomized instances.
//!
//! Each check solves (or decomposes) a stream of small random instances
//! and verifies one structural property of the machinery: marginal
//! residual certificates, duality gaps, potential bounds, plan scaling
//! across regularization levels, monotone dual ascent, and the kernel
//! decomposition identities. The CLI `check` command prints one line per
//! entry and exits nonzero if any fails.

use rand::Rng;

use crate::divergence::Divergence;
use crate::hoeffding::{decompose, projection_inequality_check};
use crate::measure::{build_cost, CostKind, CostMatrix, DiscreteMeasure};
use crate::rng::replicate_rng;
use crate::solver::{
    dual_objective, ipf_coupling, marginal_residuals, oscillation, recover_plan, solve,
    solve_scaled, weak_duality_gap, SolveConfig,
};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub fn suite_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

/// Random instance with 2..=max_side atoms per side, dimension 1..=3,
/// coordinates in [-1, 1], weights bounded away from zero, Euclidean cost.
pub fn random_instance(
    rng: &mut impl Rng,
    max_side: usize,
) -> (DiscreteMeasure, DiscreteMeasure, CostMatrix) {
    let dim = rng.random_range(1..=3);
    let side = |rng: &mut dyn FnMut() -> f64| {
        let n = 2 + (rng() * (max_side - 1) as f64) as usize;
        let atoms: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng() * 2.0 - 1.0).collect())
            .collect();
        let weights: Vec<f64> = (0..n).map(|_| 0.1 + 0.9 * rng()).collect();
        let total: f64 = weights.iter().sum();
        DiscreteMeasure::new(atoms, weights.iter().map(|w| w / total).collect()).unwrap()
    };
    let mut draw = || rng.random::<f64>();
    let mu = side(&mut draw);
    let nu = side(&mut draw);
    let cost = build_cost(&mu, &nu, CostKind::Euclidean).unwrap();
    (mu, nu, cost)
}

fn divergence_for(k: usize) -> Divergence {
    if k % 2 == 0 {
        Divergence::entropic()
    } else {
        Divergence::power(2.0).unwrap()
    }
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_owned(),
        passed,
        detail,
    }
}

/// Run every invariant check; deterministic in the seed.
pub fn run_invariant_suite(master_seed: u64) -> Vec<CheckResult> {
    let cfg = SolveConfig::default();
    let mut results = Vec::new();

    // Converged solutions: residual certificate, duality gap at the
    // optimum, oscillation and uniform potential bounds.
    {
        let mut rng = replicate_rng(master_seed, 0);
        let mut max_residual = 0.0f64;
        let mut max_gap = f64::NEG_INFINITY;
        let mut worst_osc_slack = f64::NEG_INFINITY;
        let mut worst_norm_slack = f64::NEG_INFINITY;
        let mut failures = Vec::new();
        for k in 0..20 {
            let (mu, nu, cost) = random_instance(&mut rng, 8);
            let div = divergence_for(k);
            let sol = match solve(&mu, &nu, &cost, &div, &cfg) {
                Ok(s) => s,
                Err(e) => {
                    failures.push(format!("instance {k}: {e}"));
                    continue;
                }
            };
            let (rx, ry) = marginal_residuals(&sol.f, &sol.g, &mu, &nu, &cost, &div, 1.0);
            for r in rx.iter().chain(&ry) {
                max_residual = max_residual.max(r.abs());
            }
            let plan = recover_plan(&sol, &mu, &nu, &cost, &div);
            match weak_duality_gap(&sol, &plan, &mu, &nu, &cost, &div) {
                Ok(gap) => max_gap = max_gap.max(gap),
                Err(e) => failures.push(format!("instance {k} gap: {e}")),
            }
            let sup = cost.sup_norm();
            worst_osc_slack = worst_osc_slack
                .max(oscillation(&sol.f) - 2.0 * sup)
                .max(oscillation(&sol.g) - 2.0 * sup);
            let inv1 = div.psi_prime_inverse(1.0).unwrap();
            let g_norm = sol.g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            worst_norm_slack = worst_norm_slack.max(g_norm - (inv1.abs() + 5.0 * sup));
        }
        results.push(check(
            "marginal_residuals",
            failures.is_empty() && max_residual <= cfg.tol_marginal,
            format!("max residual {max_residual:.3e} (tol {:.0e}) {failures:?}", cfg.tol_marginal),
        ));
        results.push(check(
            "duality_gap_at_optimum",
            failures.is_empty() && max_gap.abs() <= 1e-7,
            format!("max |gap| {:.3e} (tol 1e-7)", max_gap.abs()),
        ));
        results.push(check(
            "oscillation_bound",
            worst_osc_slack <= 1e-8,
            format!("worst osc(pot) - 2*sup|c| = {worst_osc_slack:.3e} (slack 1e-8)"),
        ));
        results.push(check(
            "uniform_bound",
            worst_norm_slack <= 1e-6,
            format!("worst |g| - (|inv1| + 5*sup|c|) = {worst_norm_slack:.3e} (slack 1e-6)"),
        ));
    }

    // Weak duality against independent feasible plans built by iterative
    // proportional fitting of random positive matrices.
    {
        let mut rng = replicate_rng(master_seed, 1);
        let mut min_slack = f64::INFINITY;
        let mut failures = Vec::new();
        for k in 0..10 {
            let (mu, nu, cost) = random_instance(&mut rng, 8);
            let div = divergence_for(k);
            let sol = match solve(&mu, &nu, &cost, &div, &cfg) {
                Ok(s) => s,
                Err(e) => {
                    failures.push(format!("instance {k}: {e}"));
                    continue;
                }
            };
            for _ in 0..3 {
                let seed_matrix: Vec<f64> = (0..mu.len() * nu.len())
                    .map(|_| 0.05 + rng.random::<f64>())
                    .collect();
                let gap = ipf_coupling(&seed_matrix, &mu, &nu, 500, 1e-13)
                    .and_then(|plan| weak_duality_gap(&sol, &plan, &mu, &nu, &cost, &div));
                match gap {
                    Ok(gap) => min_slack = min_slack.min(gap),
                    Err(e) => failures.push(format!("instance {k} plan: {e}")),
                }
            }
        }
        results.push(check(
            "weak_duality_random_plans",
            failures.is_empty() && min_slack >= -1e-10,
            format!("min primal-dual slack {min_slack:.3e} (floor -1e-10) {failures:?}"),
        ));
    }

    // Regularization scaling: the scaled solve agrees with a unit-level
    // solve of the scaled cost in value, plan, and residual certificate.
    {
        let mut rng = replicate_rng(master_seed, 2);
        let mut max_value_err = 0.0f64;
        let mut max_plan_err = 0.0f64;
        let mut max_obj_err = 0.0f64;
        let mut failures = Vec::new();
        for k in 0..10 {
            let (mu, nu, cost) = random_instance(&mut rng, 6);
            let div = divergence_for(k);
            for &eps in &[0.1, 0.5, 2.0] {
                let scaled_cfg = SolveConfig { epsilon: eps, ..cfg.clone() };
                let direct = solve_scaled(&mu, &nu, &cost, &div, &scaled_cfg);
                let unit = solve(&mu, &nu, &cost.scaled(1.0 / eps), &div, &cfg);
                let (direct, unit) = match (direct, unit) {
                    (Ok(a), Ok(b)) => (a, b),
                    (a, b) => {
                        failures.push(format!(
                            "instance {k} eps {eps}: {:?} / {:?}",
                            a.err().map(|e| e.to_string()),
                            b.err().map(|e| e.to_string())
                        ));
                        continue;
                    }
                };
                max_value_err =
                    max_value_err.max((direct.dual_value - eps * unit.dual_value).abs());
                let p_direct = recover_plan(&direct, &mu, &nu, &cost, &div);
                let p_unit = recover_plan(&unit, &mu, &nu, &cost.scaled(1.0 / eps), &div);
                for i in 0..mu.len() {
                    for j in 0..nu.len() {
                        max_plan_err =
                            max_plan_err.max((p_direct.mass(i, j) - p_unit.mass(i, j)).abs());
                    }
                }
                // the scaled potentials solve the scaled dual: objective
                // recomputed from scratch matches the reported value
                match dual_objective(&direct.f, &direct.g, &mu, &nu, &cost, &div, eps) {
                    Ok(obj) => max_obj_err = max_obj_err.max((obj - direct.dual_value).abs()),
                    Err(e) => failures.push(format!("instance {k} eps {eps} obj: {e}")),
                }
            }
        }
        results.push(check(
            "epsilon_scaling",
            failures.is_empty()
                && max_value_err <= 1e-10
                && max_plan_err <= 1e-8
                && max_obj_err <= 1e-10,
            format!(
                "value err {max_value_err:.3e} (tol 1e-10), plan err {max_plan_err:.3e} \
                 (tol 1e-8), objective err {max_obj_err:.3e} (tol 1e-10) {failures:?}"
            ),
        ));
    }

    // Dual objective never decreases across sweeps.
    {
        let mut rng = replicate_rng(master_seed, 3);
        let trace_cfg = SolveConfig {
            record_dual_trace: true,
            ..cfg.clone()
        };
        let mut worst_drop = 0.0f64;
        let mut failures = Vec::new();
        for k in 0..10 {
            let (mu, nu, cost) = random_instance(&mut rng, 8);
            let div = divergence_for(k);
            match solve(&mu, &nu, &cost, &div, &trace_cfg) {
                Ok(sol) => {
                    for w in sol.dual_trace.windows(2) {
                        worst_drop = worst_drop.max(w[0] - w[1]);
                    }
                }
                Err(e) => failures.push(format!("instance {k}: {e}")),
            }
        }
        results.push(check(
            "monotone_dual_ascent",
            failures.is_empty() && worst_drop <= 1e-12,
            format!("worst per-sweep drop {worst_drop:.3e} (slack 1e-12) {failures:?}"),
        ));
    }

    // Kernel decomposition: exact reconstruction, centered parts, and the
    // projection inequality for additive competitors.
    {
        let mut rng = replicate_rng(master_seed, 4);
        let mut max_recon = 0.0f64;
        let mut max_center = 0.0f64;
        let mut worst_projection = f64::NEG_INFINITY;
        for _ in 0..20 {
            let (mu, nu, _) = random_instance(&mut rng, 8);
            let (n, m) = (mu.len(), nu.len());
            let kernel: Vec<f64> = (0..n * m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let parts = decompose(&kernel, &mu, &nu).unwrap();
            for i in 0..n {
                for j in 0..m {
                    let back = parts.k0
                        + parts.k1[i]
                        + parts.k2[j]
                        + parts.k3_at(i, j);
                    max_recon = max_recon.max((back - kernel[i * m + j]).abs());
                }
            }
            let e1: f64 = (0..n).map(|i| mu.weight(i) * parts.k1[i]).sum();
            let e2: f64 = (0..m).map(|j| nu.weight(j) * parts.k2[j]).sum();
            max_center = max_center.max(e1.abs()).max(e2.abs());
            for j in 0..m {
                let col: f64 = (0..n).map(|i| mu.weight(i) * parts.k3_at(i, j)).sum();
                max_center = max_center.max(col.abs());
            }
            for i in 0..n {
                let row: f64 = (0..m).map(|j| nu.weight(j) * parts.k3_at(i, j)).sum();
                max_center = max_center.max(row.abs());
            }
            let h_f: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let h_g: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let (lhs, rhs) = projection_inequality_check(&h_f, &h_g, &kernel, &mu, &nu).unwrap();
            worst_projection = worst_projection.max(lhs - rhs);
        }
        results.push(check(
            "hoeffding_decomposition",
            max_recon <= 1e-12 && max_center <= 1e-10 && worst_projection <= 1e-10,
            format!(
                "reconstruction err {max_recon:.3e} (tol 1e-12), centering err \
                 {max_center:.3e} (tol 1e-10), projection excess {worst_projection:.3e} \
                 (slack 1e-10)"
            ),
        ));
    }

    results
}
