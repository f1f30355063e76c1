//! Dual solver for divergence-regularized transport.
//!
//! For measures `mu`, `nu`, cost `c` and regularization level 1, the dual
//! problem is
//!
//! ```text
//!   sup_{f,g}  sum_i mu_i f_i + sum_j nu_j g_j
//!              - sum_{ij} mu_i nu_j psi(f_i + g_j - c_ij)
//! ```
//!
//! and the optimal coupling has density `psi'(f + g - c)` against
//! `mu (x) nu`. Optimality is equivalent to the marginal conditions
//!
//! ```text
//!   sum_j nu_j psi'(f_i + g_j - c_ij) = 1   for every i,
//!   sum_i mu_i psi'(f_i + g_j - c_ij) = 1   for every j.
//! ```
//!
//! The solver is cyclic coordinate ascent: each potential entry is moved to
//! the exact root of its marginal condition (safeguarded Newton inside a
//! sign-changing bracket, bisection fallback), which maximizes the concave
//! one-dimensional section, so the dual value never decreases. For the
//! entropic divergence the row update has the closed Sinkhorn form and the
//! Newton iteration simply lands on it.
//!
//! Potentials carry the usual additive gauge; we pin it by re-centering so
//! that `sum_i mu_i f_i = 0` after every sweep.
//!
//! Other regularization levels reduce to level 1 by scaling: solving with
//! cost `c / eps` and multiplying the potentials and the value by `eps`
//! gives the level-`eps` solution, and the coupling is unchanged.

use thiserror::Error;

use crate::divergence::{Divergence, DivergenceError};
use crate::measure::{CostMatrix, DiscreteMeasure};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("no convergence after {iterations} sweeps: max marginal residual {max_residual:e}")]
    NotConverged {
        solution: Box<DualSolution>,
        iterations: usize,
        max_residual: f64,
    },
    #[error("root bracketing failed: {context}")]
    RootBracketFailure { context: String },
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error("divergence {name:?} has no phi; primal evaluation unavailable")]
    PhiUnavailable { name: String },
    #[error("plan is not feasible: max marginal violation {max_violation:e}")]
    InfeasiblePlan { max_violation: f64 },
    #[error("divergence {name:?} is not dual regular; potential extension undefined")]
    NotDualRegular { name: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cost is {got_rows}x{got_cols}, measures want {want_rows}x{want_cols}")]
    ShapeMismatch {
        got_rows: usize,
        got_cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
}

pub type Result<T> = std::result::Result<T, SolverError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub epsilon: f64,
    /// Convergence is declared on the sup norm of the marginal residuals.
    pub tol_marginal: f64,
    /// Root tolerance for the one-dimensional coordinate solves.
    pub tol_newton: f64,
    pub max_sweeps: usize,
    pub newton_max_iter: usize,
    /// Record the dual value after every sweep (costs one objective
    /// evaluation per sweep).
    pub record_dual_trace: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            epsilon: 1.0,
            tol_marginal: 1e-9,
            tol_newton: 1e-12,
            max_sweeps: 10_000,
            newton_max_iter: 50,
            record_dual_trace: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.tol_marginal > 0.0
            && self.tol_newton > 0.0
            && self.max_sweeps > 0
            && self.newton_max_iter > 0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// Dual potentials with convergence diagnostics. `epsilon` records the
/// regularization level the potentials belong to; plan recovery and gap
/// computations use it to undo the cost scaling.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub dual_value: f64,
    pub residual_x: Vec<f64>,
    pub residual_y: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub epsilon: f64,
    /// Dual value after each sweep when requested, empty otherwise.
    pub dual_trace: Vec<f64>,
}

impl DualSolution {
    pub fn max_residual(&self) -> f64 {
        self.residual_x
            .iter()
            .chain(&self.residual_y)
            .fold(0.0f64, |m, r| m.max(r.abs()))
    }
}

/// Coupling with its density against the product measure.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pi: Vec<f64>,
    density: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl TransportPlan {
    /// Wrap an explicit coupling matrix; densities are derived.
    pub fn from_matrix(
        pi: Vec<f64>,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
    ) -> Result<TransportPlan> {
        let (rows, cols) = (mu.len(), nu.len());
        if pi.len() != rows * cols {
            return Err(SolverError::ShapeMismatch {
                got_rows: if cols == 0 { 0 } else { pi.len() / cols },
                got_cols: cols,
                want_rows: rows,
                want_cols: cols,
            });
        }
        let mut density = Vec::with_capacity(pi.len());
        for i in 0..rows {
            for j in 0..cols {
                density.push(pi[i * cols + j] / (mu.weight(i) * nu.weight(j)));
            }
        }
        Ok(TransportPlan {
            pi,
            density,
            rows,
            cols,
        })
    }

    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.pi[i * self.cols + j]
    }

    pub fn density(&self, i: usize, j: usize) -> f64 {
        self.density[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn total_mass(&self) -> f64 {
        self.pi.iter().sum()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.pi[i * self.cols..(i + 1) * self.cols].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.mass(i, j)).sum()
    }

    /// Sup-norm violation of the marginal constraints.
    pub fn marginal_violation(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let mut v = 0.0f64;
        for i in 0..self.rows {
            v = v.max((self.row_sum(i) - mu.weight(i)).abs());
        }
        for j in 0..self.cols {
            v = v.max((self.col_sum(j) - nu.weight(j)).abs());
        }
        v
    }
}

pub fn oscillation(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

fn check_shapes(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostMatrix) -> Result<()> {
    if cost.rows() != mu.len() || cost.cols() != nu.len() {
        return Err(SolverError::ShapeMismatch {
            got_rows: cost.rows(),
            got_cols: cost.cols(),
            want_rows: mu.len(),
            want_cols: nu.len(),
        });
    }
    Ok(())
}

/// Dual objective at level `epsilon`:
/// `<f,mu> + <g,nu> - eps * sum mu_i nu_j psi((f_i + g_j - c_ij)/eps)`.
pub fn dual_objective(
    f: &[f64],
    g: &[f64],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    div: &Divergence,
    epsilon: f64,
) -> Result<f64> {
    check_shapes(mu, nu, cost)?;
    let mut value = 0.0;
    for (i, &fi) in f.iter().enumerate() {
        value += mu.weight(i) * fi;
    }
    for (j, &gj) in g.iter().enumerate() {
        value += nu.weight(j) * gj;
    }
    let mut penalty = 0.0;
    for i in 0..mu.len() {
        let row = cost.row(i);
        let mut acc = 0.0;
        for j in 0..nu.len() {
            acc += nu.weight(j) * div.psi((f[i] + g[j] - row[j]) / epsilon)?;
        }
        penalty += mu.weight(i) * acc;
    }
    Ok(value - epsilon * penalty)
}

/// Primal objective at level `epsilon`:
/// `sum pi_ij c_ij + eps * sum mu_i nu_j phi(density_ij)`.
pub fn primal_objective(
    plan: &TransportPlan,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    div: &Divergence,
    epsilon: f64,
) -> Result<f64> {
    check_shapes(mu, nu, cost)?;
    if !div.has_phi() {
        return Err(SolverError::PhiUnavailable {
            name: div.name().to_owned(),
        });
    }
    let mut transport = 0.0;
    let mut penalty = 0.0;
    for i in 0..plan.rows() {
        for j in 0..plan.cols() {
            transport += plan.mass(i, j) * cost.at(i, j);
            penalty += mu.weight(i) * nu.weight(j) * div.phi(plan.density(i, j)).unwrap();
        }
    }
    Ok(transport + epsilon * penalty)
}

/// Marginal residuals of the level-`epsilon` optimality conditions.
pub fn marginal_residuals(
    f: &[f64],
    g: &[f64],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    div: &Divergence,
    epsilon: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = (mu.len(), nu.len());
    let mut rx = vec![0.0; n];
    let mut ry = vec![0.0; m];
    for i in 0..n {
        let row = cost.row(i);
        let mut acc = 0.0;
        for j in 0..m {
            let d = div.psi_prime((f[i] + g[j] - row[j]) / epsilon);
            acc += nu.weight(j) * d;
            ry[j] += mu.weight(i) * d;
        }
        rx[i] = acc - 1.0;
    }
    for r in &mut ry {
        *r -= 1.0;
    }
    (rx, ry)
}

/// Coupling induced by dual potentials:
/// `pi_ij = mu_i nu_j psi'((f_i + g_j - c_ij)/eps)`.
pub fn recover_plan(
    sol: &DualSolution,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    div: &Divergence,
) -> TransportPlan {
    let (rows, cols) = (mu.len(), nu.len());
    let mut pi = Vec::with_capacity(rows * cols);
    let mut density = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let row = cost.row(i);
        for j in 0..cols {
            let d = div.psi_prime((sol.f[i] + sol.g[j] - row[j]) / sol.epsilon);
            density.push(d);
            pi.push(mu.weight(i) * nu.weight(j) * d);
        }
    }
    TransportPlan {
        pi,
        density,
        rows,
        cols,
    }
}

/// Monotone scalar root solve: Newton safeguarded by a sign-changing
/// bracket, bisection when the slope is missing or the step leaves the
/// bracket. `eval` must be nondecreasing.
fn monotone_root(
    eval: &dyn Fn(f64) -> f64,
    slope: &dyn Fn(f64) -> Option<f64>,
    start: f64,
    halfwidth: f64,
    tol_f: f64,
    max_iter: usize,
) -> Result<f64> {
    debug_assert!(halfwidth > 0.0);
    let mut lo = start - halfwidth;
    let mut hi = start + halfwidth;
    let mut step = halfwidth;
    let mut rounds = 0usize;
    while eval(lo) > 0.0 {
        step *= 2.0;
        lo -= step;
        rounds += 1;
        if rounds > 64 {
            return Err(SolverError::RootBracketFailure {
                context: format!("no sign change below start {start}"),
            });
        }
    }
    step = halfwidth;
    rounds = 0;
    loop {
        let v = eval(hi);
        if v >= 0.0 {
            break;
        }
        if v.is_nan() {
            return Err(SolverError::RootBracketFailure {
                context: format!("objective is NaN at {hi}"),
            });
        }
        step *= 2.0;
        hi += step;
        rounds += 1;
        if rounds > 64 {
            return Err(SolverError::RootBracketFailure {
                context: format!("no sign change above start {start}"),
            });
        }
    }

    let mut x = start.clamp(lo, hi);
    for _ in 0..max_iter {
        let fx = eval(x);
        if fx.is_nan() {
            return Err(SolverError::RootBracketFailure {
                context: format!("objective is NaN at {x}"),
            });
        }
        if fx.is_finite() && fx.abs() <= tol_f {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = match slope(x) {
            Some(d) if d.is_finite() && d > 0.0 && fx.is_finite() => {
                let cand = x - fx / d;
                (cand > lo && cand < hi).then_some(cand)
            }
            _ => None,
        };
        x = newton.unwrap_or(0.5 * (lo + hi));
        if hi - lo <= f64::EPSILON * (1.0 + x.abs()) {
            return Ok(x);
        }
    }
    Ok(x) // residual check at the sweep level decides whether this is enough
}

/// Solve the level-1 dual problem. `cfg.epsilon` must be 1; use
/// [`solve_scaled`] for other levels.
pub fn solve(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    div: &Divergence,
    cfg: &SolveConfig,
) -> Result<DualSolution> {
    if cfg.epsilon != 1.0 {
        return Err(SolverError::InvalidConfig(format!(
            "solve() is the level-1 entry point, got epsilon = {}; use solve_scaled",
            cfg.epsilon
        )));
    }
    solve_unit(mu, nu, cost, div, cfg)
}

/// Solve at an arbitrary regularization level by cost scaling.
pub fn solve_scaled(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    div: &Divergence,
    cfg: &SolveConfig,
) -> Result<DualSolution> {
    cfg.validate()?;
    let eps = cfg.epsilon;
    if eps == 1.0 {
        return solve_unit(mu, nu, cost, div, cfg);
    }
    let scaled = cost.scaled(1.0 / eps);
    let rescale = |mut sol: Box<DualSolution>| -> Box<DualSolution> {
        for v in sol.f.iter_mut().chain(sol.g.iter_mut()) {
            *v *= eps;
        }
        sol.dual_value *= eps;
        for v in sol.dual_trace.iter_mut() {
            *v *= eps;
        }
        sol.epsilon = eps;
        sol
    };
    match solve_unit(mu, nu, &scaled, div, cfg) {
        Ok(sol) => Ok(*rescale(Box::new(sol))),
        Err(SolverError::NotConverged {
            solution,
            iterations,
            max_residual,
        }) => Err(SolverError::NotConverged {
            solution: rescale(solution),
            iterations,
            max_residual,
        }),
        Err(e) => Err(e),
    }
}

fn solve_unit(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    div: &Divergence,
    cfg: &SolveConfig,
) -> Result<DualSolution> {
    cfg.validate()?;
    check_shapes(mu, nu, cost)?;
    let (n, m) = (mu.len(), nu.len());

    let inv_one = div.psi_prime_inverse(1.0)?;
    let halfwidth = 2.0 * cost.sup_norm() + inv_one.abs() + 1.0;

    let mut f = vec![0.0f64; n];
    // Start each g_j where the cheapest row would put its density at 1.
    let mut g: Vec<f64> = (0..m)
        .map(|j| {
            let min_c = (0..n).map(|i| cost.at(i, j)).fold(f64::INFINITY, f64::min);
            inv_one + min_c
        })
        .collect();

    let has_slope = div.has_psi_second();
    let mut trace = Vec::new();
    let mut iterations = 0;

    for sweep in 1..=cfg.max_sweeps {
        iterations = sweep;
        for i in 0..n {
            let row = cost.row(i);
            let eval = |s: f64| -> f64 {
                let mut acc = 0.0;
                for j in 0..m {
                    acc += nu.weight(j) * div.psi_prime(s + g[j] - row[j]);
                }
                acc - 1.0
            };
            let slope = |s: f64| -> Option<f64> {
                if !has_slope {
                    return None;
                }
                let mut acc = 0.0;
                for j in 0..m {
                    acc += nu.weight(j) * div.psi_second(s + g[j] - row[j])?;
                }
                Some(acc)
            };
            f[i] = monotone_root(
                &eval,
                &slope,
                f[i],
                halfwidth,
                cfg.tol_newton,
                cfg.newton_max_iter,
            )?;
        }
        for j in 0..m {
            let col: Vec<f64> = (0..n).map(|i| cost.at(i, j)).collect();
            let eval = |s: f64| -> f64 {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += mu.weight(i) * div.psi_prime(f[i] + s - col[i]);
                }
                acc - 1.0
            };
            let slope = |s: f64| -> Option<f64> {
                if !has_slope {
                    return None;
                }
                let mut acc = 0.0;
                for i in 0..n {
                    acc += mu.weight(i) * div.psi_second(f[i] + s - col[i])?;
                }
                Some(acc)
            };
            g[j] = monotone_root(
                &eval,
                &slope,
                g[j],
                halfwidth,
                cfg.tol_newton,
                cfg.newton_max_iter,
            )?;
        }

        // Fix the additive gauge; the objective and the residuals only see
        // f_i + g_j, so this is free.
        let shift: f64 = (0..n).map(|i| mu.weight(i) * f[i]).sum();
        for v in &mut f {
            *v -= shift;
        }
        for v in &mut g {
            *v += shift;
        }

        if cfg.record_dual_trace {
            trace.push(dual_objective(&f, &g, mu, nu, cost, div, 1.0)?);
        }

        let (rx, ry) = marginal_residuals(&f, &g, mu, nu, cost, div, 1.0);
        let max_res = rx
            .iter()
            .chain(&ry)
            .fold(0.0f64, |acc, r| acc.max(r.abs()));
        if max_res <= cfg.tol_marginal {
            let dual_value = dual_objective(&f, &g, mu, nu, cost, div, 1.0)?;
            return Ok(DualSolution {
                f,
                g,
                dual_value,
                residual_x: rx,
                residual_y: ry,
                iterations: sweep,
                converged: true,
                epsilon: 1.0,
                dual_trace: trace,
            });
        }
    }

    let (rx, ry) = marginal_residuals(&f, &g, mu, nu, cost, div, 1.0);
    let max_residual = rx
        .iter()
        .chain(&ry)
        .fold(0.0f64, |acc, r| acc.max(r.abs()));
    let dual_value = dual_objective(&f, &g, mu, nu, cost, div, 1.0)?;
    Err(SolverError::NotConverged {
        solution: Box::new(DualSolution {
            f,
            g,
            dual_value,
            residual_x: rx,
            residual_y: ry,
            iterations,
            converged: false,
            epsilon: 1.0,
            dual_trace: trace,
        }),
        iterations,
        max_residual,
    })
}

/// Which side of the product space a new point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Mu,
    Nu,
}

/// Extend a converged potential to a point outside the solved support by
/// solving its marginal condition against the opposite potential:
/// for `side = Mu`, find `s` with
/// `sum_j nu_j psi'((s + g_j - c(x, y_j))/eps) = 1`.
///
/// Requires a dual regular divergence; otherwise the extension need not be
/// well defined (flat stretches of `psi'` make the root non-unique).
/// `cost_row` holds `c(x, y_j)` for every atom of `opposite`.
pub fn extend_potential(
    sol: &DualSolution,
    side: Side,
    opposite: &DiscreteMeasure,
    cost_row: &[f64],
    div: &Divergence,
    cfg: &SolveConfig,
) -> Result<f64> {
    if !div.is_dual_regular() {
        return Err(SolverError::NotDualRegular {
            name: div.name().to_owned(),
        });
    }
    let pot = match side {
        Side::Mu => &sol.g,
        Side::Nu => &sol.f,
    };
    if cost_row.len() != opposite.len() || pot.len() != opposite.len() {
        return Err(SolverError::ShapeMismatch {
            got_rows: cost_row.len(),
            got_cols: pot.len(),
            want_rows: opposite.len(),
            want_cols: opposite.len(),
        });
    }
    let eps = sol.epsilon;
    let inv_one = div.psi_prime_inverse(1.0)?;
    let c_max = cost_row.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let p_max = pot.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let halfwidth = eps * inv_one.abs() + 2.0 * c_max + p_max + 1.0;
    let has_slope = div.has_psi_second();
    let eval = |s: f64| -> f64 {
        let mut acc = 0.0;
        for j in 0..opposite.len() {
            acc += opposite.weight(j) * div.psi_prime((s + pot[j] - cost_row[j]) / eps);
        }
        acc - 1.0
    };
    let slope = |s: f64| -> Option<f64> {
        if !has_slope {
            return None;
        }
        let mut acc = 0.0;
        for j in 0..opposite.len() {
            acc += opposite.weight(j) * div.psi_second((s + pot[j] - cost_row[j]) / eps)?;
        }
        Some(acc / eps)
    };
    monotone_root(
        &eval,
        &slope,
        0.0,
        halfwidth,
        cfg.tol_newton,
        cfg.newton_max_iter,
    )
}

/// Primal-minus-dual gap of a feasible plan against a dual solution, at the
/// solution's regularization level. Weak duality makes this nonnegative for
/// every feasible plan; at the recovered optimal plan it collapses to the
/// solver tolerance.
pub fn weak_duality_gap(
    sol: &DualSolution,
    plan: &TransportPlan,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    div: &Divergence,
) -> Result<f64> {
    let violation = plan.marginal_violation(mu, nu);
    if violation > 1e-9 {
        return Err(SolverError::InfeasiblePlan {
            max_violation: violation,
        });
    }
    let primal = primal_objective(plan, mu, nu, cost, div, sol.epsilon)?;
    let dual = dual_objective(&sol.f, &sol.g, mu, nu, cost, div, sol.epsilon)?;
    Ok(primal - dual)
}

/// Project a positive matrix onto the coupling polytope by iterative
/// proportional fitting (alternate row/column scaling). Produces the
/// feasible plans used in weak-duality checks.
pub fn ipf_coupling(
    seed_matrix: &[f64],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    max_iter: usize,
    tol: f64,
) -> Result<TransportPlan> {
    let (n, m) = (mu.len(), nu.len());
    if seed_matrix.len() != n * m || seed_matrix.iter().any(|&v| !(v > 0.0)) {
        return Err(SolverError::InvalidConfig(
            "ipf needs a strictly positive n x m seed matrix".to_owned(),
        ));
    }
    let mut pi = seed_matrix.to_vec();
    for _ in 0..max_iter {
        for i in 0..n {
            let s: f64 = pi[i * m..(i + 1) * m].iter().sum();
            let r = mu.weight(i) / s;
            for v in &mut pi[i * m..(i + 1) * m] {
                *v *= r;
            }
        }
        for j in 0..m {
            let s: f64 = (0..n).map(|i| pi[i * m + j]).sum();
            let r = nu.weight(j) / s;
            for i in 0..n {
                pi[i * m + j] *= r;
            }
        }
        let worst = (0..n)
            .map(|i| {
                let s: f64 = pi[i * m..(i + 1) * m].iter().sum();
                (s - mu.weight(i)).abs()
            })
            .fold(0.0f64, f64::max);
        if worst <= tol {
            break;
        }
    }
    // Finish with an exact row scaling; columns stay within tol.
    for i in 0..n {
        let s: f64 = pi[i * m..(i + 1) * m].iter().sum();
        let r = mu.weight(i) / s;
        for v in &mut pi[i * m..(i + 1) * m] {
            *v *= r;
        }
    }
    TransportPlan::from_matrix(pi, mu, nu)
}
