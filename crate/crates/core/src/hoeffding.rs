//! ANOVA-style decomposition of a kernel on a product of two finite
//! probability spaces.
//!
//! A kernel `k(x, y)` splits as `k = k0 + k1(x) + k2(y) + k3(x, y)` with
//!
//! ```text
//!   k0   = E[k],
//!   k1_i = E[k | X = x_i] - k0,
//!   k2_j = E[k | Y = y_j] - k0,
//!   k3   = the remainder,
//! ```
//!
//! expectations under `mu (x) nu`. The four parts are centered and pairwise
//! orthogonal in L2(mu (x) nu), so for additive `h(x, y) = h_f(x) + h_g(y)`
//! the inner product `<h, k>` only sees `k0 + k1 + k2`, which yields the
//! projection bound
//!
//! ```text
//!   <h, k>^2 <= |h|^2 ( |E_nu k|^2_{L2(mu)} + |E_mu k|^2_{L2(nu)} ).
//! ```
//!
//! Everything is computed with explicit weights, so it works for arbitrary
//! (non-uniform) discrete marginals.

use thiserror::Error;

use crate::measure::DiscreteMeasure;

#[derive(Debug, Error)]
pub enum HoeffdingError {
    #[error("kernel has {got} entries, measures want {rows} x {cols}")]
    ShapeMismatch {
        got: usize,
        rows: usize,
        cols: usize,
    },
}

pub type Result<T> = std::result::Result<T, HoeffdingError>;

#[derive(Debug, Clone)]
pub struct HoeffdingParts {
    pub k0: f64,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    /// Remainder, row-major `rows x cols`.
    pub k3: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl HoeffdingParts {
    pub fn k3_at(&self, i: usize, j: usize) -> f64 {
        self.k3[i * self.cols + j]
    }

    /// `k0 + k1_i + k2_j + k3_ij`; reconstructs the kernel exactly up to
    /// floating-point roundoff.
    pub fn reconstruct(&self, i: usize, j: usize) -> f64 {
        self.k0 + self.k1[i] + self.k2[j] + self.k3_at(i, j)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

fn check_kernel(k: &[f64], mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(usize, usize)> {
    let (rows, cols) = (mu.len(), nu.len());
    if k.len() != rows * cols {
        return Err(HoeffdingError::ShapeMismatch {
            got: k.len(),
            rows,
            cols,
        });
    }
    Ok((rows, cols))
}

/// Decompose a row-major kernel against the product `mu (x) nu`.
pub fn decompose(k: &[f64], mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<HoeffdingParts> {
    let (rows, cols) = check_kernel(k, mu, nu)?;
    let mut row_mean = vec![0.0f64; rows];
    let mut col_mean = vec![0.0f64; cols];
    let mut k0 = 0.0f64;
    for i in 0..rows {
        for j in 0..cols {
            let v = k[i * cols + j];
            row_mean[i] += nu.weight(j) * v;
            col_mean[j] += mu.weight(i) * v;
        }
        k0 += mu.weight(i) * row_mean[i];
    }
    let k1: Vec<f64> = row_mean.iter().map(|m| m - k0).collect();
    let k2: Vec<f64> = col_mean.iter().map(|m| m - k0).collect();
    let mut k3 = vec![0.0f64; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            k3[i * cols + j] = k[i * cols + j] - k0 - k1[i] - k2[j];
        }
    }
    Ok(HoeffdingParts {
        k0,
        k1,
        k2,
        k3,
        rows,
        cols,
    })
}

/// Both sides of the projection bound for an additive test function
/// `h = h_f (+) h_g`: returns `(lhs, rhs)` with
/// `lhs = <h, k>^2` and
/// `rhs = |h|^2 (|E_nu k|^2_{L2(mu)} + |E_mu k|^2_{L2(nu)})`.
pub fn projection_inequality_check(
    h_f: &[f64],
    h_g: &[f64],
    k: &[f64],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(f64, f64)> {
    let (rows, cols) = check_kernel(k, mu, nu)?;
    assert_eq!(h_f.len(), rows);
    assert_eq!(h_g.len(), cols);
    let mut inner = 0.0f64;
    let mut h_norm_sq = 0.0f64;
    let mut row_mean = vec![0.0f64; rows];
    let mut col_mean = vec![0.0f64; cols];
    for i in 0..rows {
        for j in 0..cols {
            let w = mu.weight(i) * nu.weight(j);
            let h = h_f[i] + h_g[j];
            let v = k[i * cols + j];
            inner += w * h * v;
            h_norm_sq += w * h * h;
            row_mean[i] += nu.weight(j) * v;
            col_mean[j] += mu.weight(i) * v;
        }
    }
    let cond_norms: f64 = (0..rows)
        .map(|i| mu.weight(i) * row_mean[i] * row_mean[i])
        .sum::<f64>()
        + (0..cols)
            .map(|j| nu.weight(j) * col_mean[j] * col_mean[j])
            .sum::<f64>();
    Ok((inner * inner, h_norm_sq * cond_norms))
}
