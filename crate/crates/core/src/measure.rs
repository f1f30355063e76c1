//! Finitely supported probability measures and cost matrices.
//!
//! Atoms live in R^d and are stored row-major in a flat buffer. Exact
//! duplicate atoms are merged at construction (weights summed) so that
//! supports are genuine sets; zero-weight atoms are dropped so that every
//! stored atom carries mass.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Hard cap on grid sizes: `k^d` atoms at most.
pub const MAX_GRID_ATOMS: usize = 100_000;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("measure needs at least one atom with positive weight")]
    Empty,
    #[error("weight {w} at atom {index} is negative")]
    NegativeWeight { index: usize, w: f64 },
    #[error("weights sum to {sum}, outside the accepted window")]
    WeightSum { sum: f64 },
    #[error("atom {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("grid of {requested} atoms exceeds the cap of {MAX_GRID_ATOMS}")]
    SizeExceeded { requested: usize },
    #[error("cost table is {rows}x{cols}, measures want {want_rows}x{want_cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("cost entry ({i},{j}) is not finite")]
    NonFiniteCost { i: usize, j: usize },
    #[error("squared_capped cost needs a nonnegative cap, got {cap}")]
    BadCap { cap: f64 },
    #[error("sample size must be positive")]
    EmptySample,
}

pub type Result<T> = std::result::Result<T, MeasureError>;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    coords: Vec<f64>, // len * dim, row-major
    weights: Vec<f64>,
    dim: usize,
}

impl DiscreteMeasure {
    /// Build from atom coordinates and weights. Duplicates are merged,
    /// zero weights dropped, and the total mass must already be 1 within
    /// `1e-12`; use [`DiscreteMeasure::new_renormalizing`] for data whose
    /// mass drifted slightly.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        Self::build(atoms, weights, false)
    }

    /// Same as [`DiscreteMeasure::new`] but rescales the weights when their
    /// sum lands in `[0.999, 1.001]`; anything further off is rejected.
    pub fn new_renormalizing(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        Self::build(atoms, weights, true)
    }

    fn build(atoms: Vec<Vec<f64>>, mut weights: Vec<f64>, renormalize: bool) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(MeasureError::Empty);
        }
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(MeasureError::Empty);
        }
        for (index, a) in atoms.iter().enumerate() {
            if a.len() != dim {
                return Err(MeasureError::DimensionMismatch {
                    index,
                    got: a.len(),
                    expected: dim,
                });
            }
        }
        for (index, &w) in weights.iter().enumerate() {
            if w < 0.0 || !w.is_finite() {
                return Err(MeasureError::NegativeWeight { index, w });
            }
        }
        let sum: f64 = weights.iter().sum();
        if renormalize {
            if !(0.999..=1.001).contains(&sum) {
                return Err(MeasureError::WeightSum { sum });
            }
            for w in &mut weights {
                *w /= sum;
            }
        } else if (sum - 1.0).abs() > 1e-12 {
            return Err(MeasureError::WeightSum { sum });
        }

        // Merge exact duplicates, keyed on bit patterns (-0.0 folded to 0.0).
        let key = |a: &[f64]| -> Vec<u64> { a.iter().map(|&x| (x + 0.0).to_bits()).collect() };
        let mut seen: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
        let mut coords = Vec::with_capacity(atoms.len() * dim);
        let mut merged: Vec<f64> = Vec::with_capacity(atoms.len());
        for (a, w) in atoms.iter().zip(weights.iter()) {
            if *w == 0.0 {
                continue;
            }
            match seen.entry(key(a)) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    merged[*e.get()] += w;
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(merged.len());
                    merged.push(*w);
                    coords.extend_from_slice(a);
                }
            }
        }
        if merged.is_empty() {
            return Err(MeasureError::Empty);
        }
        Ok(DiscreteMeasure {
            coords,
            weights: merged,
            dim,
        })
    }

    /// Uniform product grid on a box: `k` equispaced points per axis
    /// (endpoints included; the box midpoint for `k = 1`), `k^d` atoms with
    /// equal weight.
    pub fn uniform_grid(dim: usize, k_per_axis: usize, lo: f64, hi: f64) -> Result<Self> {
        if dim == 0 || k_per_axis == 0 {
            return Err(MeasureError::Empty);
        }
        let total = match k_per_axis.checked_pow(dim as u32) {
            Some(t) if t <= MAX_GRID_ATOMS => t,
            Some(t) => return Err(MeasureError::SizeExceeded { requested: t }),
            None => {
                return Err(MeasureError::SizeExceeded {
                    requested: usize::MAX,
                })
            }
        };
        let axis: Vec<f64> = if k_per_axis == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..k_per_axis)
                .map(|i| lo + (hi - lo) * i as f64 / (k_per_axis - 1) as f64)
                .collect()
        };
        let w = 1.0 / total as f64;
        let mut coords = Vec::with_capacity(total * dim);
        let mut odometer = vec![0usize; dim];
        for _ in 0..total {
            for &digit in &odometer {
                coords.push(axis[digit]);
            }
            for d in (0..dim).rev() {
                odometer[d] += 1;
                if odometer[d] < k_per_axis {
                    break;
                }
                odometer[d] = 0;
            }
        }
        Ok(DiscreteMeasure {
            coords,
            weights: vec![w; total],
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Restriction to a subset of atom indices, weights renormalized to the
    /// empirical counts supplied alongside. Used to build empirical measures
    /// living on the population support.
    pub fn from_counts(&self, counts: &[u64]) -> Result<(DiscreteMeasure, Vec<usize>)> {
        assert_eq!(counts.len(), self.len());
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(MeasureError::EmptySample);
        }
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        let mut kept = Vec::new();
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 {
                kept.push(i);
                coords.extend_from_slice(self.atom(i));
                weights.push(c as f64 / n as f64);
            }
        }
        Ok((
            DiscreteMeasure {
                coords,
                weights,
                dim: self.dim,
            },
            kept,
        ))
    }
}

/// `n` i.i.d. atom indices by inverse-CDF on the cumulative weights.
pub fn draw_indices(pop: &DiscreteMeasure, n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut cum = Vec::with_capacity(pop.len());
    let mut acc = 0.0;
    for &w in pop.weights() {
        acc += w;
        cum.push(acc);
    }
    let last = pop.len() - 1;
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            cum.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}

pub fn counts_from_indices(pop_len: usize, indices: &[usize]) -> Vec<u64> {
    let mut counts = vec![0u64; pop_len];
    for &i in indices {
        counts[i] += 1;
    }
    counts
}

/// Multinomial empirical measure of `n` draws from `pop`, deterministic in
/// `seed`. Atoms that receive no draws are dropped.
pub fn sample_empirical(pop: &DiscreteMeasure, n: usize, seed: u64) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(MeasureError::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = draw_indices(pop, n, &mut rng);
    let counts = counts_from_indices(pop.len(), &idx);
    Ok(pop.from_counts(&counts)?.0)
}

/// Analytic cost families evaluable at arbitrary points (tables are not).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostKind {
    /// `|x - y|_2`
    Euclidean,
    /// `min(|x - y|_2^2, cap)`
    SquaredCapped { cap: f64 },
}

impl CostKind {
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        match self {
            CostKind::Euclidean => sq.sqrt(),
            CostKind::SquaredCapped { cap } => sq.min(*cap),
        }
    }

    /// Row `c(x, y_j)` against every atom of `m`.
    pub fn row(&self, x: &[f64], m: &DiscreteMeasure) -> Result<Vec<f64>> {
        if x.len() != m.dim() {
            return Err(MeasureError::DimensionMismatch {
                index: 0,
                got: x.len(),
                expected: m.dim(),
            });
        }
        Ok((0..m.len()).map(|j| self.value(x, m.atom(j))).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    values: Vec<f64>, // rows * cols, row-major
    rows: usize,
    cols: usize,
    sup_norm: f64,
    lipschitz: Option<f64>,
}

impl CostMatrix {
    /// Wrap an explicit table. No Lipschitz information is attached.
    pub fn from_table(values: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if values.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(MeasureError::ShapeMismatch {
                rows,
                cols,
                want_rows: if cols == 0 { 0 } else { values.len() / cols },
                want_cols: cols,
            });
        }
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(MeasureError::NonFiniteCost {
                    i: k / cols,
                    j: k % cols,
                });
            }
        }
        let sup_norm = values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        Ok(CostMatrix {
            values,
            rows,
            cols,
            sup_norm,
            lipschitz: None,
        })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Max absolute entry; computed once at construction, exact.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    /// Submatrix on the given row/column index sets.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> CostMatrix {
        let mut values = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                values.push(self.at(i, j));
            }
        }
        let sup_norm = values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        CostMatrix {
            values,
            rows: rows.len(),
            cols: cols.len(),
            sup_norm,
            lipschitz: self.lipschitz,
        }
    }

    /// Entrywise scaling (used to reduce a regularization level to 1).
    pub(crate) fn scaled(&self, factor: f64) -> CostMatrix {
        CostMatrix {
            values: self.values.iter().map(|v| v * factor).collect(),
            rows: self.rows,
            cols: self.cols,
            sup_norm: self.sup_norm * factor.abs(),
            lipschitz: self.lipschitz.map(|l| l * factor.abs()),
        }
    }
}

/// Evaluate an analytic cost family on the product of two supports.
pub fn build_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure, kind: CostKind) -> Result<CostMatrix> {
    if mu.dim() != nu.dim() {
        return Err(MeasureError::DimensionMismatch {
            index: 0,
            got: nu.dim(),
            expected: mu.dim(),
        });
    }
    if let CostKind::SquaredCapped { cap } = kind {
        if !(cap >= 0.0) {
            return Err(MeasureError::BadCap { cap });
        }
    }
    let (rows, cols) = (mu.len(), nu.len());
    let mut values = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            values.push(kind.value(mu.atom(i), nu.atom(j)));
        }
    }
    let sup_norm = values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let lipschitz = match kind {
        CostKind::Euclidean => Some(1.0),
        CostKind::SquaredCapped { cap } => Some(2.0 * cap.sqrt()),
    };
    Ok(CostMatrix {
        values,
        rows,
        cols,
        sup_norm,
        lipschitz,
    })
}
