//! Shared instance builders for the criterion benches.

use dotlab_core::{build_cost, replicate_rng, CostKind, CostMatrix, DiscreteMeasure};
use rand::Rng;

/// One-dimensional grid populations of exactly `side` atoms per side with
/// random (seeded) weights, Euclidean cost.
pub fn weighted_grid(side: usize, seed: u64) -> (DiscreteMeasure, DiscreteMeasure, CostMatrix) {
    let mut rng = replicate_rng(seed, 0);
    let mut measure = || {
        let atoms: Vec<Vec<f64>> = (0..side)
            .map(|k| vec![k as f64 / (side - 1).max(1) as f64])
            .collect();
        let raw: Vec<f64> = (0..side).map(|_| 0.2 + rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        DiscreteMeasure::new(atoms, raw.iter().map(|w| w / total).collect()).unwrap()
    };
    let mu = measure();
    let nu = measure();
    let cost = build_cost(&mu, &nu, CostKind::Euclidean).unwrap();
    (mu, nu, cost)
}
