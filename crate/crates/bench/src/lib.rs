//! Shared inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dspace::model::SphereBenchmark;
use dspace::sampling::{sobol, Bounds};

/// `n` uniform random points in the unit cube of dimension `d`.
pub fn random_cloud(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect()
}

/// Satisfied and violated Sobol points of the sphere benchmark.
pub fn sphere_split(power: u32) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = SphereBenchmark::default();
    sobol(3, &Bounds::unit(3), power)
        .expect("sobol")
        .inputs
        .into_iter()
        .partition(|p| m.is_feasible(p))
}
