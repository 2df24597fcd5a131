//! Shared inputs for the benchmarks.

use causal_pieces::dataset::yinyang_split;
use causal_pieces::rng::rng_from_seed;
use causal_pieces::{DistributionSpec, Family, Topology, WeightStack};

/// Encoded Yin Yang points.
pub fn yinyang_inputs(n: usize) -> Vec<Vec<f64>> {
    let (train, _) = yinyang_split(0, n, 0, true).expect("valid split");
    train.into_iter().map(|s| s.features).collect()
}

/// Network with the optimized normal initialization.
pub fn network(sizes: &[usize], seed: u64) -> WeightStack {
    let topology = Topology::new(sizes.to_vec()).expect("valid sizes");
    DistributionSpec::optimized(Family::Normal)
        .init_weights(&topology, &mut rng_from_seed(seed))
        .expect("valid spec")
}
