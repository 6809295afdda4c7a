//! Fixtures shared by the benchmarks.

use ising_pairs::{ExperimentConfig, LatticePoint, PairwisePotential, SiteSet};

/// Random graph on the 7x7 box with the default experiment settings.
pub fn demo_graph() -> PairwisePotential {
    ExperimentConfig {
        master_seed: 20_240_604,
        ..ExperimentConfig::default()
    }
    .fixed_potential()
    .expect("default config builds a graph")
}

/// Nearest-neighbour model on a `side x side` square.
pub fn square(side: i32, coupling: f64) -> PairwisePotential {
    let points = (0..side)
        .flat_map(|x| (0..side).map(move |y| LatticePoint::new(vec![x, y])))
        .collect();
    PairwisePotential::nearest_neighbor(SiteSet::new(points).unwrap(), coupling).unwrap()
}
