#![allow(dead_code)]

use burger_core::graph::SocialGraph;
use burger_core::ingest::{
    generate_synthetic, split_dataset, Dataset, SplitConfig, SyntheticData, SyntheticSpec,
};
use burger_core::trainer::TrainRunConfig;

/// Two-community planted fixture with 30% injected noise edges.
pub fn planted(seed: u64) -> (SyntheticData, Dataset) {
    let data = generate_synthetic(&SyntheticSpec {
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let dataset = split_dataset(
        &data.interactions,
        &data.social,
        SplitConfig {
            seed,
            ..SplitConfig::default()
        },
    )
    .unwrap();
    (data, dataset)
}

/// Small, fast model for the fixtures.
pub fn fixture_config(seed: u64) -> TrainRunConfig {
    TrainRunConfig {
        dim: 32,
        batch_size: 128,
        learning_rate: 0.01,
        epochs_per_iteration: 5,
        max_iterations: 4,
        seed,
        ..TrainRunConfig::default()
    }
}

/// Share of the arcs of `edges` (both directions of each pair) present in `graph`.
pub fn survival(graph: &SocialGraph, edges: &[(usize, usize)]) -> f64 {
    if edges.is_empty() {
        return 0.0;
    }
    let hits: usize = edges
        .iter()
        .map(|&(a, b)| usize::from(graph.contains(a, b)) + usize::from(graph.contains(b, a)))
        .sum();
    hits as f64 / (2 * edges.len()) as f64
}
