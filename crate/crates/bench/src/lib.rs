//! Shared fixture for the benchmarks.

use burger_core::graph::{symmetric_normalize, NormalizedAdjacency, SocialTensor};
use burger_core::ingest::{generate_synthetic, split_dataset, Dataset, SplitConfig, SyntheticSpec};
use burger_core::propagation::EmbeddingState;
use burger_core::trainer::{initial_state, initial_tensor, normalize_tensor, TrainRunConfig};

pub struct Fixture {
    pub dataset: Dataset,
    pub config: TrainRunConfig,
    pub state: EmbeddingState,
    pub tensor: SocialTensor,
    pub adjacency: NormalizedAdjacency,
    pub slices: Vec<NormalizedAdjacency>,
}

/// Planted-community data with `users` users and twice as many items.
pub fn fixture(users: usize, dim: usize) -> Fixture {
    let data = generate_synthetic(&SyntheticSpec {
        num_users: users,
        num_items: 2 * users,
        num_communities: 4,
        interaction_intra: 0.05,
        social_intra: 0.05,
        ..SyntheticSpec::default()
    })
    .expect("synthetic data");
    let dataset =
        split_dataset(&data.interactions, &data.social, SplitConfig::default()).expect("split");
    let config = TrainRunConfig {
        dim,
        ..TrainRunConfig::default()
    };
    let state = initial_state(&dataset, &config).expect("state");
    let tensor = initial_tensor(&dataset.social, &config).expect("tensor");
    let adjacency = symmetric_normalize(&dataset.train);
    let slices = normalize_tensor(&tensor);
    Fixture {
        dataset,
        config,
        state,
        tensor,
        adjacency,
        slices,
    }
}
