//! Dataset loading, per-user train/test splitting with leave-one-out
//! positives, social-noise injection, and planted-community fixtures.

mod load;
mod noise;
mod split;

pub use load::{
    load_interactions, load_social, load_social_for_users, IdMap, LoadedInteractions, LoadedSocial,
};
pub use noise::{
    generate_synthetic, inject_social_noise, NoiseLabels, SyntheticData, SyntheticSpec,
};
pub use split::{split_dataset, Dataset, NegativeSampling, SplitConfig};
