mod common;

use burger_core::graph::SocialTensor;
use burger_core::ingest::{generate_synthetic, split_dataset, Dataset, SplitConfig, SyntheticSpec};
use burger_core::trainer::{self, initial_tensor, TrainRunConfig, TrainSession};
use burger_core::Error;

/// 40 users, 60 items, two communities.
fn toy() -> Dataset {
    let data = generate_synthetic(&SyntheticSpec {
        num_users: 40,
        num_items: 60,
        interaction_intra: 0.2,
        social_intra: 0.2,
        noise_ratio: 0.0,
        seed: 4,
        ..SyntheticSpec::default()
    })
    .unwrap();
    split_dataset(&data.interactions, &data.social, SplitConfig::default()).unwrap()
}

fn toy_config() -> TrainRunConfig {
    TrainRunConfig {
        dim: 64,
        batch_size: 64,
        learning_rate: 1e-3,
        ..TrainRunConfig::default()
    }
}

#[test]
fn zero_epochs_leave_the_state_alone() {
    let dataset = toy();
    let config = TrainRunConfig {
        epochs_per_iteration: 0,
        ..toy_config()
    };
    let tensor = initial_tensor(&dataset.social, &config).unwrap();
    let mut session = TrainSession::new(&dataset, config).unwrap();
    let before = session.state.clone();
    let improved = session.train_iteration(&tensor, 1).unwrap();
    assert!(!improved);
    assert_eq!(session.state, before);
    assert!(session.log.epochs.is_empty());
    assert_eq!(session.optimizer.step(), 0);
}

#[test]
fn toy_loss_falls_every_epoch() {
    let dataset = toy();
    let config = TrainRunConfig {
        epochs_per_iteration: 5,
        max_iterations: 1,
        ..toy_config()
    };
    let result = trainer::run(&dataset, &config).unwrap();
    let totals: Vec<f64> = result.log.epochs.iter().map(|e| e.loss.total).collect();
    assert_eq!(totals.len(), 5);
    assert!(totals.windows(2).all(|w| w[1] < w[0]), "{totals:?}");
}

#[test]
fn one_iteration_enhances_and_slides_once() {
    let dataset = toy();
    let config = TrainRunConfig {
        epochs_per_iteration: 1,
        max_iterations: 1,
        ..toy_config()
    };
    let result = trainer::run(&dataset, &config).unwrap();
    assert_eq!(result.enhancements.len(), 1);
    assert_eq!(result.tensor.generation(), 1);
    assert_eq!(result.tensor.newest(), &result.enhancements[0].graph);
    assert_eq!(result.log.iterations.len(), 1);
}

#[test]
fn window_holds_the_last_three_enhancements_after_four_iterations() {
    let dataset = toy();
    let config = TrainRunConfig {
        epochs_per_iteration: 1,
        max_iterations: 4,
        tau: 3,
        patience: 10,
        ..toy_config()
    };
    let result = trainer::run(&dataset, &config).unwrap();
    assert_eq!(result.enhancements.len(), 4);
    let slices: Vec<_> = result.tensor.slices().collect();
    let expected: Vec<_> = result.enhancements[1..].iter().map(|f| &f.graph).collect();
    assert_eq!(slices, expected);
}

#[test]
fn single_graph_mode_trains_on_one_unperturbed_slice() {
    let dataset = toy();
    let config = TrainRunConfig {
        use_tensor: false,
        denoise: false,
        epochs_per_iteration: 1,
        max_iterations: 2,
        ..toy_config()
    };
    let tensor = initial_tensor(&dataset.social, &config).unwrap();
    assert_eq!(
        tensor,
        SocialTensor::from_slices(vec![dataset.social.clone()], 0).unwrap()
    );
    let result = trainer::run(&dataset, &config).unwrap();
    assert_eq!(result.tensor, tensor);
    assert!(result.enhancements.is_empty());
}

#[test]
fn without_denoising_the_window_never_moves() {
    let dataset = toy();
    let config = TrainRunConfig {
        denoise: false,
        epochs_per_iteration: 1,
        max_iterations: 3,
        ..toy_config()
    };
    let result = trainer::run(&dataset, &config).unwrap();
    assert_eq!(
        result.tensor,
        initial_tensor(&dataset.social, &config).unwrap()
    );
    assert_eq!(result.log.iterations.len(), 3);
}

#[test]
fn iteration_patience_stops_the_run() {
    let dataset = toy();
    let config = TrainRunConfig {
        epochs_per_iteration: 1,
        max_iterations: 50,
        patience: 1,
        ..toy_config()
    };
    let result = trainer::run(&dataset, &config).unwrap();
    let rows = &result.log.iterations;
    assert!(rows.len() < 50);
    assert!(!rows.last().unwrap().improved);
}

#[test]
fn overflowing_embeddings_abort_with_the_batch() {
    let dataset = toy();
    let config = TrainRunConfig {
        init_std: 1e200,
        ..toy_config()
    };
    let err = trainer::run(&dataset, &config).unwrap_err();
    match err {
        Error::NonFinite { batch, .. } => assert!(!batch.expect("batch attached").is_empty()),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn wrong_window_size_is_rejected() {
    let dataset = toy();
    let config = toy_config();
    let tensor = SocialTensor::from_slices(vec![dataset.social.clone()], 0).unwrap();
    let mut session = TrainSession::new(&dataset, config).unwrap();
    assert!(session.train_iteration(&tensor, 1).is_err());
}
