//! Property tests across modules. Random structures are built from a
//! proptest-chosen seed so shrinking still narrows down sizes and seeds.

mod common;

use burger_core::denoise::{build_enhanced_slice, posterior, PriorMode};
use burger_core::eval::{hit_ratio, ndcg, MetricReport};
use burger_core::graph::{
    random_perturb, read_social_graph, symmetric_normalize, write_social_graph, InteractionGraph,
    SocialGraph, SocialTensor,
};
use burger_core::ingest::{split_dataset, SplitConfig};
use burger_core::objective::{coordination_loss, Triplet};
use burger_core::propagation::{propagate_user_item, EmbeddingState};
use burger_core::rng::{self, Rng};
use burger_core::trainer::{adam_step, OptimizerState, ParamGradients};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng as _;

fn random_social(m: usize, density: f64, rng: &mut Rng) -> SocialGraph {
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .filter(|_| rng.random_bool(density))
        .collect();
    SocialGraph::undirected(m, pairs).unwrap()
}

fn random_interactions(m: usize, n: usize, density: f64, rng: &mut Rng) -> InteractionGraph {
    let edges: Vec<(usize, usize)> = (0..m)
        .flat_map(|u| (0..n).map(move |i| (u, i)))
        .filter(|_| rng.random_bool(density))
        .collect();
    InteractionGraph::from_edges(m, n, edges).unwrap()
}

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_keeps_tau_slices_in_append_order(tau in 1usize..5, pushes in 0usize..12, seed: u64) {
        let mut rng = rng::seeded(seed, 0);
        let base: Vec<SocialGraph> = (0..tau).map(|_| random_social(6, 0.4, &mut rng)).collect();
        let mut history = base.clone();
        let mut tensor = SocialTensor::from_slices(base, 0).unwrap();
        for _ in 0..pushes {
            let next = random_social(6, 0.4, &mut rng);
            history.push(next.clone());
            tensor = tensor.slide_window(next).unwrap();
        }
        prop_assert_eq!(tensor.tau(), tau);
        prop_assert_eq!(tensor.generation(), pushes as u64);
        let expected: Vec<&SocialGraph> = history[history.len() - tau..].iter().collect();
        prop_assert_eq!(tensor.slices().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn normalization_is_structurally_idempotent_and_symmetric(m in 2usize..15, density in 0.0f64..1.0, seed: u64) {
        let g = random_social(m, density, &mut rng::seeded(seed, 0));
        let a = symmetric_normalize(&g);
        let b = symmetric_normalize(&g);
        prop_assert_eq!(a.entries().collect::<Vec<_>>(), b.entries().collect::<Vec<_>>());
        for (u, v, w) in a.entries() {
            prop_assert!(w > 0.0);
            prop_assert_eq!(a.weight(v, u), Some(w));
        }
    }

    #[test]
    fn perturbation_is_seeded_and_keeps_invariants(m in 2usize..20, p in 0.0f64..=1.0, graph_seed: u64, seed: u64) {
        let g = random_social(m, 0.3, &mut rng::seeded(graph_seed, 0));
        let a = random_perturb(&g, p, seed).unwrap();
        prop_assert_eq!(&a, &random_perturb(&g, p, seed).unwrap());
        prop_assert!(a.is_symmetric());
        for u in 0..m {
            prop_assert!(!a.contains(u, u));
            prop_assert!(a.neighbors(u).windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn social_graphs_round_trip_through_edge_lists(m in 1usize..20, density in 0.0f64..1.0, seed: u64, directed: bool) {
        let mut rng = rng::seeded(seed, 0);
        let g = random_social(m, density, &mut rng);
        let g = if directed {
            SocialGraph::directed((0..m).map(|u| g.neighbors(u).iter().copied().filter(|_| rng.random_bool(0.5)).collect()).collect()).unwrap()
        } else {
            g
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.edges");
        write_social_graph(&path, &g).unwrap();
        prop_assert_eq!(read_social_graph(&path, m, directed).unwrap(), g);
    }

    #[test]
    fn split_is_seeded_and_partitions_each_user(m in 1usize..15, n in 2usize..20, seed: u64, split_seed: u64) {
        let mut rng = rng::seeded(seed, 0);
        let inter = random_interactions(m, n, 0.4, &mut rng);
        let social = random_social(m, 0.3, &mut rng);
        let config = SplitConfig { seed: split_seed, ..SplitConfig::default() };
        let d = split_dataset(&inter, &social, config).unwrap();
        prop_assert_eq!(&d, &split_dataset(&inter, &social, config).unwrap());
        for u in 0..m {
            let mut all: Vec<usize> = d.train.items_of(u).to_vec();
            all.extend(d.test_positive[u]);
            all.extend(&d.test_rest[u]);
            all.sort_unstable();
            prop_assert_eq!(all.as_slice(), inter.items_of(u));
            if let Some(p) = d.test_positive[u] {
                prop_assert!(!d.train.contains(u, p));
            }
            for &neg in &d.negatives[u] {
                prop_assert!(!inter.contains(u, neg));
            }
        }
    }

    #[test]
    fn user_item_propagation_is_linear(seed: u64, a in -2.0f64..2.0, b in -2.0f64..2.0, layers in 0usize..4) {
        let mut rng = rng::seeded(seed, 0);
        let adj = symmetric_normalize(&random_interactions(6, 7, 0.4, &mut rng));
        let (xu, xi, yu, yi) = (random_matrix(6, 3, &mut rng), random_matrix(7, 3, &mut rng), random_matrix(6, 3, &mut rng), random_matrix(7, 3, &mut rng));
        let x = propagate_user_item(&adj, xu.view(), xi.view(), layers).unwrap();
        let y = propagate_user_item(&adj, yu.view(), yi.view(), layers).unwrap();
        let zu = &xu * a + &yu * b;
        let zi = &xi * a + &yi * b;
        let z = propagate_user_item(&adj, zu.view(), zi.view(), layers).unwrap();
        let eu = &z.users - &(&x.users * a + &y.users * b);
        let ei = &z.items - &(&x.items * a + &y.items * b);
        prop_assert!(eu.iter().chain(ei.iter()).all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn relabeling_users_permutes_propagated_rows(seed: u64, layers in 0usize..4) {
        let mut rng = rng::seeded(seed, 0);
        let g = random_interactions(6, 5, 0.4, &mut rng);
        let mut perm: Vec<usize> = (0..6).collect();
        for i in (1..6).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let relabeled = InteractionGraph::from_edges(6, 5, g.edges().map(|(u, i)| (perm[u], i))).unwrap();
        let users = random_matrix(6, 2, &mut rng);
        let items = random_matrix(5, 2, &mut rng);
        let mut moved = users.clone();
        for u in 0..6 {
            moved.row_mut(perm[u]).assign(&users.row(u));
        }
        let a = propagate_user_item(&symmetric_normalize(&g), users.view(), items.view(), layers).unwrap();
        let b = propagate_user_item(&symmetric_normalize(&relabeled), moved.view(), items.view(), layers).unwrap();
        for u in 0..6 {
            let d = &a.users.row(u) - &b.users.row(perm[u]);
            prop_assert!(d.iter().all(|x| x.abs() < 1e-12));
        }
        prop_assert!((&a.items - &b.items).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn coordination_loss_is_zero_exactly_when_every_hinge_is_inactive(seed: u64, margin in 0.0f64..2.0) {
        let mut rng = rng::seeded(seed, 0);
        let coeff = random_matrix(5, 3, &mut rng);
        let target = random_matrix(5, 3, &mut rng) * 2.0;
        let triplets: Vec<Triplet> = (0..6)
            .map(|_| Triplet::new(rng.random_range(0..5), rng.random_range(0..5), rng.random_range(0..5)))
            .collect();
        let (loss, _) = coordination_loss(&triplets, coeff.view(), target.view(), margin);
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let any_active = triplets.iter().any(|t| {
            let c = coeff.row(t.anchor);
            let x = target.row(t.anchor);
            margin - sig(c.dot(&coeff.row(t.positive))) * x.dot(&target.row(t.positive))
                + sig(c.dot(&coeff.row(t.negative))) * x.dot(&target.row(t.negative)) > 0.0
        });
        prop_assert!(loss >= 0.0);
        prop_assert_eq!(loss == 0.0, !any_active);
    }

    #[test]
    fn posterior_is_increasing_with_a_bounded_denominator(prior in 0.001f64..0.999) {
        let mut last = f64::NEG_INFINITY;
        for k in 0..=100 {
            let f = k as f64 / 100.0;
            let pf = posterior(f, prior).unwrap();
            prop_assert!(pf > last);
            last = pf;
            prop_assert!((1.0 - f) * (1.0 - prior) + f * prior >= prior.min(1.0 - prior));
        }
    }

    #[test]
    fn enhanced_slices_keep_cardinalities_and_are_deterministic(
        m in 3usize..30,
        density in 0.05f64..0.6,
        seed: u64,
        degree_prior: bool,
        symmetrize: bool,
    ) {
        let mut rng = rng::seeded(seed, 0);
        let newest = random_social(m, density, &mut rng);
        let interest = random_matrix(m, 3, &mut rng);
        let social = random_matrix(m, 3, &mut rng);
        let prior = if degree_prior { PriorMode::Degree { eps: 0.01 } } else { PriorMode::default() };
        let a = build_enhanced_slice(interest.view(), social.view(), &newest, prior, symmetrize).unwrap();
        let b = build_enhanced_slice(interest.view(), social.view(), &newest, prior, symmetrize).unwrap();
        prop_assert_eq!(&a.graph, &b.graph);
        prop_assert_eq!(&a.users, &b.users);
        for (u, f) in a.users.iter().enumerate() {
            let unobserved = m - 1 - f.observed.len();
            prop_assert_eq!(f.potential.len(), f.observed.len().min(unobserved));
            prop_assert_eq!(f.fused.len(), f.observed.len());
            prop_assert!(f.potential.iter().all(|v| *v != u && !f.observed.contains(v)));
            prop_assert!(f.fused.iter().all(|v| f.observed.contains(v) || f.potential.contains(v)));
            if !symmetrize {
                prop_assert_eq!(a.graph.neighbors(u), f.fused.as_slice());
            }
        }
    }

    #[test]
    fn metrics_never_improve_when_a_rank_worsens(ranks in prop::collection::vec(1usize..101, 1..40), idx: prop::sample::Index, bump in 1usize..10) {
        let i = idx.index(ranks.len());
        let mut worse = ranks.clone();
        worse[i] += bump;
        for n in [1, 3, 10] {
            prop_assert!(hit_ratio(&worse, n) <= hit_ratio(&ranks, n));
            prop_assert!(ndcg(&worse, n) <= ndcg(&ranks, n));
        }
        prop_assert_eq!(ndcg(&ranks, 1), hit_ratio(&ranks, 1));
    }

    #[test]
    fn metrics_ignore_user_order(ranks in prop::collection::vec(1usize..101, 1..40), seed: u64) {
        let mut rng = rng::seeded(seed, 0);
        let rows: Vec<(usize, usize)> = ranks.iter().copied().enumerate().collect();
        let mut shuffled = rows.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let (a, b) = (MetricReport::from_ranks(rows), MetricReport::from_ranks(shuffled));
        prop_assert!((a.hr1 - b.hr1).abs() < 1e-12);
        prop_assert!((a.hr3 - b.hr3).abs() < 1e-12);
        prop_assert!((a.ndcg3 - b.ndcg3).abs() < 1e-12);
    }

    #[test]
    fn adam_keeps_parameters_finite(seed: u64, steps in 1usize..30, scale in -6i32..6) {
        let mut rng = rng::seeded(seed, 0);
        let mut state = EmbeddingState::init(4, 3, 2, 0.1, seed).unwrap();
        let mut opt = OptimizerState::new(&state);
        for _ in 0..steps {
            let g = 10f64.powi(scale);
            let grads = ParamGradients {
                users: random_matrix(4, 2, &mut rng) * g,
                items: random_matrix(3, 2, &mut rng) * g,
                aggregator: None,
            };
            adam_step(&mut state, &grads, &mut opt, 1e-2).unwrap();
            prop_assert!(state.is_finite());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn runs_are_reproducible_and_keep_the_best_snapshot(seed in 0u64..1000) {
        let (_, dataset) = common::planted(seed);
        let config = burger_core::trainer::TrainRunConfig {
            dim: 8,
            max_iterations: 2,
            epochs_per_iteration: 2,
            ..common::fixture_config(seed)
        };
        let a = burger_core::trainer::run(&dataset, &config).unwrap();
        let b = burger_core::trainer::run(&dataset, &config).unwrap();
        prop_assert_eq!(a.log.to_csv(), b.log.to_csv());
        prop_assert_eq!(&a.final_state, &b.final_state);
        let best = a.best.as_ref().unwrap().metrics.hr3;
        prop_assert!(a.log.epochs.iter().all(|e| best >= e.metrics.hr3));
        prop_assert_eq!(Some(best), a.log.max_hr3());
    }
}
