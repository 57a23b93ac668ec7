//! Self-checks run by the `check` command: analytic gradients against finite
//! differences, the closed-form posterior against its Bayes composition, and
//! posterior ranking against similarity ranking.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng as _;
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::denoise::{posterior, score_candidates, select_potential_friends};
use crate::error::Result;
use crate::graph::{symmetric_normalize, InteractionGraph, NormalizedAdjacency, SocialGraph};
use crate::objective::{
    bpr_item_loss, bpr_social_loss, coordination_loss, interest_coordination, social_coordination,
    LossTerms, LossWeights, Margins, Triplet, TripletBatch,
};
use crate::propagation::{
    backward_social, backward_user_item, propagate_social_tensor, propagate_user_item, Aggregation,
    EmbeddingState, MlpAggregator,
};
use crate::rng::{self, Rng};
use crate::trainer::Model;

/// Entries smaller than this in both the analytic and the numeric gradient
/// are compared on this absolute scale instead of relative to themselves.
pub const RELATIVE_FLOOR: f64 = 1e-4;
const STEP: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct GradientCase {
    pub name: String,
    pub entries: usize,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    pub cases: Vec<GradientCase>,
}

impl GradientReport {
    pub fn max_error(&self) -> f64 {
        self.cases
            .iter()
            .map(|c| c.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn worst(&self, name: &str) -> f64 {
        self.cases
            .iter()
            .filter(|c| c.name == name)
            .map(|c| c.max_relative_error)
            .fold(0.0, f64::max)
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Five-point central difference of `f` along every entry of `x`.
fn numeric_gradient(x: &Array2<f64>, mut f: impl FnMut(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut probe = x.clone();
    let mut grad = Array2::zeros(x.raw_dim());
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let base = x[[r, c]];
        let mut at = |delta: f64| {
            probe[[r, c]] = base + delta;
            f(&probe)
        };
        let (p2, p1, m1, m2) = (at(2.0 * STEP), at(STEP), at(-STEP), at(-2.0 * STEP));
        probe[[r, c]] = base;
        grad[[r, c]] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * STEP);
    }
    grad
}

fn compare(name: &str, analytic: &Array2<f64>, numeric: &Array2<f64>) -> GradientCase {
    let max_relative_error = analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max);
    GradientCase {
        name: name.to_owned(),
        entries: analytic.len(),
        max_relative_error,
    }
}

fn row_matrix(v: &Array1<f64>) -> Array2<f64> {
    v.clone().insert_axis(ndarray::Axis(0))
}

/// Small random problem: graphs, embeddings and a triplet batch.
struct Instance {
    train: InteractionGraph,
    slices: Vec<SocialGraph>,
    state: EmbeddingState,
    batch: TripletBatch,
    layers: usize,
}

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || scale * (2.0 * rng.random::<f64>() - 1.0))
}

fn random_instance(rng: &mut Rng, mlp: bool) -> Instance {
    let m = rng.random_range(4..=10);
    let n = rng.random_range(3..=10);
    let d = rng.random_range(1..=4);
    let tau = rng.random_range(1..=3);
    let layers = rng.random_range(1..=3);
    let mut edges = Vec::new();
    for u in 0..m {
        edges.push((u, rng.random_range(0..n)));
        for i in 0..n {
            if rng.random_bool(0.3) {
                edges.push((u, i));
            }
        }
    }
    let train = InteractionGraph::from_edges(m, n, edges).expect("valid edges");
    let slices = (0..tau)
        .map(|t| {
            let pairs: Vec<(usize, usize)> = (0..m)
                .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
                .filter(|_| rng.random_bool(0.35))
                .collect();
            let g = SocialGraph::undirected(m, pairs).expect("valid pairs");
            if t % 2 == 1 {
                // exercise the directed normalization too
                let rows = (0..m)
                    .map(|u| {
                        g.neighbors(u)
                            .iter()
                            .copied()
                            .filter(|v| (u + v) % 3 != 0)
                            .collect()
                    })
                    .collect();
                SocialGraph::directed(rows).expect("valid rows")
            } else {
                g
            }
        })
        .collect();
    let mut state = EmbeddingState {
        users: random_matrix(m, d, 0.8, rng),
        items: random_matrix(n, d, 0.8, rng),
        aggregator: None,
    };
    if mlp {
        let mut agg = MlpAggregator::identity(d, tau);
        agg.weight += &random_matrix(d, d * tau, 0.3, rng);
        agg.bias = Array1::from_shape_simple_fn(d, || 0.2 * (2.0 * rng.random::<f64>() - 1.0));
        state.aggregator = Some(agg);
    }
    let triplet = |rng: &mut Rng, anchors: usize, targets: usize, exclude_self: bool| loop {
        let t = Triplet::new(
            rng.random_range(0..anchors),
            rng.random_range(0..targets),
            rng.random_range(0..targets),
        );
        if t.positive != t.negative
            && !(exclude_self && (t.anchor == t.positive || t.anchor == t.negative))
        {
            break t;
        }
    };
    let batch = TripletBatch {
        items: (0..8).map(|_| triplet(rng, m, n, false)).collect(),
        social: (0..8).map(|_| triplet(rng, m, m, true)).collect(),
    };
    Instance {
        train,
        slices,
        state,
        batch,
        layers,
    }
}

/// Smallest hinge argument magnitude of the batch, so that instances sitting
/// on a kink can be redrawn.
fn hinge_clearance(
    batch: &[Triplet],
    coeff: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    margin: f64,
) -> f64 {
    batch
        .iter()
        .map(|t| {
            let a = crate::objective::sigmoid(coeff.row(t.anchor).dot(&coeff.row(t.positive)));
            let b = crate::objective::sigmoid(coeff.row(t.anchor).dot(&coeff.row(t.negative)));
            let x = target.row(t.anchor);
            (margin - a * x.dot(&target.row(t.positive)) + b * x.dot(&target.row(t.negative))).abs()
        })
        .fold(f64::INFINITY, f64::min)
}

fn normalized(slices: &[SocialGraph]) -> Vec<NormalizedAdjacency> {
    slices.iter().map(symmetric_normalize).collect()
}

fn aggregation(state: &EmbeddingState) -> Aggregation<'_> {
    state
        .aggregator
        .as_ref()
        .map_or(Aggregation::Mean, Aggregation::Mlp)
}

fn frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a * b).sum()
}

/// Checks every loss and both propagation adjoints on `trials` random
/// instances per case.
pub fn gradient_suite(seed: u64, trials: usize) -> Result<GradientReport> {
    let mut rng = rng::seeded(seed, 0);
    let mut cases = Vec::new();
    let margin = 1.0;
    for trial in 0..trials {
        let mlp = trial % 2 == 1;
        let inst = loop {
            let inst = random_instance(&mut rng, mlp);
            let adj = symmetric_normalize(&inst.train);
            let slices = normalized(&inst.slices);
            let c = propagate_user_item(
                &adj,
                inst.state.users.view(),
                inst.state.items.view(),
                inst.layers,
            )?;
            let s = propagate_social_tensor(
                &slices,
                inst.state.users.view(),
                inst.layers,
                aggregation(&inst.state),
            )?;
            let clear1 =
                hinge_clearance(&inst.batch.social, c.users.view(), s.users.view(), margin);
            let clear2 =
                hinge_clearance(&inst.batch.social, s.users.view(), c.users.view(), margin);
            if clear1.min(clear2) > 0.05 {
                break inst;
            }
        };
        let st = &inst.state;

        // ranking losses on free matrices
        let (_, gu, gi) = bpr_item_loss(&inst.batch.items, st.users.view(), st.items.view());
        let nu = numeric_gradient(&st.users, |u| {
            bpr_item_loss(&inst.batch.items, u.view(), st.items.view()).0
        });
        let ni = numeric_gradient(&st.items, |i| {
            bpr_item_loss(&inst.batch.items, st.users.view(), i.view()).0
        });
        cases.push(compare("rec/users", &gu, &nu));
        cases.push(compare("rec/items", &gi, &ni));

        let (_, gs) = bpr_social_loss(&inst.batch.social, st.users.view());
        let ns = numeric_gradient(&st.users, |s| {
            bpr_social_loss(&inst.batch.social, s.view()).0
        });
        cases.push(compare("soc", &gs, &ns));

        // coordination losses; coefficients come from a second matrix held fixed
        let adj = symmetric_normalize(&inst.train);
        let slices = normalized(&inst.slices);
        let c0 = propagate_user_item(&adj, st.users.view(), st.items.view(), inst.layers)?;
        let s0 = propagate_social_tensor(&slices, st.users.view(), inst.layers, aggregation(st))?;
        let (_, g1) =
            social_coordination(&inst.batch.social, c0.users.view(), s0.users.view(), margin);
        let n1 = numeric_gradient(&s0.users, |s| {
            coordination_loss(&inst.batch.social, c0.users.view(), s.view(), margin).0
        });
        cases.push(compare("omega1", &g1, &n1));
        let (_, g2) =
            interest_coordination(&inst.batch.social, s0.users.view(), c0.users.view(), margin);
        let n2 = numeric_gradient(&c0.users, |c| {
            coordination_loss(&inst.batch.social, s0.users.view(), c.view(), margin).0
        });
        cases.push(compare("omega2", &g2, &n2));

        // user-item adjoint: J = <Gu, pool_u(E)> + <Gi, pool_i(E)>
        let gu_up = random_matrix(st.users.nrows(), st.dim(), 1.0, &mut rng);
        let gi_up = random_matrix(st.items.nrows(), st.dim(), 1.0, &mut rng);
        let (bu, bi) = backward_user_item(&adj, inst.layers, gu_up.view(), gi_up.view())?;
        let j = |u: &Array2<f64>, i: &Array2<f64>| {
            let out =
                propagate_user_item(&adj, u.view(), i.view(), inst.layers).expect("shapes fixed");
            frobenius(&gu_up, &out.users) + frobenius(&gi_up, &out.items)
        };
        cases.push(compare(
            "propagation/user_item/users",
            &bu,
            &numeric_gradient(&st.users, |u| j(u, &st.items)),
        ));
        cases.push(compare(
            "propagation/user_item/items",
            &bi,
            &numeric_gradient(&st.items, |i| j(&st.users, i)),
        ));

        // social adjoint: J = <G, agg(pool(E))>
        let g_up = random_matrix(st.users.nrows(), st.dim(), 1.0, &mut rng);
        let back = backward_social(&slices, inst.layers, &s0, aggregation(st), g_up.view())?;
        let js = |u: &Array2<f64>, agg: Aggregation<'_>| {
            let out =
                propagate_social_tensor(&slices, u.view(), inst.layers, agg).expect("shapes fixed");
            frobenius(&g_up, &out.users)
        };
        let tag = if mlp { "mlp" } else { "mean" };
        cases.push(compare(
            &format!("propagation/social_{tag}/users"),
            &back.users,
            &numeric_gradient(&st.users, |u| js(u, aggregation(st))),
        ));
        if let (Some(agg), Some(g)) = (&st.aggregator, &back.aggregator) {
            let nw = numeric_gradient(&agg.weight, |w| {
                let probe = MlpAggregator {
                    weight: w.clone(),
                    bias: agg.bias.clone(),
                };
                js(&st.users, Aggregation::Mlp(&probe))
            });
            cases.push(compare("propagation/social_mlp/weight", &g.weight, &nw));
            let nb = numeric_gradient(&row_matrix(&agg.bias), |b| {
                let probe = MlpAggregator {
                    weight: agg.weight.clone(),
                    bias: b.row(0).to_owned(),
                };
                js(&st.users, Aggregation::Mlp(&probe))
            });
            cases.push(compare(
                "propagation/social_mlp/bias",
                &row_matrix(&g.bias),
                &nb,
            ));
        }

        // total objective through both propagations, coefficients frozen at the base point
        cases.extend(total_case(
            &inst, &adj, &slices, &c0.users, &s0.users, margin,
        )?);
    }
    Ok(GradientReport { cases })
}

fn total_case(
    inst: &Instance,
    adj: &NormalizedAdjacency,
    slices: &[NormalizedAdjacency],
    interest_coeff: &Array2<f64>,
    social_coeff: &Array2<f64>,
    margin: f64,
) -> Result<Vec<GradientCase>> {
    let weights = LossWeights {
        lambda1: 0.7,
        lambda2: 0.05,
        alpha: 0.4,
        beta: 0.3,
    };
    let margins = Margins {
        social: margin,
        interest: margin,
    };
    let model = Model {
        interactions: adj,
        slices,
        layers: inst.layers,
        social_layers: inst.layers,
        weights,
        margins,
        terms: LossTerms::default(),
    };
    let (_, grads) = model.loss_and_gradients(&inst.state, &inst.batch)?;
    let surrogate = |state: &EmbeddingState| {
        let fwd = model.forward(state).expect("shapes fixed");
        let (rec, _, _) = bpr_item_loss(
            &inst.batch.items,
            fwd.interest.users.view(),
            fwd.interest.items.view(),
        );
        let (soc, _) = bpr_social_loss(&inst.batch.social, fwd.social.users.view());
        let (o1, _) = coordination_loss(
            &inst.batch.social,
            interest_coeff.view(),
            fwd.social.users.view(),
            margin,
        );
        let (o2, _) = coordination_loss(
            &inst.batch.social,
            social_coeff.view(),
            fwd.interest.users.view(),
            margin,
        );
        let l2 = state
            .users
            .iter()
            .chain(&state.items)
            .map(|x| x * x)
            .sum::<f64>();
        rec + weights.lambda1 * soc + weights.alpha * o1 + weights.beta * o2 + weights.lambda2 * l2
    };
    let st = &inst.state;
    let mut out = vec![
        compare(
            "total/users",
            &grads.users,
            &numeric_gradient(&st.users, |u| {
                surrogate(&EmbeddingState {
                    users: u.clone(),
                    ..st.clone()
                })
            }),
        ),
        compare(
            "total/items",
            &grads.items,
            &numeric_gradient(&st.items, |i| {
                surrogate(&EmbeddingState {
                    items: i.clone(),
                    ..st.clone()
                })
            }),
        ),
    ];
    if let (Some(agg), Some(g)) = (&st.aggregator, &grads.aggregator) {
        let nw = numeric_gradient(&agg.weight, |w| {
            let mut probe = st.clone();
            probe.aggregator.as_mut().expect("present").weight = w.clone();
            surrogate(&probe)
        });
        out.push(compare("total/agg_weight", &g.weight, &nw));
    }
    Ok(out)
}

/// Largest gap between the closed-form posterior and the explicit Bayes
/// composition `2 F f P / (2 F f P + 2 f (1 - F)(1 - P))` over the grid
/// `{0.05, 0.10, ..., 0.95}^2`, with `f` the standard normal density at the
/// `F`-quantile.
pub fn posterior_algebra() -> Result<f64> {
    let normal = Normal::standard();
    let grid: Vec<f64> = (1..=19).map(|k| k as f64 * 0.05).collect();
    let mut worst = 0.0f64;
    for &f_val in &grid {
        let density = normal.pdf(normal.inverse_cdf(f_val));
        let friend_lik = 2.0 * f_val * density;
        let non_friend_lik = 2.0 * density * (1.0 - f_val);
        for &p in &grid {
            let composed = friend_lik * p / (friend_lik * p + non_friend_lik * (1.0 - p));
            worst = worst.max((posterior(f_val, p)? - composed).abs());
        }
    }
    Ok(worst)
}

/// Number of random instances (out of `instances`) where top-`k` selection by
/// posterior under a constant prior differs from top-`k` by similarity.
pub fn argsort_invariance(instances: usize, seed: u64) -> Result<usize> {
    let mut rng = rng::seeded(seed, 1);
    let mut mismatches = 0;
    for _ in 0..instances {
        let m = rng.random_range(3..=50);
        let user = rng.random_range(0..m);
        let observed: Vec<usize> = (0..m)
            .filter(|&v| v != user && rng.random_bool(0.2))
            .collect();
        let unobserved = m - 1 - observed.len();
        if unobserved == 0 {
            continue;
        }
        // coarse values so that ties occur
        let sim = Array1::from_shape_simple_fn(m, || (rng.random_range(0..12) as f64) / 4.0 - 1.0);
        let prior = rng.random_range(0.01..0.99);
        let scores = score_candidates(user, &observed, sim.view(), &vec![prior; m])?;
        let k = rng.random_range(0..=unobserved);
        let mut by_posterior = select_potential_friends(user, &scores, k);
        let mut brute: Vec<usize> = scores.iter().map(|s| s.user).collect();
        brute.sort_by(|&a, &b| sim[b].total_cmp(&sim[a]).then(a.cmp(&b)));
        brute.truncate(k);
        by_posterior.sort_unstable();
        brute.sort_unstable();
        if by_posterior != brute {
            mismatches += 1;
        }
    }
    Ok(mismatches)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_match_finite_differences() {
        let report = gradient_suite(3, 4).unwrap();
        for c in &report.cases {
            assert!(c.max_relative_error < 1e-6, "{c:?}");
        }
        assert!(report
            .cases
            .iter()
            .any(|c| c.name == "propagation/social_mlp/weight"));
    }

    #[test]
    fn posterior_composition_agrees() {
        assert!(posterior_algebra().unwrap() < 1e-12);
    }

    #[test]
    fn constant_prior_preserves_similarity_order() {
        assert_eq!(argsort_invariance(200, 0).unwrap(), 0);
    }

    #[test]
    fn a_wrong_gradient_is_caught() {
        let x = Array2::from_shape_vec((1, 2), vec![0.3, -0.7]).unwrap();
        let n = numeric_gradient(&x, |x| x[[0, 0]].powi(3) + x[[0, 1]] * x[[0, 0]]);
        let exact = Array2::from_shape_vec((1, 2), vec![3.0 * 0.09 - 0.7, 0.3]).unwrap();
        assert!(compare("ok", &exact, &n).max_relative_error < 1e-9);
        let wrong = Array2::from_shape_vec((1, 2), vec![3.0 * 0.09, 0.3]).unwrap();
        assert!(compare("bad", &wrong, &n).max_relative_error > 0.1);
    }
}
