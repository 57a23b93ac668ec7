//! Light graph convolution on the user-item graph and on every slice of the
//! social tensor, layer mean-pooling, slice aggregation, and the exact adjoint
//! of each map for manual backpropagation.

mod aggregate;
mod state;

pub use aggregate::{
    aggregate_slices, AggCache, AggMode, Aggregation, MlpAggregator, MlpGradients,
};
pub use state::{read_matrix_dump, write_matrix_dump, EmbeddingState};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;

/// Layer outputs of user-item propagation and their means.
#[derive(Debug, Clone)]
pub struct PropagationOutput {
    /// `user_layers[k]` is the user matrix after `k` convolutions.
    pub user_layers: Vec<Array2<f64>>,
    pub item_layers: Vec<Array2<f64>>,
    /// Mean of the user layers: one item-preference row per user.
    pub users: Array2<f64>,
    /// Mean of the item layers: one attractiveness row per item.
    pub items: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct SocialPropagationOutput {
    /// Layer-pooled user matrix of every slice, oldest slice first.
    pub slice_pooled: Vec<Array2<f64>>,
    /// Aggregated social-preference matrix.
    pub users: Array2<f64>,
    /// Present when the aggregation is non-linear and backward needs its activations.
    pub cache: Option<AggCache>,
}

fn mean_of(layers: &[Array2<f64>]) -> Array2<f64> {
    let mut acc = layers[0].clone();
    for layer in &layers[1..] {
        acc += layer;
    }
    acc / layers.len() as f64
}

/// `K` rounds of `u <- A i`, `i <- A^T u` from the initial embeddings, then
/// mean pooling over layers `0..=K`.
pub fn propagate_user_item(
    adj: &NormalizedAdjacency,
    users: ArrayView2<'_, f64>,
    items: ArrayView2<'_, f64>,
    layers: usize,
) -> Result<PropagationOutput> {
    if adj.num_rows() != users.nrows()
        || adj.num_cols() != items.nrows()
        || users.ncols() != items.ncols()
    {
        return Err(Error::input(
            "propagation::propagate_user_item",
            format!(
                "adjacency {}x{} vs embeddings {:?} / {:?}",
                adj.num_rows(),
                adj.num_cols(),
                users.dim(),
                items.dim()
            ),
        ));
    }
    let mut user_layers = Vec::with_capacity(layers + 1);
    let mut item_layers = Vec::with_capacity(layers + 1);
    user_layers.push(users.to_owned());
    item_layers.push(items.to_owned());
    for k in 0..layers {
        let next_users = adj.apply(item_layers[k].view());
        let next_items = adj.apply_transpose(user_layers[k].view());
        user_layers.push(next_users);
        item_layers.push(next_items);
    }
    Ok(PropagationOutput {
        users: mean_of(&user_layers),
        items: mean_of(&item_layers),
        user_layers,
        item_layers,
    })
}

/// Propagates the shared user matrix through every normalized slice
/// independently, pools each slice over layers, then aggregates the slices.
pub fn propagate_social_tensor(
    slices: &[NormalizedAdjacency],
    users: ArrayView2<'_, f64>,
    layers: usize,
    agg: Aggregation<'_>,
) -> Result<SocialPropagationOutput> {
    const OP: &str = "propagation::propagate_social_tensor";
    if slices.is_empty() {
        return Err(Error::input(OP, "social tensor has no slices"));
    }
    if let Some(bad) = slices
        .iter()
        .find(|s| s.num_rows() != users.nrows() || s.num_cols() != users.nrows())
    {
        return Err(Error::input(
            OP,
            format!(
                "slice {}x{} vs {} users",
                bad.num_rows(),
                bad.num_cols(),
                users.nrows()
            ),
        ));
    }
    let slice_pooled: Vec<Array2<f64>> = slices
        .iter()
        .map(|slice| {
            let mut acc = users.to_owned();
            let mut layer = users.to_owned();
            for _ in 0..layers {
                layer = slice.apply(layer.view());
                acc += &layer;
            }
            acc / (layers + 1) as f64
        })
        .collect();
    let (aggregated, cache) = aggregate_slices(&slice_pooled, agg)?;
    Ok(SocialPropagationOutput {
        slice_pooled,
        users: aggregated,
        cache,
    })
}

/// Adjoint of [`propagate_user_item`]: maps gradients on the pooled user and
/// item matrices to gradients on the initial embeddings.
pub fn backward_user_item(
    adj: &NormalizedAdjacency,
    layers: usize,
    grad_users: ArrayView2<'_, f64>,
    grad_items: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if adj.num_rows() != grad_users.nrows() || adj.num_cols() != grad_items.nrows() {
        return Err(Error::input(
            "propagation::backward_user_item",
            "gradient shapes do not match the adjacency",
        ));
    }
    let scale = 1.0 / (layers + 1) as f64;
    let pooled_users = grad_users.to_owned() * scale;
    let pooled_items = grad_items.to_owned() * scale;
    // g_u[k] = G_u/(K+1) + A g_i[k+1];  g_i[k] = G_i/(K+1) + A^T g_u[k+1]
    let mut gu = pooled_users.clone();
    let mut gi = pooled_items.clone();
    for _ in 0..layers {
        let next_gu = &pooled_users + &adj.apply(gi.view());
        let next_gi = &pooled_items + &adj.apply_transpose(gu.view());
        gu = next_gu;
        gi = next_gi;
    }
    Ok((gu, gi))
}

/// Gradients produced by [`backward_social`].
#[derive(Debug, Clone)]
pub struct SocialGradients {
    pub users: Array2<f64>,
    pub aggregator: Option<MlpGradients>,
}

/// Adjoint of [`propagate_social_tensor`] given the upstream gradient on the
/// aggregated social matrix.
pub fn backward_social(
    slices: &[NormalizedAdjacency],
    layers: usize,
    forward: &SocialPropagationOutput,
    agg: Aggregation<'_>,
    grad_aggregated: ArrayView2<'_, f64>,
) -> Result<SocialGradients> {
    const OP: &str = "propagation::backward_social";
    if slices.len() != forward.slice_pooled.len() {
        return Err(Error::InvalidState {
            op: OP,
            msg: "forward output was produced with a different tensor".into(),
        });
    }
    let (slice_grads, aggregator) =
        aggregate::backward(slices.len(), forward, agg, grad_aggregated)?;
    let scale = 1.0 / (layers + 1) as f64;
    let mut users = Array2::zeros(grad_aggregated.raw_dim());
    for (slice, g) in slices.iter().zip(slice_grads) {
        let pooled = g * scale;
        let mut acc = pooled.clone();
        for _ in 0..layers {
            acc = &pooled + &slice.apply_transpose(acc.view());
        }
        users += &acc;
    }
    Ok(SocialGradients { users, aggregator })
}
