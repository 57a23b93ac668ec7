//! Similarities, triplet sampling, the ranking and coordination losses with
//! their analytic gradients, and the weighted total objective.
//!
//! All losses are sums over the batch. Gradients are taken with respect to
//! the pooled matrices; [`crate::propagation`] maps them back onto the
//! initial embeddings.

mod loss;
mod sampler;

pub use loss::{
    bpr_item_loss, bpr_pair, bpr_social_loss, coordination_loss, evaluate_objective,
    interest_coordination, social_coordination, total_loss, LossReport, LossTerms, LossWeights,
    Margins, PooledGradients,
};
pub use sampler::{sample_triplets, TripletBatch, TripletSampler};

use ndarray::ArrayView1;

use crate::error::{Error, Result};

/// `(anchor, positive, negative)` index triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

impl Triplet {
    pub fn new(anchor: usize, positive: usize, negative: usize) -> Self {
        Self {
            anchor,
            positive,
            negative,
        }
    }
}

fn dot(op: &'static str, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::input(
            op,
            format!("dimension {} vs {}", a.len(), b.len()),
        ));
    }
    Ok(a.dot(&b))
}

/// Inner product of two item-preference rows.
pub fn interest_similarity(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<f64> {
    dot("objective::interest_similarity", u, v)
}

/// Inner product of two social-preference rows.
pub fn social_similarity(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<f64> {
    dot("objective::social_similarity", u, v)
}

/// Predicted preference of a user row for an item row.
pub fn predict_score(user: ArrayView1<'_, f64>, item: ArrayView1<'_, f64>) -> Result<f64> {
    dot("objective::predict_score", user, item)
}

/// Logistic function, stable for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(x))` without overflow or `ln(0)`.
pub fn log_sigmoid(x: f64) -> f64 {
    // ln sigma(x) = -softplus(-x) = min(x, 0) - ln(1 + e^{-|x|})
    x.min(0.0) - (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn similarities_are_plain_inner_products() {
        let e = array![0.6, 0.8];
        assert!((interest_similarity(e.view(), e.view()).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            social_similarity(array![1.0, 0.0].view(), array![0.0, 1.0].view()).unwrap(),
            0.0
        );
        assert_eq!(
            interest_similarity(array![1.0, 2.0].view(), array![3.0, -1.0].view()).unwrap(),
            1.0
        );
        assert_eq!(
            social_similarity(array![1.0, 2.0].view(), array![3.0, -1.0].view()).unwrap(),
            1.0
        );
        assert!(social_similarity(array![1.0].view(), array![1.0, 2.0].view()).is_err());
    }

    #[test]
    fn scores_order_items_and_are_symmetric() {
        let zero = array![0.0, 0.0];
        assert_eq!(
            predict_score(zero.view(), array![5.0, -2.0].view()).unwrap(),
            0.0
        );
        let u = array![1.0, 0.0];
        let (i1, i2) = (array![2.0, 0.0], array![1.0, 1.0]);
        assert!(
            predict_score(u.view(), i1.view()).unwrap()
                > predict_score(u.view(), i2.view()).unwrap()
        );
        assert_eq!(
            predict_score(u.view(), i2.view()).unwrap(),
            predict_score(i2.view(), u.view()).unwrap()
        );
        assert!(predict_score(u.view(), array![1.0].view()).is_err());
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        for x in [-30.0, -3.0, -0.1, 0.2, 4.0, 25.0] {
            let direct: f64 = sigmoid(x).ln();
            assert!((log_sigmoid(x) - direct).abs() < 1e-12);
        }
    }
}
