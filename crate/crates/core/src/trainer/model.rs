use ndarray::Zip;

use super::adam::ParamGradients;
use super::TrainRunConfig;
use crate::error::Result;
use crate::graph::NormalizedAdjacency;
use crate::objective::{
    evaluate_objective, LossReport, LossTerms, LossWeights, Margins, TripletBatch,
};
use crate::propagation::{
    backward_social, backward_user_item, propagate_social_tensor, propagate_user_item, Aggregation,
    EmbeddingState, PropagationOutput, SocialPropagationOutput,
};

/// Fixed graphs and loss settings; the embeddings are passed per call.
#[derive(Debug, Clone, Copy)]
pub struct Model<'a> {
    pub interactions: &'a NormalizedAdjacency,
    pub slices: &'a [NormalizedAdjacency],
    pub layers: usize,
    pub social_layers: usize,
    pub weights: LossWeights,
    pub margins: Margins,
    pub terms: LossTerms,
}

#[derive(Debug, Clone)]
pub struct Forward {
    pub interest: PropagationOutput,
    pub social: SocialPropagationOutput,
}

fn aggregation(state: &EmbeddingState) -> Aggregation<'_> {
    match &state.aggregator {
        Some(mlp) => Aggregation::Mlp(mlp),
        None => Aggregation::Mean,
    }
}

impl<'a> Model<'a> {
    pub fn new(
        interactions: &'a NormalizedAdjacency,
        slices: &'a [NormalizedAdjacency],
        config: &TrainRunConfig,
    ) -> Self {
        Self {
            interactions,
            slices,
            layers: config.layers,
            social_layers: config.social_layers,
            weights: config.weights(),
            margins: config.margins(),
            terms: config.terms,
        }
    }

    pub fn forward(&self, state: &EmbeddingState) -> Result<Forward> {
        let interest = propagate_user_item(
            self.interactions,
            state.users.view(),
            state.items.view(),
            self.layers,
        )?;
        let social = propagate_social_tensor(
            self.slices,
            state.users.view(),
            self.social_layers,
            aggregation(state),
        )?;
        Ok(Forward { interest, social })
    }

    /// Total loss of `batch` and its gradient on every parameter, including
    /// the squared-norm regularizer.
    pub fn loss_and_gradients(
        &self,
        state: &EmbeddingState,
        batch: &TripletBatch,
    ) -> Result<(LossReport, ParamGradients)> {
        let fwd = self.forward(state)?;
        let (report, pooled) = evaluate_objective(
            batch,
            fwd.interest.users.view(),
            fwd.interest.items.view(),
            fwd.social.users.view(),
            state.users.view(),
            state.items.view(),
            &self.weights,
            &self.margins,
            &self.terms,
        );
        let (mut users, mut items) = backward_user_item(
            self.interactions,
            self.layers,
            pooled.interest_users.view(),
            pooled.items.view(),
        )?;
        let social = backward_social(
            self.slices,
            self.social_layers,
            &fwd.social,
            aggregation(state),
            pooled.social_users.view(),
        )?;
        users += &social.users;
        let reg = 2.0 * self.weights.lambda2;
        if reg != 0.0 {
            Zip::from(&mut users)
                .and(&state.users)
                .for_each(|g, &e| *g += reg * e);
            Zip::from(&mut items)
                .and(&state.items)
                .for_each(|g, &e| *g += reg * e);
        }
        Ok((
            report,
            ParamGradients {
                users,
                items,
                aggregator: social.aggregator,
            },
        ))
    }
}
