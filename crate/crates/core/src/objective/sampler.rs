use rand::Rng as _;

use super::Triplet;
use crate::error::{Error, Result};
use crate::graph::{InteractionGraph, SocialGraph};
use crate::rng::Rng;

/// One minibatch: item triplets `(u, i+, i-)` and social triplets `(u, v+, v-)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripletBatch {
    pub items: Vec<Triplet>,
    pub social: Vec<Triplet>,
}

/// Uniform triplet sampler over a train graph and the newest social slice.
///
/// Anchors are uniform over users that admit a triplet, positives uniform over
/// the anchor's observed set, negatives uniform over its complement (rejection).
#[derive(Debug, Clone)]
pub struct TripletSampler<'a> {
    train: &'a InteractionGraph,
    social: &'a SocialGraph,
    item_anchors: Vec<usize>,
    social_anchors: Vec<usize>,
}

impl<'a> TripletSampler<'a> {
    pub fn new(train: &'a InteractionGraph, social: &'a SocialGraph) -> Result<Self> {
        let n = train.num_items();
        let m = social.num_users();
        if m != train.num_users() {
            return Err(Error::input(
                "objective::sample_triplets",
                "social slice and train graph disagree on users",
            ));
        }
        let item_anchors: Vec<usize> = (0..train.num_users())
            .filter(|&u| {
                let deg = train.items_of(u).len();
                deg > 0 && deg < n
            })
            .collect();
        if item_anchors.is_empty() {
            return Err(Error::EmptyDataset {
                op: "objective::sample_triplets",
                msg: "no user has both an interacted and a non-interacted item".into(),
            });
        }
        // B_u excludes u, so a non-empty C_u needs deg < m - 1.
        let social_anchors = (0..m)
            .filter(|&u| {
                let deg = social.degree(u);
                deg > 0 && deg + 1 < m
            })
            .collect();
        Ok(Self {
            train,
            social,
            item_anchors,
            social_anchors,
        })
    }

    pub fn has_social(&self) -> bool {
        !self.social_anchors.is_empty()
    }

    pub fn sample_item(&self, rng: &mut Rng) -> Triplet {
        let u = self.item_anchors[rng.random_range(0..self.item_anchors.len())];
        let items = self.train.items_of(u);
        let positive = items[rng.random_range(0..items.len())];
        let negative = loop {
            let i = rng.random_range(0..self.train.num_items());
            if items.binary_search(&i).is_err() {
                break i;
            }
        };
        Triplet::new(u, positive, negative)
    }

    /// `None` when no user has both an observed and an unobserved friend.
    pub fn sample_social(&self, rng: &mut Rng) -> Option<Triplet> {
        if self.social_anchors.is_empty() {
            return None;
        }
        let u = self.social_anchors[rng.random_range(0..self.social_anchors.len())];
        let friends = self.social.neighbors(u);
        let positive = friends[rng.random_range(0..friends.len())];
        let negative = loop {
            let v = rng.random_range(0..self.social.num_users());
            if v != u && friends.binary_search(&v).is_err() {
                break v;
            }
        };
        Some(Triplet::new(u, positive, negative))
    }

    /// `batch` item triplets, then `batch` social triplets (none if no user qualifies).
    pub fn sample(&self, batch: usize, rng: &mut Rng) -> TripletBatch {
        let items = (0..batch).map(|_| self.sample_item(rng)).collect();
        let social = if self.has_social() {
            (0..batch).filter_map(|_| self.sample_social(rng)).collect()
        } else {
            Vec::new()
        };
        TripletBatch { items, social }
    }
}

pub fn sample_triplets(
    train: &InteractionGraph,
    newest_slice: &SocialGraph,
    batch: usize,
    rng: &mut Rng,
) -> Result<TripletBatch> {
    if batch == 0 {
        return Err(Error::config(
            "objective::sample_triplets",
            "batch size must be at least 1",
        ));
    }
    Ok(TripletSampler::new(train, newest_slice)?.sample(batch, rng))
}
