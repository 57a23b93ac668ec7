use std::collections::HashSet;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{sample_absent_pairs, InteractionGraph, SocialGraph};
use crate::rng::{self, streams};

/// Social edges known to be injected noise, each stored once as `(a, b)`, `a < b`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NoiseLabels {
    edges: HashSet<(usize, usize)>,
}

impl NoiseLabels {
    pub fn new(edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            edges: edges
                .into_iter()
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Whether the unordered pair `{a, b}` is labeled noise.
    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Labeled edges in sorted order.
    pub fn sorted(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = self.edges.iter().copied().collect();
        out.sort_unstable();
        out
    }
}

/// `ceil(ratio * count)` without floating-point spill-over, so that
/// `0.3 * 100` gives 30 rather than 31.
pub(crate) fn ceil_fraction(ratio: f64, count: usize) -> usize {
    let x = ratio * count as f64;
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        x.ceil() as usize
    }
}

/// Adds `ceil(ratio * |E|)` uniformly random new undirected edges to `social`
/// and labels exactly those.
pub fn inject_social_noise(
    social: &SocialGraph,
    ratio: f64,
    seed: u64,
) -> Result<(SocialGraph, NoiseLabels)> {
    if !(ratio >= 0.0 && ratio.is_finite()) {
        return Err(Error::config(
            "ingest::inject_social_noise",
            format!("noise ratio {ratio} must be finite and non-negative"),
        ));
    }
    if !social.is_symmetric() {
        return Err(Error::input(
            "ingest::inject_social_noise",
            "noise injection needs an undirected graph",
        ));
    }
    let count = ceil_fraction(ratio, social.num_edges());
    let mut rng = rng::seeded(seed, streams::NOISE);
    let added = sample_absent_pairs(social, count, |_, _| true, &mut rng).map_err(|available| {
        Error::CannotInject {
            requested: count,
            available,
        }
    })?;
    let labels = NoiseLabels::new(added.iter().copied());
    let noisy =
        SocialGraph::undirected(social.num_users(), social.undirected_edges().chain(added))?;
    Ok((noisy, labels))
}

/// Planted-community fixture generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_users: usize,
    pub num_items: usize,
    pub num_communities: usize,
    /// Interaction probability for a user-item pair in the same community.
    pub interaction_intra: f64,
    pub interaction_inter: f64,
    /// Clean social-edge probability for a user pair in the same community.
    pub social_intra: f64,
    pub social_inter: f64,
    /// Injected cross-community noise edges, as a fraction of the clean edge count.
    pub noise_ratio: f64,
    /// Equal-size taste groups inside each community, for users and items alike.
    pub subgroups: usize,
    /// Multiplier on the intra-community rates for pairs in the same group
    /// (capped at 1).
    pub subgroup_boost: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_users: 100,
            num_items: 200,
            num_communities: 2,
            interaction_intra: 0.1,
            interaction_inter: 0.005,
            social_intra: 0.1,
            social_inter: 0.0,
            noise_ratio: 0.3,
            subgroups: 1,
            subgroup_boost: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub interactions: InteractionGraph,
    /// Clean edges plus injected noise.
    pub social: SocialGraph,
    pub clean_social: SocialGraph,
    pub noise: NoiseLabels,
    pub user_community: Vec<usize>,
    pub item_community: Vec<usize>,
    /// Taste group of each user, numbered across communities.
    pub user_group: Vec<usize>,
    pub item_group: Vec<usize>,
}

fn community_of(index: usize, count: usize, communities: usize) -> usize {
    index * communities / count.max(1)
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    const OP: &str = "ingest::generate_synthetic";
    let rates = [
        spec.interaction_intra,
        spec.interaction_inter,
        spec.social_intra,
        spec.social_inter,
    ];
    if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::config(OP, "rates must lie in [0, 1]"));
    }
    if spec.interaction_intra <= spec.interaction_inter || spec.social_intra <= spec.social_inter {
        return Err(Error::config(
            OP,
            "intra-community rates must exceed inter-community rates",
        ));
    }
    if spec.num_communities == 0 || spec.num_communities > spec.num_users.min(spec.num_items) {
        return Err(Error::config(
            OP,
            "community count must be in 1..=min(num_users, num_items)",
        ));
    }
    if spec.subgroups == 0
        || spec.num_communities * spec.subgroups > spec.num_users.min(spec.num_items)
    {
        return Err(Error::config(
            OP,
            "group count must be in 1..=min(num_users, num_items) / communities",
        ));
    }
    if !(spec.subgroup_boost >= 1.0 && spec.subgroup_boost.is_finite()) {
        return Err(Error::config(
            OP,
            "subgroup boost must be finite and at least 1",
        ));
    }
    if !(spec.noise_ratio >= 0.0 && spec.noise_ratio.is_finite()) {
        return Err(Error::config(
            OP,
            "noise ratio must be finite and non-negative",
        ));
    }

    let (m, n, c, g) = (
        spec.num_users,
        spec.num_items,
        spec.num_communities,
        spec.subgroups,
    );
    let user_group: Vec<usize> = (0..m).map(|u| community_of(u, m, c * g)).collect();
    let item_group: Vec<usize> = (0..n).map(|i| community_of(i, n, c * g)).collect();
    let user_community: Vec<usize> = user_group.iter().map(|x| x / g).collect();
    let item_community: Vec<usize> = item_group.iter().map(|x| x / g).collect();
    let mut rng = rng::seeded(spec.seed, streams::SYNTH);
    let boosted = |rate: f64, same_group: bool| {
        if same_group {
            (rate * spec.subgroup_boost).min(1.0)
        } else {
            rate
        }
    };

    let mut interactions = Vec::new();
    for u in 0..m {
        for i in 0..n {
            let rate = if user_community[u] == item_community[i] {
                boosted(spec.interaction_intra, user_group[u] == item_group[i])
            } else {
                spec.interaction_inter
            };
            if rng.random_bool(rate) {
                interactions.push((u, i));
            }
        }
    }

    let mut clean = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            let rate = if user_community[a] == user_community[b] {
                boosted(spec.social_intra, user_group[a] == user_group[b])
            } else {
                spec.social_inter
            };
            if rng.random_bool(rate) {
                clean.push((a, b));
            }
        }
    }
    let clean_social = SocialGraph::undirected(m, clean)?;

    let count = ceil_fraction(spec.noise_ratio, clean_social.num_edges());
    let cross = |a: usize, b: usize| user_community[a] != user_community[b];
    let noise_edges =
        sample_absent_pairs(&clean_social, count, cross, &mut rng).map_err(|available| {
            Error::CannotInject {
                requested: count,
                available,
            }
        })?;
    let noise = NoiseLabels::new(noise_edges.iter().copied());
    let social = SocialGraph::undirected(m, clean_social.undirected_edges().chain(noise_edges))?;

    Ok(SyntheticData {
        interactions: InteractionGraph::from_edges(m, n, interactions)?,
        social,
        clean_social,
        noise,
        user_community,
        item_community,
        user_group,
        item_group,
    })
}
