use std::collections::HashSet;

use rand::Rng as _;
use rand_distr::{Binomial, Distribution};

use super::SocialGraph;
use crate::error::{Error, Result};
use crate::rng::{self, streams, Rng};

/// Edge-level random augmentation: every existing undirected edge is dropped
/// with `delete_prob`, then `Binomial(|E|, add_prob)` new edges are drawn
/// uniformly from the pairs absent in the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub delete_prob: f64,
    pub add_prob: f64,
}

impl Perturbation {
    /// Density-neutral perturbation: expected additions equal expected deletions.
    pub fn balanced(p: f64) -> Self {
        Self {
            delete_prob: p,
            add_prob: p,
        }
    }
}

/// Perturbs an undirected graph with [`Perturbation::balanced`]`(p)`.
pub fn random_perturb(graph: &SocialGraph, p: f64, seed: u64) -> Result<SocialGraph> {
    let mut rng = rng::seeded(seed, streams::PERTURB);
    random_perturb_with(graph, Perturbation::balanced(p), &mut rng)
}

pub fn random_perturb_with(
    graph: &SocialGraph,
    perturbation: Perturbation,
    rng: &mut Rng,
) -> Result<SocialGraph> {
    const OP: &str = "graph::random_perturb";
    let Perturbation {
        delete_prob,
        add_prob,
    } = perturbation;
    for p in [delete_prob, add_prob] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config(OP, format!("probability {p} outside [0, 1]")));
        }
    }
    if !graph.is_symmetric() {
        return Err(Error::input(OP, "perturbation needs an undirected graph"));
    }

    let edges: Vec<(usize, usize)> = graph.undirected_edges().collect();
    let mut kept = Vec::with_capacity(edges.len());
    for &e in &edges {
        if !rng.random_bool(delete_prob) {
            kept.push(e);
        }
    }

    let additions = if edges.is_empty() || add_prob == 0.0 {
        0
    } else {
        let draw = Binomial::new(edges.len() as u64, add_prob)
            .map_err(|e| Error::config(OP, e.to_string()))?;
        draw.sample(rng) as usize
    };
    let added = match sample_absent_pairs(graph, additions, |_, _| true, rng) {
        Ok(pairs) => pairs,
        // Near-complete graph: add whatever is left.
        Err(available) => sample_absent_pairs(graph, available, |_, _| true, rng)
            .expect("sampling the available count succeeds"),
    };
    kept.extend(added);
    SocialGraph::undirected(graph.num_users(), kept)
}

/// Draws `count` distinct pairs `(a, b)`, `a < b`, absent from `graph` and
/// accepted by `accept`, uniformly among all such pairs.
///
/// On failure returns the number of pairs that were available.
pub(crate) fn sample_absent_pairs<F>(
    graph: &SocialGraph,
    count: usize,
    accept: F,
    rng: &mut Rng,
) -> std::result::Result<Vec<(usize, usize)>, usize>
where
    F: Fn(usize, usize) -> bool,
{
    let m = graph.num_users();
    if count == 0 {
        return Ok(Vec::new());
    }
    if m < 2 {
        return Err(0);
    }
    let valid = |a: usize, b: usize| a != b && !graph.contains(a, b) && accept(a, b);

    // Rejection sampling is uniform over valid pairs; fall back to full
    // enumeration when valid pairs are too scarce for it to finish quickly.
    let budget = 64 * count + 4096;
    let mut chosen = HashSet::with_capacity(count);
    let mut picked = Vec::with_capacity(count);
    for _ in 0..budget {
        let a = rng.random_range(0..m);
        let b = rng.random_range(0..m);
        let pair = (a.min(b), a.max(b));
        if valid(pair.0, pair.1) && chosen.insert(pair) {
            picked.push(pair);
            if picked.len() == count {
                return Ok(picked);
            }
        }
    }

    let mut pool: Vec<(usize, usize)> = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .filter(|&(a, b)| valid(a, b))
        .collect();
    if pool.len() < count {
        return Err(pool.len());
    }
    // Partial Fisher-Yates.
    for k in 0..count {
        let j = rng.random_range(k..pool.len());
        pool.swap(k, j);
    }
    pool.truncate(count);
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(m: usize) -> SocialGraph {
        SocialGraph::undirected(m, (0..m).map(|u| (u, (u + 1) % m))).unwrap()
    }

    #[test]
    fn zero_probability_is_identity() {
        let g = ring(30);
        assert_eq!(random_perturb(&g, 0.0, 7).unwrap(), g);
    }

    #[test]
    fn certain_deletion_without_additions_empties_graph() {
        let g = ring(30);
        let mut r = rng::seeded(1, 0);
        let out = random_perturb_with(
            &g,
            Perturbation {
                delete_prob: 1.0,
                add_prob: 0.0,
            },
            &mut r,
        )
        .unwrap();
        assert_eq!(out.num_edges(), 0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let g = ring(50);
        assert_eq!(
            random_perturb(&g, 0.2, 99).unwrap(),
            random_perturb(&g, 0.2, 99).unwrap()
        );
    }

    #[test]
    fn output_stays_symmetric_and_loop_free() {
        let g = ring(40);
        let out = random_perturb(&g, 0.5, 3).unwrap();
        assert!(out.is_symmetric());
        for (a, b) in out.arcs() {
            assert_ne!(a, b);
            assert!(out.contains(b, a));
        }
    }

    #[test]
    fn rejects_bad_probability_and_directed_input() {
        assert!(random_perturb(&ring(5), 1.5, 0).is_err());
        let d = SocialGraph::directed(vec![vec![1], vec![]]).unwrap();
        assert!(random_perturb(&d, 0.1, 0).is_err());
    }

    #[test]
    fn absent_pairs_fall_back_to_enumeration_on_dense_graphs() {
        // complete graph on 6 minus one edge: exactly one absent pair
        let edges: Vec<_> = (0..6)
            .flat_map(|a| (a + 1..6).map(move |b| (a, b)))
            .filter(|&e| e != (2, 4))
            .collect();
        let g = SocialGraph::undirected(6, edges).unwrap();
        let mut r = rng::seeded(0, 0);
        assert_eq!(
            sample_absent_pairs(&g, 1, |_, _| true, &mut r),
            Ok(vec![(2, 4)])
        );
        assert_eq!(sample_absent_pairs(&g, 2, |_, _| true, &mut r), Err(1));
    }
}
