use std::collections::VecDeque;

use super::{random_perturb, SocialGraph};
use crate::error::{Error, Result};

/// Fixed-length window of social graph slices, oldest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialTensor {
    slices: VecDeque<SocialGraph>,
    generation: u64,
}

/// Initial window: `tau - 1` independently perturbed copies of `graph`
/// followed by `graph` itself as the newest slice.
pub fn build_initial_tensor(
    graph: &SocialGraph,
    tau: usize,
    p: f64,
    seed: u64,
) -> Result<SocialTensor> {
    if tau == 0 {
        return Err(Error::config(
            "graph::build_initial_tensor",
            "window size tau must be at least 1",
        ));
    }
    let mut slices = VecDeque::with_capacity(tau);
    for t in 0..tau - 1 {
        slices.push_back(random_perturb(graph, p, seed.wrapping_add(t as u64))?);
    }
    slices.push_back(graph.clone());
    Ok(SocialTensor {
        slices,
        generation: 0,
    })
}

impl SocialTensor {
    /// Window from explicit slices, oldest first.
    pub fn from_slices(slices: Vec<SocialGraph>, generation: u64) -> Result<Self> {
        const OP: &str = "graph::SocialTensor";
        let Some(first) = slices.first() else {
            return Err(Error::config(OP, "a tensor needs at least one slice"));
        };
        let m = first.num_users();
        if slices.iter().any(|s| s.num_users() != m) {
            return Err(Error::InvalidSlice {
                op: OP,
                msg: "slices disagree on the number of users".into(),
            });
        }
        Ok(Self {
            slices: slices.into(),
            generation,
        })
    }

    pub fn tau(&self) -> usize {
        self.slices.len()
    }

    /// Number of slides applied since construction.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn num_users(&self) -> usize {
        self.slices[0].num_users()
    }

    /// Slices oldest first.
    pub fn slices(&self) -> impl ExactSizeIterator<Item = &SocialGraph> + '_ {
        self.slices.iter()
    }

    pub fn slice(&self, t: usize) -> &SocialGraph {
        &self.slices[t]
    }

    pub fn newest(&self) -> &SocialGraph {
        self.slices.back().expect("tensor is never empty")
    }

    /// Evicts the oldest slice and appends `new_slice` as the newest.
    pub fn slide_window(mut self, new_slice: SocialGraph) -> Result<Self> {
        if new_slice.num_users() != self.num_users() {
            return Err(Error::InvalidSlice {
                op: "graph::slide_window",
                msg: format!(
                    "slice has {} users, tensor has {}",
                    new_slice.num_users(),
                    self.num_users()
                ),
            });
        }
        self.slices.pop_front();
        self.slices.push_back(new_slice);
        self.generation += 1;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(usize, usize)]) -> SocialGraph {
        SocialGraph::undirected(6, edges.iter().copied()).unwrap()
    }

    #[test]
    fn zero_tau_is_rejected() {
        assert!(build_initial_tensor(&graph(&[(0, 1)]), 0, 0.0, 0).is_err());
    }

    #[test]
    fn single_slice_window_is_the_input() {
        let g = graph(&[(0, 1), (2, 3)]);
        let t = build_initial_tensor(&g, 1, 0.5, 1).unwrap();
        assert_eq!(t.tau(), 1);
        assert_eq!(t.newest(), &g);
        assert_eq!(t.generation(), 0);
    }

    #[test]
    fn zero_probability_gives_identical_slices() {
        let g = graph(&[(0, 1), (2, 3), (4, 5)]);
        let t = build_initial_tensor(&g, 3, 0.0, 1).unwrap();
        assert!(t.slices().all(|s| s == &g));
    }

    #[test]
    fn slide_evicts_oldest() {
        let [a, b, c, d] = [(0, 1), (1, 2), (2, 3), (3, 4)].map(|e| graph(&[e]));
        let t = SocialTensor::from_slices(vec![a, b.clone(), c.clone()], 0).unwrap();
        let t = t.slide_window(d.clone()).unwrap();
        assert_eq!(t.slices().cloned().collect::<Vec<_>>(), vec![b, c, d]);
        assert_eq!(t.generation(), 1);
    }

    #[test]
    fn degenerate_window_replaces_its_only_slice() {
        let [a, b] = [(0, 1), (1, 2)].map(|e| graph(&[e]));
        let t = SocialTensor::from_slices(vec![a], 0).unwrap();
        let t = t.slide_window(b.clone()).unwrap();
        assert_eq!(t.newest(), &b);
        assert_eq!(t.tau(), 1);
    }

    #[test]
    fn repeated_pushes_reach_a_fixed_point() {
        let g = graph(&[(0, 1)]);
        let z = graph(&[(4, 5)]);
        let mut t = build_initial_tensor(&g, 3, 0.3, 5).unwrap();
        for _ in 0..3 {
            t = t.slide_window(z.clone()).unwrap();
        }
        assert!(t.slices().all(|s| s == &z));
    }

    #[test]
    fn mismatched_slice_is_rejected() {
        let t = build_initial_tensor(&graph(&[(0, 1)]), 2, 0.0, 0).unwrap();
        let err = t.slide_window(SocialGraph::empty(3)).unwrap_err();
        assert!(matches!(err, Error::InvalidSlice { .. }));
    }
}
