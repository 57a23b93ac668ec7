//! Sparse user-item and user-user graphs, their symmetric normalization,
//! random perturbation, and the sliding-window social tensor.

mod io;
mod normalize;
mod perturb;
mod tensor;

pub use io::{read_edge_list, read_social_graph, write_edge_list, write_social_graph};
pub use normalize::{symmetric_normalize, Adjacency, NormalizedAdjacency};
pub(crate) use perturb::sample_absent_pairs;
pub use perturb::{random_perturb, random_perturb_with, Perturbation};
pub use tensor::{build_initial_tensor, SocialTensor};

use crate::error::{Error, Result};

/// Implicit-feedback bipartite graph between `num_users` users and `num_items` items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionGraph {
    num_users: usize,
    num_items: usize,
    user_items: Vec<Vec<usize>>,
    item_users: Vec<Vec<usize>>,
}

impl InteractionGraph {
    /// Builds the graph from `(user, item)` pairs. Duplicate pairs collapse.
    pub fn from_edges<I>(num_users: usize, num_items: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut user_items = vec![Vec::new(); num_users];
        for (u, i) in edges {
            if u >= num_users || i >= num_items {
                return Err(Error::input(
                    "graph::InteractionGraph",
                    format!("edge ({u}, {i}) outside {num_users}x{num_items}"),
                ));
            }
            user_items[u].push(i);
        }
        let mut item_users = vec![Vec::new(); num_items];
        for (u, items) in user_items.iter_mut().enumerate() {
            items.sort_unstable();
            items.dedup();
            for &i in items.iter() {
                item_users[i].push(u);
            }
        }
        Ok(Self {
            num_users,
            num_items,
            user_items,
            item_users,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_edges(&self) -> usize {
        self.user_items.iter().map(Vec::len).sum()
    }

    /// Sorted items of user `u`.
    pub fn items_of(&self, u: usize) -> &[usize] {
        &self.user_items[u]
    }

    /// Sorted users of item `i`.
    pub fn users_of(&self, i: usize) -> &[usize] {
        &self.item_users[i]
    }

    pub fn contains(&self, u: usize, i: usize) -> bool {
        self.user_items
            .get(u)
            .is_some_and(|items| items.binary_search(&i).is_ok())
    }

    /// Edges in `(user, item)` lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.user_items
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (u, i)))
    }
}

/// User-user relation graph stored as one sorted neighbor row per user.
///
/// Undirected graphs keep `v in row(u) <=> u in row(v)`. Enhanced slices replace
/// each row independently and are stored directed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialGraph {
    neighbors: Vec<Vec<usize>>,
    symmetric: bool,
}

impl SocialGraph {
    /// Graph with `num_users` users and no relations.
    pub fn empty(num_users: usize) -> Self {
        Self {
            neighbors: vec![Vec::new(); num_users],
            symmetric: true,
        }
    }

    /// Undirected graph from unordered pairs; `(a, b)` and `(b, a)` are the same edge.
    pub fn undirected<I>(num_users: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut neighbors = vec![Vec::new(); num_users];
        for (a, b) in edges {
            check_pair("graph::SocialGraph::undirected", num_users, a, b)?;
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for row in &mut neighbors {
            row.sort_unstable();
            row.dedup();
        }
        Ok(Self {
            neighbors,
            symmetric: true,
        })
    }

    /// Directed graph from one out-neighbor row per user.
    pub fn directed(rows: Vec<Vec<usize>>) -> Result<Self> {
        let num_users = rows.len();
        let mut neighbors = rows;
        for (u, row) in neighbors.iter_mut().enumerate() {
            for &v in row.iter() {
                check_pair("graph::SocialGraph::directed", num_users, u, v)?;
            }
            row.sort_unstable();
            row.dedup();
        }
        Ok(Self {
            neighbors,
            symmetric: false,
        })
    }

    /// Symmetric closure of this graph: `u ~ v` whenever either row holds the other.
    pub fn symmetrize_union(&self) -> Self {
        let edges = self.arcs().collect::<Vec<_>>();
        Self::undirected(self.num_users(), edges).expect("arcs of a valid graph are valid")
    }

    pub fn num_users(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Sorted neighbor row of `u` (the observed friend set).
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.neighbors[u].len()
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.neighbors
            .get(u)
            .is_some_and(|row| row.binary_search(&v).is_ok())
    }

    /// Number of stored `(u, v)` row entries.
    pub fn num_arcs(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    /// Undirected edge count for symmetric graphs, arc count otherwise.
    pub fn num_edges(&self) -> usize {
        if self.symmetric {
            self.num_arcs() / 2
        } else {
            self.num_arcs()
        }
    }

    /// Every stored row entry `(u, v)` in lexicographic order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().map(move |&v| (u, v)))
    }

    /// Each undirected edge once as `(a, b)` with `a < b`. Only meaningful for
    /// symmetric graphs; for directed graphs this yields the arcs with `u < v`.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.arcs().filter(|&(a, b)| a < b)
    }

    /// Lines of the edge-list serialization: undirected edges once, directed arcs all.
    pub fn serialized_pairs(&self) -> Vec<(usize, usize)> {
        if self.symmetric {
            self.undirected_edges().collect()
        } else {
            self.arcs().collect()
        }
    }
}

fn check_pair(op: &'static str, num_users: usize, a: usize, b: usize) -> Result<()> {
    if a >= num_users || b >= num_users {
        return Err(Error::input(
            op,
            format!("edge ({a}, {b}) outside {num_users} users"),
        ));
    }
    if a == b {
        return Err(Error::input(op, format!("self-loop on user {a}")));
    }
    Ok(())
}
