use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::graph::{self, InteractionGraph, SocialGraph};
use crate::manifest::Manifest;
use crate::rng::{self, streams};

/// Candidate negatives ranked against each held-out positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeSampling {
    /// Up to this many items drawn without replacement from the non-interacted ones.
    Sampled(usize),
    /// Every non-interacted item (full ranking).
    All,
}

impl Default for NegativeSampling {
    fn default() -> Self {
        NegativeSampling::Sampled(99)
    }
}

impl fmt::Display for NegativeSampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegativeSampling::Sampled(n) => write!(f, "{n}"),
            NegativeSampling::All => f.write_str("all"),
        }
    }
}

impl FromStr for NegativeSampling {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "all" => Ok(NegativeSampling::All),
            n => n
                .parse()
                .map(NegativeSampling::Sampled)
                .map_err(|_| format!("expected a count or `all`, got `{n}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    /// Train share of each user's interactions, in (0, 1).
    pub ratio: f64,
    pub negatives: NegativeSampling,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratio: 0.7,
            negatives: NegativeSampling::default(),
            seed: 0,
        }
    }
}

/// Train graph plus the leave-one-out evaluation protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: InteractionGraph,
    /// Held-out positive per user; `None` excludes the user from evaluation.
    pub test_positive: Vec<Option<usize>>,
    /// Test-portion items beyond the retained positive. Recorded, never ranked.
    pub test_rest: Vec<Vec<usize>>,
    /// Candidate negatives per user, disjoint from all of the user's interactions.
    pub negatives: Vec<Vec<usize>>,
    pub social: SocialGraph,
    pub split: SplitConfig,
}

impl Dataset {
    pub fn num_users(&self) -> usize {
        self.train.num_users()
    }

    pub fn num_items(&self) -> usize {
        self.train.num_items()
    }

    /// Users with a held-out positive.
    pub fn eval_users(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.test_positive
            .iter()
            .enumerate()
            .filter_map(|(u, p)| p.map(|p| (u, p)))
    }

    /// Same dataset with a different social graph.
    pub fn with_social(&self, social: SocialGraph) -> Result<Self> {
        if social.num_users() != self.num_users() {
            return Err(Error::input(
                "ingest::Dataset::with_social",
                format!(
                    "social graph has {} users, dataset has {}",
                    social.num_users(),
                    self.num_users()
                ),
            ));
        }
        Ok(Self {
            social,
            ..self.clone()
        })
    }
}

/// Per-user split: shuffle, keep `round(ratio * deg)` items (at least one, at
/// most `deg - 1`) for training and retain one random test item as the
/// leave-one-out positive. Users with fewer than two interactions stay fully
/// in training and are not evaluated.
pub fn split_dataset(
    interactions: &InteractionGraph,
    social: &SocialGraph,
    config: SplitConfig,
) -> Result<Dataset> {
    const OP: &str = "ingest::split_dataset";
    if !(config.ratio > 0.0 && config.ratio < 1.0) {
        return Err(Error::config(
            OP,
            format!("split ratio {} outside (0, 1)", config.ratio),
        ));
    }
    if social.num_users() != interactions.num_users() {
        return Err(Error::input(
            OP,
            format!(
                "social graph has {} users, interactions have {}",
                social.num_users(),
                interactions.num_users()
            ),
        ));
    }
    let m = interactions.num_users();
    let n = interactions.num_items();
    let mut split_rng = rng::seeded(config.seed, streams::SPLIT);
    let mut neg_rng = rng::seeded(config.seed, streams::NEGATIVES);

    let mut train_edges = Vec::with_capacity(interactions.num_edges());
    let mut test_positive = vec![None; m];
    let mut test_rest = vec![Vec::new(); m];
    let mut negatives = vec![Vec::new(); m];

    for u in 0..m {
        let mut items = interactions.items_of(u).to_vec();
        let deg = items.len();
        if deg < 2 {
            train_edges.extend(items.iter().map(|&i| (u, i)));
            continue;
        }
        items.shuffle(&mut split_rng);
        let n_train = ((config.ratio * deg as f64).round() as usize).clamp(1, deg - 1);
        train_edges.extend(items[..n_train].iter().map(|&i| (u, i)));
        let mut rest = items[n_train..].to_vec();
        test_positive[u] = Some(rest.remove(0));
        rest.sort_unstable();
        test_rest[u] = rest;

        let candidates: Vec<usize> = (0..n).filter(|&i| !interactions.contains(u, i)).collect();
        negatives[u] = match config.negatives {
            NegativeSampling::Sampled(k) if k < candidates.len() => {
                let mut picked: Vec<usize> = index::sample(&mut neg_rng, candidates.len(), k)
                    .into_iter()
                    .map(|j| candidates[j])
                    .collect();
                picked.sort_unstable();
                picked
            }
            _ => candidates,
        };
    }

    Ok(Dataset {
        train: InteractionGraph::from_edges(m, n, train_edges)?,
        test_positive,
        test_rest,
        negatives,
        social: social.clone(),
        split: config,
    })
}

impl Dataset {
    /// Writes the dataset directory: `train.edges`, `social.edges`, `test.edges`
    /// (user, positive), `test_rest.edges`, `negatives.edges` and `manifest.txt`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        const OP: &str = "ingest::Dataset::save";
        fs::create_dir_all(dir).map_err(|e| Error::io(OP, dir, e))?;
        let train: Vec<_> = self.train.edges().collect();
        graph::write_edge_list(&dir.join("train.edges"), &train)?;
        graph::write_social_graph(&dir.join("social.edges"), &self.social)?;
        let test: Vec<_> = self.eval_users().collect();
        graph::write_edge_list(&dir.join("test.edges"), &test)?;
        let rest: Vec<_> = pairs_of(&self.test_rest);
        graph::write_edge_list(&dir.join("test_rest.edges"), &rest)?;
        graph::write_edge_list(&dir.join("negatives.edges"), &pairs_of(&self.negatives))?;

        let mut manifest = Manifest::new();
        manifest
            .push("num_users", self.num_users())
            .push("num_items", self.num_items())
            .push("seed", self.split.seed)
            .push("ratio", self.split.ratio)
            .push("negatives_per_user", self.split.negatives)
            .push("train_interactions", train.len())
            .push("eval_users", test.len())
            .push("social_edges", self.social.num_edges())
            .push("social_directed", !self.social.is_symmetric());
        manifest.write(OP, &dir.join("manifest.txt"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        const OP: &str = "ingest::Dataset::load";
        let manifest = Manifest::read(OP, &dir.join("manifest.txt"))?;
        let m: usize = manifest.require(OP, "num_users")?;
        let n: usize = manifest.require(OP, "num_items")?;
        let negatives_mode: NegativeSampling = manifest
            .get("negatives_per_user")
            .unwrap_or("99")
            .parse()
            .map_err(|e: String| Error::input(OP, e))?;
        let split = SplitConfig {
            ratio: manifest.require(OP, "ratio")?,
            negatives: negatives_mode,
            seed: manifest.require(OP, "seed")?,
        };
        let directed = manifest.get("social_directed") == Some("true");

        let train =
            InteractionGraph::from_edges(m, n, graph::read_edge_list(&dir.join("train.edges"))?)?;
        let social = graph::read_social_graph(&dir.join("social.edges"), m, directed)?;
        let mut test_positive = vec![None; m];
        for (u, i) in graph::read_edge_list(&dir.join("test.edges"))? {
            check_index(OP, u, m, i, n)?;
            test_positive[u] = Some(i);
        }
        let test_rest = rows_of(
            OP,
            graph::read_edge_list(&dir.join("test_rest.edges"))?,
            m,
            n,
        )?;
        let negatives = rows_of(
            OP,
            graph::read_edge_list(&dir.join("negatives.edges"))?,
            m,
            n,
        )?;
        Ok(Self {
            train,
            test_positive,
            test_rest,
            negatives,
            social,
            split,
        })
    }
}

fn pairs_of(rows: &[Vec<usize>]) -> Vec<(usize, usize)> {
    rows.iter()
        .enumerate()
        .flat_map(|(u, row)| row.iter().map(move |&i| (u, i)))
        .collect()
}

fn rows_of(
    op: &'static str,
    pairs: Vec<(usize, usize)>,
    m: usize,
    n: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut rows = vec![Vec::new(); m];
    for (u, i) in pairs {
        check_index(op, u, m, i, n)?;
        rows[u].push(i);
    }
    Ok(rows)
}

fn check_index(op: &'static str, u: usize, m: usize, i: usize, n: usize) -> Result<()> {
    if u >= m || i >= n {
        return Err(Error::input(op, format!("pair ({u}, {i}) outside {m}x{n}")));
    }
    Ok(())
}
