use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{InteractionGraph, SocialGraph};

/// Dense index <-> raw id table produced by compaction. Dense indices follow
/// ascending raw id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    raw: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl IdMap {
    fn from_raw(mut raw: Vec<u64>) -> Self {
        raw.sort_unstable();
        raw.dedup();
        let index = raw.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        Self { raw, index }
    }

    /// Identity table over `0..n`.
    pub fn identity(n: usize) -> Self {
        Self::from_raw((0..n as u64).collect())
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn index_of(&self, raw: u64) -> Option<usize> {
        self.index.get(&raw).copied()
    }

    pub fn raw_id(&self, index: usize) -> u64 {
        self.raw[index]
    }

    /// Two-column TSV: `dense<TAB>raw`.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for (i, r) in self.raw.iter().enumerate() {
            let _ = writeln!(text, "{i}\t{r}");
        }
        fs::write(path, text).map_err(|e| Error::io("ingest::IdMap::write_tsv", path, e))
    }
}

#[derive(Debug, Clone)]
pub struct LoadedInteractions {
    pub graph: InteractionGraph,
    pub users: IdMap,
    pub items: IdMap,
}

#[derive(Debug, Clone)]
pub struct LoadedSocial {
    pub graph: SocialGraph,
    pub users: IdMap,
    pub dropped_self_loops: usize,
    /// Pairs naming a user outside the supplied id table.
    pub dropped_unknown: usize,
}

fn read_pairs(op: &'static str, path: &Path) -> Result<Vec<(u64, u64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(op, path, e))?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let a = fields.next().and_then(|f| f.parse::<u64>().ok());
        let b = fields.next().and_then(|f| f.parse::<u64>().ok());
        match (a, b) {
            (Some(a), Some(b)) => pairs.push((a, b)),
            _ => {
                return Err(Error::Parse {
                    op,
                    path: path.to_owned(),
                    line: idx + 1,
                    msg: format!("expected two integer ids, got `{line}`"),
                })
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDataset {
            op,
            msg: format!("{} holds no pairs", path.display()),
        });
    }
    Ok(pairs)
}

/// Reads `user<TAB>item[<TAB>rating]` lines. Any listed pair counts as an
/// interaction; ratings are ignored.
pub fn load_interactions(path: &Path) -> Result<LoadedInteractions> {
    const OP: &str = "ingest::load_interactions";
    let pairs = read_pairs(OP, path)?;
    let users = IdMap::from_raw(pairs.iter().map(|p| p.0).collect());
    let items = IdMap::from_raw(pairs.iter().map(|p| p.1).collect());
    let edges = pairs.iter().map(|&(u, i)| {
        (
            users.index_of(u).expect("id collected above"),
            items.index_of(i).expect("id collected above"),
        )
    });
    let graph = InteractionGraph::from_edges(users.len(), items.len(), edges)?;
    Ok(LoadedInteractions {
        graph,
        users,
        items,
    })
}

/// Reads `user<TAB>user` lines into an undirected graph over its own compacted ids.
pub fn load_social(path: &Path) -> Result<LoadedSocial> {
    let pairs = read_pairs("ingest::load_social", path)?;
    let users = IdMap::from_raw(pairs.iter().flat_map(|&(a, b)| [a, b]).collect());
    build_social(pairs, users)
}

/// Like [`load_social`] but indexes users through an existing table (normally the
/// interaction file's), so both graphs share user indices. Unknown ids are dropped.
pub fn load_social_for_users(path: &Path, users: &IdMap) -> Result<LoadedSocial> {
    let pairs = read_pairs("ingest::load_social", path)?;
    build_social(pairs, users.clone())
}

fn build_social(pairs: Vec<(u64, u64)>, users: IdMap) -> Result<LoadedSocial> {
    let mut dropped_self_loops = 0;
    let mut dropped_unknown = 0;
    let mut edges = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        match (users.index_of(a), users.index_of(b)) {
            (Some(x), Some(y)) if x == y => dropped_self_loops += 1,
            (Some(x), Some(y)) => edges.push((x, y)),
            _ => dropped_unknown += 1,
        }
    }
    if dropped_self_loops > 0 {
        log::warn!("ingest::load_social: dropped {dropped_self_loops} self-loops");
    }
    if dropped_unknown > 0 {
        log::warn!("ingest::load_social: dropped {dropped_unknown} pairs with unknown users");
    }
    let graph = SocialGraph::undirected(users.len(), edges)?;
    Ok(LoadedSocial {
        graph,
        users,
        dropped_self_loops,
        dropped_unknown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(contents: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.tsv");
        fs::write(&path, contents).unwrap();
        (dir, path)
    }

    #[test]
    fn reads_plain_interactions() {
        let (_d, p) = file("0\t0\n0\t1\n1\t0\n");
        let loaded = load_interactions(&p).unwrap();
        assert_eq!(loaded.graph.num_users(), 2);
        assert_eq!(loaded.graph.num_items(), 2);
        assert_eq!(loaded.graph.num_edges(), 3);
    }

    #[test]
    fn duplicates_collapse_and_ratings_are_ignored() {
        let (_d, p) = file("0\t0\t5\n0\t0\t3\n");
        assert_eq!(load_interactions(&p).unwrap().graph.num_edges(), 1);
    }

    #[test]
    fn raw_ids_are_compacted_and_persisted() {
        let (dir, p) = file("900\t7\n10\t7\n");
        let loaded = load_interactions(&p).unwrap();
        assert_eq!(loaded.users.index_of(10), Some(0));
        assert_eq!(loaded.users.index_of(900), Some(1));
        let out = dir.path().join("users.tsv");
        loaded.users.write_tsv(&out).unwrap();
        assert_eq!(fs::read_to_string(out).unwrap(), "0\t10\n1\t900\n");
    }

    #[test]
    fn malformed_and_empty_files_fail() {
        let (_d, p) = file("0\t1\nfoo\n");
        assert!(matches!(
            load_interactions(&p),
            Err(Error::Parse { line: 2, .. })
        ));
        let (_d, p) = file("\n\n");
        assert!(matches!(
            load_interactions(&p),
            Err(Error::EmptyDataset { .. })
        ));
    }

    #[test]
    fn social_is_symmetrized() {
        let (_d, p) = file("0\t1\n");
        let s = load_social(&p).unwrap();
        assert_eq!(s.graph.neighbors(0), &[1]);
        assert_eq!(s.graph.neighbors(1), &[0]);
    }

    #[test]
    fn social_self_loops_are_dropped_and_counted() {
        let (_d, p) = file("0\t0\n");
        let s = load_social(&p).unwrap();
        assert_eq!(s.graph.num_edges(), 0);
        assert_eq!(s.dropped_self_loops, 1);
    }

    #[test]
    fn social_reverse_pairs_union_into_one_edge() {
        let (_d, p) = file("0\t1\n1\t0\n");
        assert_eq!(load_social(&p).unwrap().graph.num_edges(), 1);
    }

    #[test]
    fn social_can_share_interaction_user_ids() {
        let (_d, p) = file("10\t900\n10\t5\n");
        let users = IdMap::from_raw(vec![10, 900]);
        let s = load_social_for_users(&p, &users).unwrap();
        assert_eq!(s.graph.neighbors(0), &[1]);
        assert_eq!(s.dropped_unknown, 1);
    }
}
