//! Edge-list files: one `a<TAB>b` pair per line, zero-based, sorted by `(a, b)`.
//! A tensor is a directory of per-slice edge lists plus `manifest.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{SocialGraph, SocialTensor};
use crate::error::{Error, Result};
use crate::manifest::Manifest;

pub fn write_edge_list(path: &Path, pairs: &[(usize, usize)]) -> Result<()> {
    let mut sorted = pairs.to_vec();
    sorted.sort_unstable();
    let mut text = String::with_capacity(sorted.len() * 8);
    for (a, b) in sorted {
        let _ = writeln!(text, "{a}\t{b}");
    }
    fs::write(path, text).map_err(|e| Error::io("graph::write_edge_list", path, e))
}

pub fn read_edge_list(path: &Path) -> Result<Vec<(usize, usize)>> {
    const OP: &str = "graph::read_edge_list";
    let text = fs::read_to_string(path).map_err(|e| Error::io(OP, path, e))?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: &str| Error::Parse {
            op: OP,
            path: path.to_owned(),
            line: idx + 1,
            msg: msg.to_owned(),
        };
        let mut fields = line.split('\t');
        let a = fields.next().and_then(|f| f.trim().parse().ok());
        let b = fields.next().and_then(|f| f.trim().parse().ok());
        match (a, b, fields.next()) {
            (Some(a), Some(b), None) => pairs.push((a, b)),
            _ => return Err(parse_err("expected two tab-separated indices")),
        }
    }
    Ok(pairs)
}

pub fn write_social_graph(path: &Path, graph: &SocialGraph) -> Result<()> {
    write_edge_list(path, &graph.serialized_pairs())
}

pub fn read_social_graph(path: &Path, num_users: usize, directed: bool) -> Result<SocialGraph> {
    let pairs = read_edge_list(path)?;
    if directed {
        let mut rows = vec![Vec::new(); num_users];
        for (u, v) in pairs {
            if u >= num_users {
                return Err(Error::input(
                    "graph::read_social_graph",
                    format!("user {u} outside {num_users}"),
                ));
            }
            rows[u].push(v);
        }
        SocialGraph::directed(rows)
    } else {
        SocialGraph::undirected(num_users, pairs)
    }
}

impl SocialTensor {
    /// Writes `slice_<t>.edges` for every slice (oldest `t = 0`) and `manifest.txt`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        const OP: &str = "graph::SocialTensor::save";
        fs::create_dir_all(dir).map_err(|e| Error::io(OP, dir, e))?;
        let mut manifest = Manifest::new();
        manifest
            .push("tau", self.tau())
            .push("generation", self.generation())
            .push("num_users", self.num_users());
        for (t, slice) in self.slices().enumerate() {
            let name = format!("slice_{t}.edges");
            write_social_graph(&dir.join(&name), slice)?;
            let kind = if slice.is_symmetric() {
                "undirected"
            } else {
                "directed"
            };
            manifest.push("slice", format!("{name} {kind}"));
        }
        manifest.write(OP, &dir.join("manifest.txt"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        const OP: &str = "graph::SocialTensor::load";
        let manifest = Manifest::read(OP, &dir.join("manifest.txt"))?;
        let tau: usize = manifest.require(OP, "tau")?;
        let generation: u64 = manifest.require(OP, "generation")?;
        let num_users: usize = manifest.require(OP, "num_users")?;
        let mut slices = Vec::with_capacity(tau);
        for entry in manifest.get_all("slice") {
            let (name, kind) = entry
                .split_once(' ')
                .ok_or_else(|| Error::input(OP, format!("bad slice entry `{entry}`")))?;
            slices.push(read_social_graph(
                &dir.join(name),
                num_users,
                kind == "directed",
            )?);
        }
        if slices.len() != tau {
            return Err(Error::input(
                OP,
                format!("manifest lists {} slices, tau is {tau}", slices.len()),
            ));
        }
        Self::from_slices(slices, generation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_initial_tensor;

    #[test]
    fn edge_list_lines_are_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.edges");
        write_edge_list(&path, &[(2, 0), (0, 3), (0, 1)]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "0\t1\n0\t3\n2\t0\n");
        assert_eq!(read_edge_list(&path).unwrap(), vec![(0, 1), (0, 3), (2, 0)]);
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.edges");
        fs::write(&path, "0\t1\n1 x\n").unwrap();
        match read_edge_list(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tensor_round_trips_including_directed_slices() {
        let dir = tempfile::tempdir().unwrap();
        let g = SocialGraph::undirected(5, [(0, 1), (1, 2), (3, 4), (0, 4)]).unwrap();
        let t = build_initial_tensor(&g, 2, 0.3, 11).unwrap();
        let directed =
            SocialGraph::directed(vec![vec![1, 2], vec![], vec![0], vec![4], vec![]]).unwrap();
        let t = t.slide_window(directed).unwrap();
        t.save(dir.path()).unwrap();
        assert_eq!(SocialTensor::load(dir.path()).unwrap(), t);
    }
}
