//! Leave-one-out ranking metrics and the noise-robustness comparison.

mod robustness;

pub use robustness::{dec_percent, robustness_harness, RobustnessRow, RobustnessTable};

use std::io::Write as _;
use std::path::Path;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::Dataset;

/// Rank of the held-out positive among itself and `negatives`. Negatives tied
/// with the positive count as ranked above it.
pub fn rank_candidates(
    user: ArrayView2<'_, f64>,
    items: ArrayView2<'_, f64>,
    positive: usize,
    negatives: &[usize],
) -> Result<usize> {
    const OP: &str = "eval::rank_candidates";
    if user.nrows() != 1 || user.ncols() != items.ncols() {
        return Err(Error::input(
            OP,
            "user must be a single row matching the item width",
        ));
    }
    if negatives.contains(&positive) {
        return Err(Error::input(
            OP,
            format!("positive {positive} is among the negatives"),
        ));
    }
    if negatives.is_empty() {
        log::debug!("{OP}: no negatives, rank is trivially 1");
    }
    let u = user.row(0);
    let target = u.dot(&items.row(positive));
    Ok(1 + negatives
        .iter()
        .filter(|&&i| u.dot(&items.row(i)) >= target)
        .count())
}

/// Share of ranks within the top `n`.
pub fn hit_ratio(ranks: &[usize], n: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().filter(|&&r| r <= n).count() as f64 / ranks.len() as f64
}

/// Mean of `1 / log2(rank + 1)` over ranks within the top `n`, zero otherwise.
pub fn ndcg(ranks: &[usize], n: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks
        .iter()
        .filter(|&&r| r <= n)
        .map(|&r| 1.0 / ((r + 1) as f64).log2())
        .sum::<f64>()
        / ranks.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub hr1: f64,
    pub hr3: f64,
    pub ndcg3: f64,
    pub users: usize,
    /// `(user, rank)` for every evaluated user.
    #[serde(skip)]
    pub ranks: Vec<(usize, usize)>,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "hr1,hr3,ndcg3";

    pub fn from_ranks(ranks: Vec<(usize, usize)>) -> Self {
        let r: Vec<usize> = ranks.iter().map(|&(_, r)| r).collect();
        Self {
            hr1: hit_ratio(&r, 1),
            hr3: hit_ratio(&r, 3),
            ndcg3: ndcg(&r, 3),
            users: r.len(),
            ranks,
        }
    }

    pub fn hr_at(&self, n: usize) -> f64 {
        hit_ratio(&self.rank_values(), n)
    }

    pub fn ndcg_at(&self, n: usize) -> f64 {
        ndcg(&self.rank_values(), n)
    }

    fn rank_values(&self) -> Vec<usize> {
        self.ranks.iter().map(|&(_, r)| r).collect()
    }

    pub fn csv_fields(&self) -> String {
        format!("{},{},{}", self.hr1, self.hr3, self.ndcg3)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric report serializes")
    }

    /// Per-user rank dump: `user,rank`.
    pub fn write_ranks(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "user,rank").expect("write to vec");
        for (u, r) in &self.ranks {
            writeln!(out, "{u},{r}").expect("write to vec");
        }
        std::fs::write(path, out).map_err(|e| Error::io("eval::write_ranks", path, e))
    }
}

/// Ranks every evaluable user's held-out positive against its negatives.
pub fn evaluate(
    dataset: &Dataset,
    users: ArrayView2<'_, f64>,
    items: ArrayView2<'_, f64>,
) -> Result<MetricReport> {
    if users.nrows() != dataset.num_users() || items.nrows() != dataset.num_items() {
        return Err(Error::input(
            "eval::evaluate",
            "embedding rows do not match the dataset",
        ));
    }
    let pairs: Vec<(usize, usize)> = dataset.eval_users().collect();
    let ranks = pairs
        .par_iter()
        .map(|&(u, pos)| {
            let row = users.slice(ndarray::s![u..u + 1, ..]);
            rank_candidates(row, items, pos, &dataset.negatives[u]).map(|r| (u, r))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::from_ranks(ranks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn ranks_are_pessimistic() {
        let u = array![[1.0]];
        let items = array![[0.5], [0.5], [0.9], [0.1]];
        assert_eq!(
            rank_candidates(u.view(), items.view(), 2, &[0, 3]).unwrap(),
            1
        );
        assert_eq!(
            rank_candidates(u.view(), items.view(), 0, &[1, 3]).unwrap(),
            2
        );
        assert_eq!(rank_candidates(u.view(), items.view(), 0, &[]).unwrap(), 1);
        assert!(rank_candidates(u.view(), items.view(), 0, &[0]).is_err());
    }

    #[test]
    fn three_of_ninety_nine_above() {
        let u = array![[1.0]];
        let items = Array2::from_shape_fn((100, 1), |(i, _)| match i {
            0 => 0.5,
            1..=3 => 0.9,
            _ => 0.1,
        });
        let negs: Vec<usize> = (1..100).collect();
        assert_eq!(
            rank_candidates(u.view(), items.view(), 0, &negs).unwrap(),
            4
        );
    }

    #[test]
    fn metric_examples() {
        assert_eq!(hit_ratio(&[1, 1], 3), 1.0);
        assert_eq!(ndcg(&[1, 1], 3), 1.0);
        assert!((ndcg(&[2], 3) - 0.630_929_753_571_457_4).abs() < 1e-15);
        assert!((hit_ratio(&[1, 2, 4], 3) - 2.0 / 3.0).abs() < 1e-15);
        assert!((ndcg(&[1, 2, 4], 3) - 0.543_643_251_190_485_8).abs() < 1e-12);
    }

    #[test]
    fn report_fields() {
        let r = MetricReport::from_ranks(vec![(0, 1), (1, 2), (2, 4)]);
        assert_eq!(r.hr1, 1.0 / 3.0);
        assert_eq!(r.ndcg_at(1), r.hr1);
        assert_eq!(r.hr_at(4), 1.0);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["users"], 3);
    }
}
