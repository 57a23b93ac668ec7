//! Posterior scoring of unobserved users, potential-friend selection, fusion
//! of observed and potential friends into the next social slice, and a Monte
//! Carlo check of the order-statistic densities behind the posterior.

mod fusion;
mod order_stat;

pub use fusion::{
    build_enhanced_slice, fuse, score_candidates, select_potential_friends, ChangeRow,
    FusionResult, UserFusion,
};
pub use order_stat::{
    order_statistic_check, BaseDistribution, CheckOutcome, HistogramRow, OrderStatReport,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SocialGraph;

/// Score of one unobserved user `v` for an anchor `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub user: usize,
    /// Social similarity of `u` and `v`.
    pub similarity: f64,
    /// Share of `C_u` with strictly smaller similarity.
    pub cdf: f64,
    pub prior: f64,
    pub posterior: f64,
}

/// Fraction of `candidates` strictly below `query`. `candidates` holds the
/// similarities of `user` to its unobserved set.
pub fn empirical_cdf(user: usize, candidates: &[f64], query: f64) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::UndefinedCdf { user });
    }
    let below = candidates.iter().filter(|&&w| w < query).count();
    Ok(below as f64 / candidates.len() as f64)
}

/// Same as [`empirical_cdf`] against a pre-sorted slice, in `O(log n)`.
pub(crate) fn empirical_cdf_sorted(sorted: &[f64], query: f64) -> f64 {
    sorted.partition_point(|&w| w < query) as f64 / sorted.len() as f64
}

/// Probability that an unobserved user is a hidden friend, given the
/// similarity CDF value `cdf` and the prior `prior`:
/// `F P / ((1 - F)(1 - P) + F P)`.
pub fn posterior(cdf: f64, prior: f64) -> Result<f64> {
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::InvalidPrior(prior));
    }
    if !(0.0..=1.0).contains(&cdf) {
        return Err(Error::input(
            "denoise::posterior",
            format!("cdf value {cdf} outside [0, 1]"),
        ));
    }
    let friend = cdf * prior;
    let denom = (1.0 - cdf) * (1.0 - prior) + friend;
    debug_assert!(denom >= prior.min(1.0 - prior));
    Ok(friend / denom)
}

/// How the prior friend probability of each unobserved user is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PriorMode {
    Constant(f64),
    /// `clamp(deg(v) / max_deg, eps, 1 - eps)` on the slice being enhanced.
    Degree {
        eps: f64,
    },
}

impl Default for PriorMode {
    fn default() -> Self {
        PriorMode::Constant(0.5)
    }
}

impl PriorMode {
    pub const DEFAULT_DEGREE_EPS: f64 = 0.01;

    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorMode::Constant(p) if !(p > 0.0 && p < 1.0) => Err(Error::InvalidPrior(p)),
            PriorMode::Degree { eps } if !(eps > 0.0 && eps < 0.5) => Err(Error::config(
                "denoise::PriorMode",
                format!("degree prior eps {eps} outside (0, 0.5)"),
            )),
            _ => Ok(()),
        }
    }

    /// Prior of every user on `graph`.
    pub fn priors(&self, graph: &SocialGraph) -> Vec<f64> {
        let m = graph.num_users();
        match *self {
            PriorMode::Constant(p) => vec![p; m],
            PriorMode::Degree { eps } => {
                let max_deg = (0..m).map(|v| graph.degree(v)).max().unwrap_or(0).max(1) as f64;
                (0..m)
                    .map(|v| (graph.degree(v) as f64 / max_deg).clamp(eps, 1.0 - eps))
                    .collect()
            }
        }
    }
}

impl fmt::Display for PriorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorMode::Constant(p) => write!(f, "constant:{p}"),
            PriorMode::Degree { eps } => write!(f, "degree:{eps}"),
        }
    }
}

impl FromStr for PriorMode {
    type Err = Error;

    /// `constant`, `constant:<p>`, `degree` or `degree:<eps>`.
    fn from_str(s: &str) -> Result<Self> {
        const OP: &str = "denoise::PriorMode::from_str";
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let num = |a: &str| {
            a.parse::<f64>()
                .map_err(|_| Error::config(OP, format!("bad number `{a}`")))
        };
        let mode = match (kind, arg) {
            ("constant", None) => PriorMode::Constant(0.5),
            ("constant", Some(a)) => PriorMode::Constant(num(a)?),
            ("degree", None) => PriorMode::Degree {
                eps: Self::DEFAULT_DEGREE_EPS,
            },
            ("degree", Some(a)) => PriorMode::Degree { eps: num(a)? },
            _ => return Err(Error::config(OP, format!("unknown prior `{s}`"))),
        };
        mode.validate()?;
        Ok(mode)
    }
}
