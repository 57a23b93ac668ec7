use std::cmp::Ordering;
use std::io::Write as _;
use std::path::Path;

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::Serialize;

use super::{empirical_cdf_sorted, posterior, CandidateScore, PriorMode};
use crate::error::{Error, Result};
use crate::graph::SocialGraph;

/// Scores every unobserved user of `user` (everyone except `user` and `observed`).
///
/// `similarity` is the anchor's social-similarity row over all users,
/// `priors` the per-user prior. Output is in ascending user order.
pub fn score_candidates(
    user: usize,
    observed: &[usize],
    similarity: ArrayView1<'_, f64>,
    priors: &[f64],
) -> Result<Vec<CandidateScore>> {
    let m = similarity.len();
    let unobserved: Vec<usize> = (0..m)
        .filter(|&v| v != user && observed.binary_search(&v).is_err())
        .collect();
    if unobserved.is_empty() {
        return Err(Error::UndefinedCdf { user });
    }
    let mut sorted: Vec<f64> = unobserved.iter().map(|&v| similarity[v]).collect();
    sorted.sort_by(f64::total_cmp);
    unobserved
        .into_iter()
        .map(|v| {
            let cdf = empirical_cdf_sorted(&sorted, similarity[v]);
            Ok(CandidateScore {
                user: v,
                similarity: similarity[v],
                cdf,
                prior: priors[v],
                posterior: posterior(cdf, priors[v])?,
            })
        })
        .collect()
}

fn by_posterior(a: &CandidateScore, b: &CandidateScore) -> Ordering {
    b.posterior
        .total_cmp(&a.posterior)
        .then(b.similarity.total_cmp(&a.similarity))
        .then(a.user.cmp(&b.user))
}

/// The `k` candidates with the highest posterior; ties go to higher
/// similarity, then lower index. Returns all candidates (with a warning)
/// when fewer than `k` exist.
pub fn select_potential_friends(user: usize, scores: &[CandidateScore], k: usize) -> Vec<usize> {
    if scores.len() < k {
        log::warn!(
            "denoise::select_potential_friends: user {user} has {} candidates for {k} slots",
            scores.len()
        );
    }
    let mut ranked: Vec<&CandidateScore> = scores.iter().collect();
    ranked.sort_by(|a, b| by_posterior(a, b));
    ranked.into_iter().take(k).map(|s| s.user).collect()
}

/// Top-`|observed|` of `observed ∪ potential` by interest similarity `phi`
/// (the anchor's row over all users). Ties go to observed friends, then to
/// the lower index. Returned sorted by index.
pub fn fuse(observed: &[usize], potential: &[usize], phi: ArrayView1<'_, f64>) -> Vec<usize> {
    let mut pool: Vec<(usize, bool)> = observed.iter().map(|&v| (v, true)).collect();
    pool.extend(
        potential
            .iter()
            .filter(|v| !observed.contains(v))
            .map(|&v| (v, false)),
    );
    pool.sort_by(|&(a, a_obs), &(b, b_obs)| {
        phi[b]
            .total_cmp(&phi[a])
            .then(b_obs.cmp(&a_obs))
            .then(a.cmp(&b))
    });
    let mut fused: Vec<usize> = pool
        .into_iter()
        .take(observed.len())
        .map(|(v, _)| v)
        .collect();
    fused.sort_unstable();
    fused
}

/// Sets behind one user's new row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserFusion {
    pub observed: Vec<usize>,
    /// Potential friends in selection order.
    pub potential: Vec<usize>,
    pub fused: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChangeRow {
    pub user: usize,
    pub kept: usize,
    pub dropped: usize,
    pub added: usize,
    pub observed: usize,
}

#[derive(Debug, Clone)]
pub struct FusionResult {
    pub graph: SocialGraph,
    pub users: Vec<UserFusion>,
    pub changes: Vec<ChangeRow>,
}

impl FusionResult {
    pub fn kept(&self) -> usize {
        self.changes.iter().map(|c| c.kept).sum()
    }

    pub fn dropped(&self) -> usize {
        self.changes.iter().map(|c| c.dropped).sum()
    }

    pub fn added(&self) -> usize {
        self.changes.iter().map(|c| c.added).sum()
    }

    /// Change log CSV: `user,kept,dropped,added,observed`.
    pub fn write_changes(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "user,kept,dropped,added,observed").expect("write to vec");
        for c in &self.changes {
            writeln!(
                out,
                "{},{},{},{},{}",
                c.user, c.kept, c.dropped, c.added, c.observed
            )
            .expect("write to vec");
        }
        std::fs::write(path, out).map_err(|e| Error::io("denoise::write_changes", path, e))
    }
}

fn similarity_row(emb: ArrayView2<'_, f64>, u: usize) -> ndarray::Array1<f64> {
    emb.dot(&emb.row(u))
}

/// Replaces every user's row of `newest` by its fused friend set, using
/// social similarity for the posterior and interest similarity for fusion.
///
/// The output is directed unless `symmetrize` is set, in which case its
/// symmetric closure is returned instead. Users with no unobserved user keep
/// their row.
pub fn build_enhanced_slice(
    interest_users: ArrayView2<'_, f64>,
    social_users: ArrayView2<'_, f64>,
    newest: &SocialGraph,
    prior: PriorMode,
    symmetrize: bool,
) -> Result<FusionResult> {
    const OP: &str = "denoise::build_enhanced_slice";
    let m = newest.num_users();
    if interest_users.nrows() != m || social_users.nrows() != m {
        return Err(Error::input(
            OP,
            format!(
                "{m} users in slice, {} interest rows, {} social rows",
                interest_users.nrows(),
                social_users.nrows()
            ),
        ));
    }
    prior.validate()?;
    let priors = prior.priors(newest);

    let users: Vec<UserFusion> = (0..m)
        .into_par_iter()
        .map(|u| {
            let observed = newest.neighbors(u).to_vec();
            if observed.is_empty() {
                return Ok(UserFusion {
                    observed,
                    potential: Vec::new(),
                    fused: Vec::new(),
                });
            }
            let potential = match score_candidates(
                u,
                &observed,
                similarity_row(social_users, u).view(),
                &priors,
            ) {
                Ok(scores) => select_potential_friends(u, &scores, observed.len()),
                Err(Error::UndefinedCdf { .. }) => {
                    log::warn!("{OP}: user {u} is linked to everyone, row kept");
                    Vec::new()
                }
                Err(e) => return Err(e),
            };
            let fused = fuse(
                &observed,
                &potential,
                similarity_row(interest_users, u).view(),
            );
            Ok(UserFusion {
                observed,
                potential,
                fused,
            })
        })
        .collect::<Result<_>>()?;

    let changes = users
        .iter()
        .enumerate()
        .map(|(u, f)| {
            let kept = f
                .fused
                .iter()
                .filter(|v| f.observed.binary_search(v).is_ok())
                .count();
            ChangeRow {
                user: u,
                kept,
                dropped: f.observed.len() - kept,
                added: f.fused.len() - kept,
                observed: f.observed.len(),
            }
        })
        .collect();
    let directed = SocialGraph::directed(users.iter().map(|f| f.fused.clone()).collect())?;
    let graph = if symmetrize {
        directed.symmetrize_union()
    } else {
        directed
    };
    Ok(FusionResult {
        graph,
        users,
        changes,
    })
}
