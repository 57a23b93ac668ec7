use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::{log_sigmoid, sigmoid, Triplet, TripletBatch};

/// Loss and derivative of one ranked pair: `-ln sigmoid(diff)` and `-(1 - sigmoid(diff))`.
pub fn bpr_pair(diff: f64) -> (f64, f64) {
    (-log_sigmoid(diff), -sigmoid(-diff))
}

fn add_row(target: &mut Array2<f64>, row: usize, scale: f64, src: ndarray::ArrayView1<'_, f64>) {
    target.row_mut(row).scaled_add(scale, &src);
}

/// Item ranking loss `-sum ln sigmoid(rho(u,i+) - rho(u,i-))` with gradients on
/// the pooled user and item matrices.
pub fn bpr_item_loss(
    triplets: &[Triplet],
    users: ArrayView2<'_, f64>,
    items: ArrayView2<'_, f64>,
) -> (f64, Array2<f64>, Array2<f64>) {
    let mut loss = 0.0;
    let mut grad_users = Array2::zeros(users.raw_dim());
    let mut grad_items = Array2::zeros(items.raw_dim());
    for t in triplets {
        let u = users.row(t.anchor);
        let (pos, neg) = (items.row(t.positive), items.row(t.negative));
        let (l, g) = bpr_pair(u.dot(&pos) - u.dot(&neg));
        loss += l;
        add_row(&mut grad_users, t.anchor, g, pos);
        add_row(&mut grad_users, t.anchor, -g, neg);
        add_row(&mut grad_items, t.positive, g, u);
        add_row(&mut grad_items, t.negative, -g, u);
    }
    (loss, grad_users, grad_items)
}

/// Social ranking loss `-sum ln sigmoid(s(u,v+) - s(u,v-))` on the social matrix.
pub fn bpr_social_loss(triplets: &[Triplet], social: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
    let mut loss = 0.0;
    let mut grad = Array2::zeros(social.raw_dim());
    for t in triplets {
        let u = social.row(t.anchor);
        let (pos, neg) = (social.row(t.positive), social.row(t.negative));
        let (l, g) = bpr_pair(u.dot(&pos) - u.dot(&neg));
        loss += l;
        add_row(&mut grad, t.anchor, g, pos);
        add_row(&mut grad, t.anchor, -g, neg);
        add_row(&mut grad, t.positive, g, u);
        add_row(&mut grad, t.negative, -g, u);
    }
    (loss, grad)
}

/// Cross-space hinge:
/// `sum max{0, margin - sigmoid(c(u,v+)) x(u,v+) + sigmoid(c(u,v-)) x(u,v-)}`
/// where `c` are similarities in `coefficients` and `x` similarities in `target`.
///
/// The sigmoid coefficients are held constant, so only `target` receives a
/// gradient: `-sigma+ x_{v+} + sigma- x_{v-}` on the anchor row,
/// `-sigma+ x_u` on the positive and `sigma- x_u` on the negative. A hinge
/// argument of exactly zero contributes a zero subgradient.
pub fn coordination_loss(
    triplets: &[Triplet],
    coefficients: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    margin: f64,
) -> (f64, Array2<f64>) {
    let mut loss = 0.0;
    let mut grad = Array2::zeros(target.raw_dim());
    for t in triplets {
        let c = coefficients.row(t.anchor);
        let pull = sigmoid(c.dot(&coefficients.row(t.positive)));
        let push = sigmoid(c.dot(&coefficients.row(t.negative)));
        let x = target.row(t.anchor);
        let (pos, neg) = (target.row(t.positive), target.row(t.negative));
        let arg = margin - pull * x.dot(&pos) + push * x.dot(&neg);
        if arg > 0.0 {
            loss += arg;
            add_row(&mut grad, t.anchor, -pull, pos);
            add_row(&mut grad, t.anchor, push, neg);
            add_row(&mut grad, t.positive, -pull, x);
            add_row(&mut grad, t.negative, push, x);
        }
    }
    (loss, grad)
}

/// Coordination in the social space: interest similarities set the pull/push
/// strength on social embeddings.
pub fn social_coordination(
    triplets: &[Triplet],
    interest_users: ArrayView2<'_, f64>,
    social_users: ArrayView2<'_, f64>,
    margin: f64,
) -> (f64, Array2<f64>) {
    coordination_loss(triplets, interest_users, social_users, margin)
}

/// Coordination in the interaction space: social similarities set the
/// pull/push strength on item-preference embeddings.
pub fn interest_coordination(
    triplets: &[Triplet],
    social_users: ArrayView2<'_, f64>,
    interest_users: ArrayView2<'_, f64>,
    margin: f64,
) -> (f64, Array2<f64>) {
    coordination_loss(triplets, social_users, interest_users, margin)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Social ranking loss weight.
    pub lambda1: f64,
    /// Squared-norm regularization weight.
    pub lambda2: f64,
    /// Social-space coordination weight.
    pub alpha: f64,
    /// Interaction-space coordination weight.
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub social: f64,
    pub interest: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Self {
            social: 1.0,
            interest: 1.0,
        }
    }
}

/// Which optional terms exist at all. A disabled term, like a zero-weighted one,
/// is never evaluated and logs as zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossTerms {
    pub social_bpr: bool,
    pub social_coordination: bool,
    pub interest_coordination: bool,
}

impl LossTerms {
    pub const NAMES: [&'static str; 3] =
        ["social_bpr", "social_coordination", "interest_coordination"];

    /// Ranking loss on items only.
    pub fn none() -> Self {
        Self {
            social_bpr: false,
            social_coordination: false,
            interest_coordination: false,
        }
    }

    fn flags(&self) -> [bool; 3] {
        [
            self.social_bpr,
            self.social_coordination,
            self.interest_coordination,
        ]
    }
}

/// Comma-separated names of the enabled terms.
impl std::fmt::Display for LossTerms {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = Self::NAMES
            .iter()
            .zip(self.flags())
            .filter(|(_, on)| *on)
            .map(|(n, _)| *n)
            .collect();
        f.write_str(&names.join(","))
    }
}

impl std::str::FromStr for LossTerms {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut terms = Self::none();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "social_bpr" => terms.social_bpr = true,
                "social_coordination" => terms.social_coordination = true,
                "interest_coordination" => terms.interest_coordination = true,
                other => return Err(format!("unknown loss term `{other}`")),
            }
        }
        Ok(terms)
    }
}

impl Default for LossTerms {
    fn default() -> Self {
        Self {
            social_bpr: true,
            social_coordination: true,
            interest_coordination: true,
        }
    }
}

/// Unweighted component values and the weighted total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub rec: f64,
    pub soc: f64,
    pub social_coord: f64,
    pub interest_coord: f64,
    /// `||E_U||^2 + ||E_I||^2` of the initial embeddings.
    pub l2: f64,
    pub total: f64,
}

impl LossReport {
    pub const CSV_HEADER: &'static str = "l_rec,l_soc,l_omega1,l_omega2,l2,total";

    pub fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.rec, self.soc, self.social_coord, self.interest_coord, self.l2, self.total
        )
    }

    /// Field-wise sum, used to accumulate batches into an epoch row.
    pub fn accumulate(&mut self, other: &LossReport) {
        self.rec += other.rec;
        self.soc += other.soc;
        self.social_coord += other.social_coord;
        self.interest_coord += other.interest_coord;
        self.l2 += other.l2;
        self.total += other.total;
    }
}

/// Weighted total `rec + l1 soc + a coord_social + b coord_interest + l2 (||E_U||^2 + ||E_I||^2)`.
pub fn total_loss(
    rec: f64,
    soc: f64,
    social_coord: f64,
    interest_coord: f64,
    weights: &LossWeights,
    users: ArrayView2<'_, f64>,
    items: ArrayView2<'_, f64>,
) -> LossReport {
    let l2 = squared_norm(users) + squared_norm(items);
    let total = rec
        + weights.lambda1 * soc
        + weights.alpha * social_coord
        + weights.beta * interest_coord
        + weights.lambda2 * l2;
    LossReport {
        rec,
        soc,
        social_coord,
        interest_coord,
        l2,
        total,
    }
}

fn squared_norm(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|x| x * x).sum()
}

/// Weighted gradients on the three pooled matrices.
#[derive(Debug, Clone)]
pub struct PooledGradients {
    pub interest_users: Array2<f64>,
    pub items: Array2<f64>,
    pub social_users: Array2<f64>,
}

fn add_scaled(acc: &mut Array2<f64>, scale: f64, g: &Array2<f64>) {
    Zip::from(acc).and(g).for_each(|a, &b| *a += scale * b);
}

/// Evaluates every active term on one batch. The regularizer's gradient
/// (`2 lambda2 E`) belongs to the initial embeddings and is added by the caller.
pub fn evaluate_objective(
    batch: &TripletBatch,
    interest_users: ArrayView2<'_, f64>,
    items: ArrayView2<'_, f64>,
    social_users: ArrayView2<'_, f64>,
    base_users: ArrayView2<'_, f64>,
    base_items: ArrayView2<'_, f64>,
    weights: &LossWeights,
    margins: &Margins,
    terms: &LossTerms,
) -> (LossReport, PooledGradients) {
    let (rec, mut g_interest, g_items) = bpr_item_loss(&batch.items, interest_users, items);
    let mut g_social = Array2::zeros(social_users.raw_dim());

    let mut soc = 0.0;
    if terms.social_bpr && weights.lambda1 != 0.0 {
        let (l, g) = bpr_social_loss(&batch.social, social_users);
        soc = l;
        add_scaled(&mut g_social, weights.lambda1, &g);
    }
    let mut social_coord = 0.0;
    if terms.social_coordination && weights.alpha != 0.0 {
        let (l, g) =
            social_coordination(&batch.social, interest_users, social_users, margins.social);
        social_coord = l;
        add_scaled(&mut g_social, weights.alpha, &g);
    }
    let mut interest_coord = 0.0;
    if terms.interest_coordination && weights.beta != 0.0 {
        let (l, g) = interest_coordination(
            &batch.social,
            social_users,
            interest_users,
            margins.interest,
        );
        interest_coord = l;
        add_scaled(&mut g_interest, weights.beta, &g);
    }

    let report = total_loss(
        rec,
        soc,
        social_coord,
        interest_coord,
        weights,
        base_users,
        base_items,
    );
    (
        report,
        PooledGradients {
            interest_users: g_interest,
            items: g_items,
            social_users: g_social,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn tied_pair_costs_ln2() {
        let (l, g) = bpr_pair(0.0);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g, -0.5);
    }

    #[test]
    fn saturated_pair_costs_nothing() {
        let (l, g) = bpr_pair(1e3);
        assert!(l < 1e-300);
        assert!(g.abs() < 1e-300);
        let (l, _) = bpr_pair(-1e3);
        assert!((l - 1e3).abs() < 1e-9);
    }

    /// Rows: 0 = anchor, 1 = positive, 2 = negative. Coefficient rows are
    /// zero so both sigmoids are 1/2.
    fn hinge_fixture(target_pos: f64, target_neg: f64) -> (Array2<f64>, Array2<f64>) {
        let coeff = Array2::zeros((3, 1));
        let target = array![[1.0], [target_pos], [target_neg]];
        (coeff, target)
    }

    #[test]
    fn hinge_boundary_is_zero() {
        // 1 - 0.5*2 + 0.5*0 = 0
        let (c, x) = hinge_fixture(2.0, 0.0);
        let (l, g) = coordination_loss(&[Triplet::new(0, 1, 2)], c.view(), x.view(), 1.0);
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn active_hinge_value() {
        // 1 - 0.5*0 + 0.5*2 = 2
        let (c, x) = hinge_fixture(0.0, 2.0);
        let (l, g) = coordination_loss(&[Triplet::new(0, 1, 2)], c.view(), x.view(), 1.0);
        assert_eq!(l, 2.0);
        assert_eq!(g, array![[-0.5 * 0.0 + 0.5 * 2.0], [-0.5], [0.5]]);
    }

    #[test]
    fn vanishing_positive_similarity_exerts_no_pull() {
        // c(u, v+) -> -inf: the positive row gets no gradient
        let coeff = array![[1.0], [-1e3], [0.0]];
        let target = array![[1.0], [0.3], [0.7]];
        let (_, g) = coordination_loss(&[Triplet::new(0, 1, 2)], coeff.view(), target.view(), 1.0);
        assert_eq!(g[[1, 0]], 0.0);
        assert!(g[[2, 0]] > 0.0);
    }

    #[test]
    fn interest_hinge_with_equal_similarities_is_the_margin() {
        // equal social similarities, equal interest similarities: term = C2
        let social = array![[1.0, 0.0], [0.5, 0.5], [0.5, 0.5]];
        let interest = array![[0.2, 0.1], [1.0, 3.0], [1.5, 2.0]];
        let (l, _) = interest_coordination(
            &[Triplet::new(0, 1, 2)],
            social.view(),
            interest.view(),
            1.0,
        );
        assert!((l - 1.0).abs() < 1e-15);
    }

    #[test]
    fn anchor_gradient_ratio_follows_sigmoids() {
        // anchor gradient = -s+ e_{v+} + s- e_{v-}; pick orthogonal e_{v+}, e_{v-}
        let coeff = array![[1.0, 0.0], [2.0, 0.0], [-1.0, 0.0]];
        let target = array![[0.1, 0.1], [1.0, 0.0], [0.0, 1.0]];
        let (_, g) =
            social_coordination(&[Triplet::new(0, 1, 2)], coeff.view(), target.view(), 5.0);
        let (sp, sn) = (sigmoid(2.0), sigmoid(-1.0));
        assert!(g[[0, 0]] < 0.0 && g[[0, 1]] > 0.0);
        assert!((-g[[0, 0]] / g[[0, 1]] - sp / sn).abs() < 1e-12);
    }

    #[test]
    fn total_combines_weighted_terms() {
        let u = array![[1.0, 2.0]];
        let i = array![[3.0]];
        let zero = LossWeights {
            lambda1: 0.0,
            lambda2: 0.0,
            alpha: 0.0,
            beta: 0.0,
        };
        assert_eq!(
            total_loss(0.7, 5.0, 3.0, 2.0, &zero, u.view(), i.view()).total,
            0.7
        );
        let reg_only = LossWeights {
            lambda2: 0.5,
            ..zero
        };
        assert_eq!(
            total_loss(0.0, 0.0, 0.0, 0.0, &reg_only, u.view(), i.view()).total,
            0.5 * 14.0
        );
        let w = LossWeights {
            lambda1: 0.3,
            lambda2: 0.1,
            alpha: 0.25,
            beta: 0.4,
        };
        let w2 = LossWeights { alpha: 0.5, ..w };
        let a = total_loss(1.0, 2.0, 3.0, 4.0, &w, u.view(), i.view()).total;
        let b = total_loss(1.0, 2.0, 3.0, 4.0, &w2, u.view(), i.view()).total;
        assert!((b - a - 0.25 * 3.0).abs() < 1e-12);
    }
}
