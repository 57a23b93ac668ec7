use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal as NormalCdf};

use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Distribution the similarity pairs are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BaseDistribution {
    Uniform,
    Normal { mean: f64, std: f64 },
    PointMass(f64),
}

impl BaseDistribution {
    pub const STANDARD_NORMAL: BaseDistribution = BaseDistribution::Normal {
        mean: 0.0,
        std: 1.0,
    };

    fn validate(&self) -> Result<()> {
        const OP: &str = "denoise::order_statistic_check";
        match *self {
            BaseDistribution::Normal { mean, std }
                if !(mean.is_finite() && std.is_finite() && std > 0.0) =>
            {
                Err(Error::input(
                    OP,
                    format!("normal({mean}, {std}) cannot be sampled"),
                ))
            }
            BaseDistribution::PointMass(x) if !x.is_finite() => Err(Error::input(
                OP,
                format!("point mass at {x} cannot be sampled"),
            )),
            _ => Ok(()),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match *self {
            BaseDistribution::Uniform => x.clamp(0.0, 1.0),
            BaseDistribution::Normal { mean, std } => {
                NormalCdf::new(mean, std).expect("validated").cdf(x)
            }
            BaseDistribution::PointMass(at) => f64::from(x >= at),
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match *self {
            BaseDistribution::Uniform => f64::from((0.0..=1.0).contains(&x)),
            BaseDistribution::Normal { mean, std } => {
                NormalCdf::new(mean, std).expect("validated").pdf(x)
            }
            BaseDistribution::PointMass(_) => 0.0,
        }
    }
}

impl fmt::Display for BaseDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseDistribution::Uniform => write!(f, "uniform"),
            BaseDistribution::Normal { mean, std } => write!(f, "normal:{mean}:{std}"),
            BaseDistribution::PointMass(x) => write!(f, "point:{x}"),
        }
    }
}

impl FromStr for BaseDistribution {
    type Err = Error;

    /// `uniform`, `normal`, `normal:<mean>:<std>` or `point:<x>`.
    fn from_str(s: &str) -> Result<Self> {
        const OP: &str = "denoise::BaseDistribution::from_str";
        let parts: Vec<&str> = s.split(':').collect();
        let num = |a: &str| {
            a.parse::<f64>()
                .map_err(|_| Error::input(OP, format!("bad number `{a}`")))
        };
        let dist = match parts.as_slice() {
            ["uniform"] => BaseDistribution::Uniform,
            ["normal"] => BaseDistribution::STANDARD_NORMAL,
            ["normal", m, s] => BaseDistribution::Normal {
                mean: num(m)?,
                std: num(s)?,
            },
            ["point", x] => BaseDistribution::PointMass(num(x)?),
            _ => return Err(Error::input(OP, format!("unknown distribution `{s}`"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckOutcome {
    Pass,
    Fail,
    /// Ties make the max/min labelling meaningless.
    Inapplicable,
}

/// One bin of the friend / non-friend density comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramRow {
    pub lo: f64,
    pub hi: f64,
    pub friend_empirical: f64,
    pub friend_theory: f64,
    pub non_friend_empirical: f64,
    pub non_friend_theory: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderStatReport {
    pub distribution: BaseDistribution,
    pub samples: usize,
    pub friend_ks: f64,
    pub non_friend_ks: f64,
    pub threshold: f64,
    pub outcome: CheckOutcome,
    #[serde(skip)]
    friends: Vec<f64>,
    #[serde(skip)]
    non_friends: Vec<f64>,
}

impl OrderStatReport {
    /// Empirical densities of both labels next to `2 F f` and `2 f (1 - F)`
    /// over `bins` equal-width bins spanning the pooled sample range.
    pub fn histogram(&self, bins: usize) -> Vec<HistogramRow> {
        if bins == 0 || self.friends.is_empty() {
            return Vec::new();
        }
        let lo = self.non_friends[0];
        let hi = *self.friends.last().expect("non-empty");
        if hi <= lo {
            return Vec::new();
        }
        let width = (hi - lo) / bins as f64;
        let n = self.friends.len() as f64;
        let count = |sorted: &[f64], a: f64, b: f64, last: bool| {
            let start = sorted.partition_point(|&x| x < a);
            let end = if last {
                sorted.len()
            } else {
                sorted.partition_point(|&x| x < b)
            };
            (end - start) as f64
        };
        (0..bins)
            .map(|k| {
                let a = lo + k as f64 * width;
                let b = if k + 1 == bins { hi } else { a + width };
                let mid = 0.5 * (a + b);
                let (big_f, f) = (self.distribution.cdf(mid), self.distribution.pdf(mid));
                HistogramRow {
                    lo: a,
                    hi: b,
                    friend_empirical: count(&self.friends, a, b, k + 1 == bins) / (n * width),
                    friend_theory: 2.0 * big_f * f,
                    non_friend_empirical: count(&self.non_friends, a, b, k + 1 == bins)
                        / (n * width),
                    non_friend_theory: 2.0 * f * (1.0 - big_f),
                }
            })
            .collect()
    }
}

/// Smallest sample count the check accepts.
pub const MIN_SAMPLES: usize = 10_000;

/// Kolmogorov-Smirnov distance of a sorted sample from `cdf`.
fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let g = cdf(x);
            ((i + 1) as f64 / n - g).max(g - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Draws `n` i.i.d. pairs from `dist`, labels each pair's larger value a
/// friend and its smaller value a non-friend, and compares the two samples
/// against `F(x)^2` and `1 - (1 - F(x))^2` by the KS statistic. Passes when
/// both distances are at most `1.63 / sqrt(n)`.
pub fn order_statistic_check(
    n: usize,
    dist: BaseDistribution,
    seed: u64,
) -> Result<OrderStatReport> {
    if n < MIN_SAMPLES {
        return Err(Error::input(
            "denoise::order_statistic_check",
            format!("{n} samples, need at least {MIN_SAMPLES}"),
        ));
    }
    dist.validate()?;
    let threshold = 1.63 / (n as f64).sqrt();
    let mut rng = rng::seeded(seed, streams::ORDER_STAT);
    let normal = match dist {
        BaseDistribution::Normal { mean, std } => Some(Normal::new(mean, std).expect("validated")),
        _ => None,
    };
    let mut draw = || match dist {
        BaseDistribution::Uniform => rng.random::<f64>(),
        BaseDistribution::Normal { .. } => normal.as_ref().expect("built above").sample(&mut rng),
        BaseDistribution::PointMass(x) => x,
    };
    let mut friends = Vec::with_capacity(n);
    let mut non_friends = Vec::with_capacity(n);
    let mut ties = 0usize;
    for _ in 0..n {
        let (a, b) = (draw(), draw());
        if a == b {
            ties += 1;
        }
        friends.push(a.max(b));
        non_friends.push(a.min(b));
    }
    friends.sort_by(f64::total_cmp);
    non_friends.sort_by(f64::total_cmp);

    if ties == n {
        return Ok(OrderStatReport {
            distribution: dist,
            samples: n,
            friend_ks: f64::NAN,
            non_friend_ks: f64::NAN,
            threshold,
            outcome: CheckOutcome::Inapplicable,
            friends,
            non_friends,
        });
    }
    let friend_ks = ks_statistic(&friends, |x| dist.cdf(x).powi(2));
    let non_friend_ks = ks_statistic(&non_friends, |x| 1.0 - (1.0 - dist.cdf(x)).powi(2));
    let outcome = if friend_ks <= threshold && non_friend_ks <= threshold {
        CheckOutcome::Pass
    } else {
        CheckOutcome::Fail
    };
    Ok(OrderStatReport {
        distribution: dist,
        samples: n,
        friend_ks,
        non_friend_ks,
        threshold,
        outcome,
        friends,
        non_friends,
    })
}
