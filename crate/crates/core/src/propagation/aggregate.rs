use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};

use super::SocialPropagationOutput;
use crate::error::{Error, Result};

/// How per-slice social matrices are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AggMode {
    #[default]
    Mean,
    Mlp,
}

impl fmt::Display for AggMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggMode::Mean => "mean",
            AggMode::Mlp => "mlp",
        })
    }
}

impl FromStr for AggMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "mean" => Ok(AggMode::Mean),
            "mlp" => Ok(AggMode::Mlp),
            other => Err(format!(
                "unknown aggregation `{other}`, expected mean or mlp"
            )),
        }
    }
}

/// Aggregation with its parameters, if any.
#[derive(Debug, Clone, Copy)]
pub enum Aggregation<'a> {
    Mean,
    Mlp(&'a MlpAggregator),
}

/// `tanh(W [X_1 | ... | X_tau] + b)` applied row-wise, `W` of shape `d x (tau d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpAggregator {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl MlpAggregator {
    /// Starts as the slice mean: `W = [I/tau | ... | I/tau]`, `b = 0`.
    pub fn identity(dim: usize, tau: usize) -> Self {
        let mut weight = Array2::zeros((dim, dim * tau));
        for t in 0..tau {
            for j in 0..dim {
                weight[[j, t * dim + j]] = 1.0 / tau as f64;
            }
        }
        Self {
            weight,
            bias: Array1::zeros(dim),
        }
    }

    pub fn tau(&self) -> usize {
        self.weight.ncols() / self.weight.nrows().max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Forward activations kept for the non-linear aggregation.
#[derive(Debug, Clone)]
pub struct AggCache {
    concat: Array2<f64>,
    output: Array2<f64>,
}

pub fn aggregate_slices(
    slices: &[Array2<f64>],
    agg: Aggregation<'_>,
) -> Result<(Array2<f64>, Option<AggCache>)> {
    const OP: &str = "propagation::aggregate_slices";
    let Some(first) = slices.first() else {
        return Err(Error::input(OP, "no slices to aggregate"));
    };
    if slices.iter().any(|s| s.dim() != first.dim()) {
        return Err(Error::input(OP, "slice matrices differ in shape"));
    }
    match agg {
        Aggregation::Mean => {
            let mut acc = first.clone();
            for s in &slices[1..] {
                acc += s;
            }
            Ok((acc / slices.len() as f64, None))
        }
        Aggregation::Mlp(mlp) => {
            let d = first.ncols();
            if mlp.weight.dim() != (d, d * slices.len()) || mlp.bias.len() != d {
                return Err(Error::input(
                    OP,
                    format!(
                        "aggregator weight {:?} does not fit {} slices of width {d}",
                        mlp.weight.dim(),
                        slices.len()
                    ),
                ));
            }
            let views: Vec<ArrayView2<'_, f64>> = slices.iter().map(|s| s.view()).collect();
            let concat = concatenate(Axis(1), &views).expect("shapes checked");
            let mut output = concat.dot(&mlp.weight.t());
            output += &mlp.bias;
            output.mapv_inplace(f64::tanh);
            Ok((output.clone(), Some(AggCache { concat, output })))
        }
    }
}

/// Splits the upstream gradient back onto the slices (and the aggregator parameters).
pub(super) fn backward(
    tau: usize,
    forward: &SocialPropagationOutput,
    agg: Aggregation<'_>,
    grad: ArrayView2<'_, f64>,
) -> Result<(Vec<Array2<f64>>, Option<MlpGradients>)> {
    match agg {
        Aggregation::Mean => {
            let share = grad.to_owned() / tau as f64;
            Ok((vec![share; tau], None))
        }
        Aggregation::Mlp(mlp) => {
            let cache = forward.cache.as_ref().ok_or_else(|| Error::InvalidState {
                op: "propagation::backward_through_propagation",
                msg: "mlp aggregation backward needs the forward activation cache".into(),
            })?;
            let d = grad.ncols();
            // d tanh(z) = 1 - tanh(z)^2
            let dz = &grad * &cache.output.mapv(|y| 1.0 - y * y);
            let weight = dz.t().dot(&cache.concat);
            let bias = dz.sum_axis(Axis(0));
            let dconcat = dz.dot(&mlp.weight);
            let slices = (0..tau)
                .map(|t| dconcat.slice(s![.., t * d..(t + 1) * d]).to_owned())
                .collect();
            Ok((slices, Some(MlpGradients { weight, bias })))
        }
    }
}
