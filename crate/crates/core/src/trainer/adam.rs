use ndarray::{Array, Array1, Array2, Dimension, Zip};

use crate::error::{Error, Result};
use crate::propagation::{EmbeddingState, MlpGradients};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Gradients on every trainable parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub users: Array2<f64>,
    pub items: Array2<f64>,
    pub aggregator: Option<MlpGradients>,
}

impl ParamGradients {
    /// Name of the first parameter holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        if self.users.iter().any(|x| !x.is_finite()) {
            return Some("users");
        }
        if self.items.iter().any(|x| !x.is_finite()) {
            return Some("items");
        }
        let agg = self.aggregator.as_ref()?;
        if agg.weight.iter().any(|x| !x.is_finite()) {
            return Some("agg_weight");
        }
        agg.bias
            .iter()
            .any(|x| !x.is_finite())
            .then_some("agg_bias")
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments<D: Dimension> {
    first: Array<f64, D>,
    second: Array<f64, D>,
}

impl<D: Dimension> Moments<D> {
    fn like(param: &Array<f64, D>) -> Self {
        Self {
            first: Array::zeros(param.raw_dim()),
            second: Array::zeros(param.raw_dim()),
        }
    }

    fn update(&mut self, param: &mut Array<f64, D>, grad: &Array<f64, D>, lr: f64, step: u64) {
        let c1 = 1.0 - BETA1.powi(step as i32);
        let c2 = 1.0 - BETA2.powi(step as i32);
        Zip::from(param)
            .and(grad)
            .and(&mut self.first)
            .and(&mut self.second)
            .for_each(|p, &g, m, v| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
            });
    }
}

/// Adam moments for every parameter of an [`EmbeddingState`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    users: Moments<ndarray::Ix2>,
    items: Moments<ndarray::Ix2>,
    agg_weight: Option<Moments<ndarray::Ix2>>,
    agg_bias: Option<Moments<ndarray::Ix1>>,
    step: u64,
}

impl OptimizerState {
    pub fn new(state: &EmbeddingState) -> Self {
        Self {
            users: Moments::like(&state.users),
            items: Moments::like(&state.items),
            agg_weight: state.aggregator.as_ref().map(|a| Moments::like(&a.weight)),
            agg_bias: state.aggregator.as_ref().map(|a| Moments::like(&a.bias)),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// First and second moments of the user matrix.
    pub fn user_moments(&self) -> (&Array2<f64>, &Array2<f64>) {
        (&self.users.first, &self.users.second)
    }
}

fn check_shape<D: Dimension>(
    name: &str,
    param: &Array<f64, D>,
    grad: &Array<f64, D>,
) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(Error::input(
            "trainer::adam_step",
            format!(
                "{name}: parameter {:?} vs gradient {:?}",
                param.shape(),
                grad.shape()
            ),
        ));
    }
    Ok(())
}

/// One bias-corrected Adam update of every parameter. A non-finite gradient
/// aborts before anything is modified.
pub fn adam_step(
    state: &mut EmbeddingState,
    grads: &ParamGradients,
    opt: &mut OptimizerState,
    lr: f64,
) -> Result<()> {
    check_shape("users", &state.users, &grads.users)?;
    check_shape("items", &state.items, &grads.items)?;
    if state.aggregator.is_some() != grads.aggregator.is_some()
        || state.aggregator.is_some() != opt.agg_weight.is_some()
    {
        return Err(Error::input(
            "trainer::adam_step",
            "aggregator parameters, gradients and moments disagree",
        ));
    }
    if let (Some(a), Some(g)) = (&state.aggregator, &grads.aggregator) {
        check_shape("agg_weight", &a.weight, &g.weight)?;
        check_shape::<ndarray::Ix1>("agg_bias", &a.bias, &g.bias)?;
    }
    if let Some(param) = grads.first_non_finite() {
        return Err(Error::NonFinite {
            param,
            step: opt.step + 1,
            batch: None,
        });
    }
    opt.step += 1;
    let t = opt.step;
    opt.users.update(&mut state.users, &grads.users, lr, t);
    opt.items.update(&mut state.items, &grads.items, lr, t);
    if let (Some(a), Some(g)) = (state.aggregator.as_mut(), grads.aggregator.as_ref()) {
        opt.agg_weight
            .as_mut()
            .expect("checked")
            .update(&mut a.weight, &g.weight, lr, t);
        let bias: &mut Array1<f64> = &mut a.bias;
        opt.agg_bias
            .as_mut()
            .expect("checked")
            .update(bias, &g.bias, lr, t);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn single(value: f64) -> EmbeddingState {
        EmbeddingState {
            users: array![[value]],
            items: array![[0.0]],
            aggregator: None,
        }
    }

    fn grads(g: f64) -> ParamGradients {
        ParamGradients {
            users: array![[g]],
            items: array![[0.0]],
            aggregator: None,
        }
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = single(0.0);
        let mut opt = OptimizerState::new(&s);
        adam_step(&mut s, &grads(1.0), &mut opt, 1e-3).unwrap();
        // -lr * g / (|g| + eps)
        let expected = -1e-3 * 1.0 / (1.0 + EPSILON);
        assert!((s.users[[0, 0]] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = single(0.5);
        let mut opt = OptimizerState::new(&s);
        adam_step(&mut s, &grads(2.0), &mut opt, 1e-2).unwrap();
        let before = s.users[[0, 0]];
        let (m1, _) = opt.user_moments();
        let m1 = m1[[0, 0]];
        adam_step(&mut s, &grads(0.0), &mut opt, 1e-2).unwrap();
        let (m2, _) = opt.user_moments();
        assert!((m2[[0, 0]] - BETA1 * m1).abs() < 1e-15);
        // stale moments still move the parameter, but with zero gradient on an
        // untouched entry nothing happens
        assert_eq!(s.items[[0, 0]], 0.0);
        assert_ne!(s.users[[0, 0]], before);
    }

    #[test]
    fn constant_gradient_steps_approach_lr() {
        let mut s = single(0.0);
        let mut opt = OptimizerState::new(&s);
        let mut prev = 0.0;
        let mut last_step = 0.0;
        for _ in 0..2000 {
            adam_step(&mut s, &grads(-3.0), &mut opt, 1e-3).unwrap();
            last_step = s.users[[0, 0]] - prev;
            prev = s.users[[0, 0]];
        }
        assert!((last_step - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn nan_gradient_aborts_untouched() {
        let mut s = single(0.25);
        let mut opt = OptimizerState::new(&s);
        let err = adam_step(&mut s, &grads(f64::NAN), &mut opt, 1e-3).unwrap_err();
        assert!(matches!(
            err,
            Error::NonFinite {
                param: "users",
                step: 1,
                ..
            }
        ));
        assert_eq!(s.users[[0, 0]], 0.25);
        assert_eq!(opt.step(), 0);
    }
}
