use super::{MlpModel, ParamGradient};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Adam moments plus the step hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub weight_decay: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(model: &MlpModel, learning_rate: f64, weight_decay: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) || !(weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "need lr > 0 and wd >= 0, got lr={learning_rate} wd={weight_decay}"
            )));
        }
        Ok(OptimizerState {
            learning_rate,
            weight_decay,
            first_moment: vec![0.0; model.num_params()],
            second_moment: vec![0.0; model.num_params()],
            step: 0,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One Adam update with decoupled weight decay (decay applied first).
pub fn adam_step(
    model: &mut MlpModel,
    state: &mut OptimizerState,
    grad: &ParamGradient,
) -> Result<()> {
    if grad.0.len() != model.num_params() || state.first_moment.len() != model.num_params() {
        return Err(Error::Shape(format!(
            "gradient of length {} for {} parameters",
            grad.0.len(),
            model.num_params()
        )));
    }
    if !grad.is_finite() {
        return Err(Error::NonFinite("parameter gradient".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - ADAM_BETA1.powi(t);
    let bias2 = 1.0 - ADAM_BETA2.powi(t);
    let lr = state.learning_rate;
    let decay = 1.0 - lr * state.weight_decay;
    let params = model.params_mut();
    for (i, theta) in params.iter_mut().enumerate() {
        let g = grad.0[i];
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        *theta *= decay;
        *theta -= lr * (*m / bias1) / ((*v / bias2).sqrt() + ADAM_EPSILON);
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("parameters after Adam step".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};

    fn model() -> MlpModel {
        MlpModel::new(vec![3, 4, 2], 0.0, &mut rng::stream(1, Stream::Init)).unwrap()
    }

    #[test]
    fn zero_gradient_no_decay_is_noop() {
        let mut m = model();
        let before = m.params().to_vec();
        let mut st = OptimizerState::new(&m, 0.01, 0.0).unwrap();
        let zero = ParamGradient::zeros_like(&m);
        adam_step(&mut m, &mut st, &zero).unwrap();
        assert_eq!(m.params(), &before[..]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut m = model();
        let before = m.params().to_vec();
        let g: Vec<f64> = (0..m.num_params())
            .map(|i| if i % 2 == 0 { 0.3 } else { -2.0 })
            .collect();
        let mut st = OptimizerState::new(&m, 0.001, 0.0).unwrap();
        adam_step(&mut m, &mut st, &ParamGradient(g.clone())).unwrap();
        for i in 0..g.len() {
            let delta = m.params()[i] - before[i];
            assert!((delta + 0.001 * g[i].signum()).abs() < 1e-9, "{delta}");
        }
    }

    #[test]
    fn decoupled_decay_scales_parameters() {
        let mut m = model();
        let before = m.params().to_vec();
        let mut st = OptimizerState::new(&m, 0.001, 0.01).unwrap();
        let zero = ParamGradient::zeros_like(&m);
        adam_step(&mut m, &mut st, &zero).unwrap();
        for (a, b) in m.params().iter().zip(&before) {
            assert!((a - b * 0.99999).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut m = model();
        let mut st = OptimizerState::new(&m, 0.001, 0.0).unwrap();
        let mut g = ParamGradient::zeros_like(&m);
        g.0[0] = f64::NAN;
        assert!(matches!(
            adam_step(&mut m, &mut st, &g),
            Err(Error::NonFinite(_))
        ));
    }
}
