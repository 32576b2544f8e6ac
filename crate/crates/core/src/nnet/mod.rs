//! Feed-forward ReLU classifier with a softmax head.
//!
//! Besides ordinary parameter gradients the network exposes input gradients
//! `∂h_y/∂x_j` and the parameter gradient of any linear functional of them,
//! `∇_θ Σ β_{jy} ∂h_y/∂x_j`. The latter pushes a tangent (directional
//! derivative along β) forward through the eval-mode network and then
//! reverse-differentiates the primal and tangent streams together, which is
//! exact up to floating point (ReLU has zero second derivative a.e.).

mod adam;
mod checkpoint;

pub use adam::{adam_step, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint,
    CHECKPOINT_FORMAT_VERSION,
};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 16];
pub const DEFAULT_DROPOUT: f64 = 0.2;

/// Parameter-shaped vector (same flat layout as [`MlpModel::params`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient(pub Vec<f64>);

impl ParamGradient {
    pub fn zeros_like(model: &MlpModel) -> Self {
        ParamGradient(vec![0.0; model.params.len()])
    }

    pub fn add_scaled(&mut self, other: &ParamGradient, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    weight_offset: usize,
    bias_offset: usize,
}

/// Multilayer perceptron `d → hidden… → k` with ReLU and inverted dropout
/// between hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
    dropout_rate: f64,
    version: u64,
}

pub enum Mode<'a> {
    Eval,
    /// Dropout masks are drawn from the given stream.
    Train(&'a mut Rng),
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    version: u64,
    input: Vec<f64>,
    nonzero: Vec<usize>,
    /// Post-activation (after ReLU and dropout) of every hidden layer.
    hidden: Vec<Vec<f64>>,
    /// d(post-activation)/d(pre-activation) of every hidden layer: the ReLU
    /// mask times the dropout scale.
    slopes: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl Forward {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Backpropagates `g = ∂L/∂p` through the softmax: `p ⊙ (g − p·g)`.
fn softmax_vjp(p: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
    p.iter().zip(g).map(|(pk, gk)| pk * (gk - dot)).collect()
}

impl MlpModel {
    /// He-uniform initialized weights, zero biases.
    pub fn new(layer_sizes: Vec<usize>, dropout_rate: f64, rng: &mut Rng) -> Result<Self> {
        let mut model = Self::zeros(layer_sizes, dropout_rate)?;
        for shape in model.shapes() {
            let bound = (6.0 / shape.inputs as f64).sqrt();
            for w in &mut model.params
                [shape.weight_offset..shape.weight_offset + shape.inputs * shape.outputs]
            {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(model)
    }

    pub fn zeros(layer_sizes: Vec<usize>, dropout_rate: f64) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|s| *s == 0) {
            return Err(Error::Config(format!(
                "layer sizes must be at least [d, k] and positive, got {layer_sizes:?}"
            )));
        }
        if *layer_sizes.last().unwrap() < 2 {
            return Err(Error::Config("need at least 2 output classes".into()));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0,1), got {dropout_rate}"
            )));
        }
        let count = layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(MlpModel {
            layer_sizes,
            params: vec![0.0; count],
            dropout_rate,
            version: 0,
        })
    }

    /// `[d, 64, 16, k]`.
    pub fn default_sizes(input_dim: usize, num_classes: usize) -> Vec<usize> {
        let mut sizes = vec![input_dim];
        sizes.extend(DEFAULT_HIDDEN);
        sizes.push(num_classes);
        sizes
    }

    pub fn from_params(
        layer_sizes: Vec<usize>,
        dropout_rate: f64,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut model = Self::zeros(layer_sizes, dropout_rate)?;
        if params.len() != model.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters for a network needing {}",
                params.len(),
                model.params.len()
            )));
        }
        model.params = params;
        Ok(model)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access; invalidates cached forward passes.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn shapes(&self) -> Vec<LayerShape> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let shape = LayerShape {
                    inputs: w[0],
                    outputs: w[1],
                    weight_offset: offset,
                    bias_offset: offset + w[0] * w[1],
                };
                offset += w[0] * w[1] + w[1];
                shape
            })
            .collect()
    }

    fn weight(&self, s: &LayerShape, out: usize, inp: usize) -> f64 {
        self.params[s.weight_offset + out * s.inputs + inp]
    }

    pub fn forward(&self, x: &[f64], mode: Mode<'_>) -> Result<Forward> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input of length {} for a network expecting {}",
                x.len(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        let mut dropout = match mode {
            Mode::Eval => None,
            Mode::Train(rng) => Some(rng),
        };
        let shapes = self.shapes();
        let nonzero: Vec<usize> = (0..x.len()).filter(|&j| x[j] != 0.0).collect();
        let last = shapes.len() - 1;
        let mut hidden = Vec::with_capacity(last);
        let mut slopes = Vec::with_capacity(last);
        let mut logits = Vec::new();
        for (l, s) in shapes.iter().enumerate() {
            let mut z = self.params[s.bias_offset..s.bias_offset + s.outputs].to_vec();
            if l == 0 {
                for &j in &nonzero {
                    let xj = x[j];
                    for (o, zo) in z.iter_mut().enumerate() {
                        *zo += self.weight(s, o, j) * xj;
                    }
                }
            } else {
                let prev: &Vec<f64> = &hidden[l - 1];
                for (o, zo) in z.iter_mut().enumerate() {
                    let row = &self.params
                        [s.weight_offset + o * s.inputs..s.weight_offset + (o + 1) * s.inputs];
                    *zo += row.iter().zip(prev).map(|(w, a)| w * a).sum::<f64>();
                }
            }
            if l == last {
                logits = z;
                break;
            }
            let mut slope: Vec<f64> = z.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
            if let Some(rng) = dropout.as_deref_mut() {
                if self.dropout_rate > 0.0 {
                    let keep_scale = 1.0 / (1.0 - self.dropout_rate);
                    for s in &mut slope {
                        let dropped = rng.gen::<f64>() < self.dropout_rate;
                        *s *= if dropped { 0.0 } else { keep_scale };
                    }
                }
            }
            let act: Vec<f64> = z.iter().zip(&slope).map(|(v, s)| v * s).collect();
            hidden.push(act);
            slopes.push(slope);
        }
        let probs = softmax(&logits);
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("softmax output".into()));
        }
        Ok(Forward {
            version: self.version,
            input: x.to_vec(),
            nonzero,
            hidden,
            slopes,
            probs,
        })
    }

    /// Eval-mode class probabilities.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x, Mode::Eval)?.probs)
    }

    fn check_fresh(&self, fwd: &Forward) -> Result<()> {
        if fwd.version != self.version {
            return Err(Error::StaleCache);
        }
        Ok(())
    }

    /// Gradient of a scalar loss w.r.t. all parameters, given `∂L/∂h` at the
    /// cached forward pass.
    pub fn param_grad(&self, fwd: &Forward, loss_grad_at_output: &[f64]) -> Result<ParamGradient> {
        let mut out = ParamGradient::zeros_like(self);
        self.accumulate_param_grad(fwd, loss_grad_at_output, 1.0, &mut out)?;
        Ok(out)
    }

    /// Adds `scale · ∇_θ L` into `out`.
    pub fn accumulate_param_grad(
        &self,
        fwd: &Forward,
        loss_grad_at_output: &[f64],
        scale: f64,
        out: &mut ParamGradient,
    ) -> Result<()> {
        self.check_fresh(fwd)?;
        if loss_grad_at_output.len() != self.num_classes() {
            return Err(Error::Shape("output gradient length differs from k".into()));
        }
        let delta: Vec<f64> = softmax_vjp(&fwd.probs, loss_grad_at_output)
            .into_iter()
            .map(|d| d * scale)
            .collect();
        self.backprop(fwd, delta, None, &mut out.0);
        Ok(())
    }

    /// Reverse pass from the output-layer pre-activation adjoint `delta`.
    /// With `tangent = Some((tangent_adjoint, tangent_acts, direction))` the
    /// tangent stream is differentiated alongside (see module docs).
    fn backprop(
        &self,
        fwd: &Forward,
        mut delta: Vec<f64>,
        mut tangent: Option<(Vec<f64>, &[Vec<f64>], &[(usize, f64)])>,
        out: &mut [f64],
    ) {
        let shapes = self.shapes();
        for l in (0..shapes.len()).rev() {
            let s = &shapes[l];
            if l == 0 {
                for (o, d) in delta.iter().enumerate() {
                    let row = s.weight_offset + o * s.inputs;
                    for &j in &fwd.nonzero {
                        out[row + j] += d * fwd.input[j];
                    }
                }
                if let Some((tdelta, _, direction)) = &tangent {
                    for (o, d) in tdelta.iter().enumerate() {
                        let row = s.weight_offset + o * s.inputs;
                        for &(j, beta) in direction.iter() {
                            out[row + j] += d * beta;
                        }
                    }
                }
            } else {
                let prev = &fwd.hidden[l - 1];
                for (o, d) in delta.iter().enumerate() {
                    let row = s.weight_offset + o * s.inputs;
                    for (i, a) in prev.iter().enumerate() {
                        out[row + i] += d * a;
                    }
                }
                if let Some((tdelta, tacts, _)) = &tangent {
                    let tprev = &tacts[l - 1];
                    for (o, d) in tdelta.iter().enumerate() {
                        let row = s.weight_offset + o * s.inputs;
                        for (i, a) in tprev.iter().enumerate() {
                            out[row + i] += d * a;
                        }
                    }
                }
            }
            for (o, d) in delta.iter().enumerate() {
                out[s.bias_offset + o] += d;
            }
            if l == 0 {
                break;
            }
            let slope = &fwd.slopes[l - 1];
            delta = self.pull_back(s, &delta, slope);
            if let Some((tdelta, _, _)) = tangent.as_mut() {
                *tdelta = self.pull_back(s, tdelta, slope);
            }
        }
    }

    /// `slope ⊙ (Wᵀ delta)` for a layer.
    fn pull_back(&self, s: &LayerShape, delta: &[f64], slope: &[f64]) -> Vec<f64> {
        let mut prev = vec![0.0; s.inputs];
        for (o, d) in delta.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            let row =
                &self.params[s.weight_offset + o * s.inputs..s.weight_offset + (o + 1) * s.inputs];
            for (p, w) in prev.iter_mut().zip(row) {
                *p += d * w;
            }
        }
        for (p, s) in prev.iter_mut().zip(slope) {
            *p *= s;
        }
        prev
    }

    /// First-layer adjoint for `∂h_y/∂x` at a cached forward pass.
    fn class_input_adjoint(&self, fwd: &Forward, class: usize) -> Vec<f64> {
        let shapes = self.shapes();
        let p = &fwd.probs;
        let mut delta: Vec<f64> = (0..p.len())
            .map(|k| p[k] * (if k == class { 1.0 } else { 0.0 } - p[class]))
            .collect();
        for l in (1..shapes.len()).rev() {
            delta = self.pull_back(&shapes[l], &delta, &fwd.slopes[l - 1]);
        }
        delta
    }

    fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.num_classes() {
            return Err(Error::Config(format!(
                "class {class} outside [0,{})",
                self.num_classes()
            )));
        }
        Ok(())
    }

    /// `∂h_y/∂x` (length d) in eval mode.
    pub fn input_grad(&self, x: &[f64], class: usize) -> Result<Vec<f64>> {
        self.check_class(class)?;
        let fwd = self.forward(x, Mode::Eval)?;
        let all: Vec<usize> = (0..self.input_dim()).collect();
        self.input_grad_entries(&fwd, class, &all)
    }

    /// `∂h_y/∂x_j` for the listed features only.
    pub fn input_grad_entries(
        &self,
        fwd: &Forward,
        class: usize,
        features: &[usize],
    ) -> Result<Vec<f64>> {
        self.check_fresh(fwd)?;
        self.check_class(class)?;
        let delta = self.class_input_adjoint(fwd, class);
        let s = self.shapes()[0];
        features
            .iter()
            .map(|&j| {
                if j >= s.inputs {
                    return Err(Error::Shape(format!("feature {j} outside input")));
                }
                Ok(delta
                    .iter()
                    .enumerate()
                    .map(|(o, d)| d * self.weight(&s, o, j))
                    .sum())
            })
            .collect()
    }

    /// Adds `scale · ∇_θ Σ β · ∂h_y/∂x_j` over `coefficients = [(j, y, β)]`
    /// into `out`. `fwd` must be an eval-mode pass.
    pub fn accumulate_input_grad_param_grad(
        &self,
        fwd: &Forward,
        coefficients: &[(usize, usize, f64)],
        scale: f64,
        out: &mut ParamGradient,
    ) -> Result<()> {
        self.check_fresh(fwd)?;
        let k = self.num_classes();
        let mut classes: Vec<usize> = coefficients.iter().map(|c| c.1).collect();
        classes.sort_unstable();
        classes.dedup();
        let shapes = self.shapes();
        let last = shapes.len() - 1;
        for y in classes {
            self.check_class(y)?;
            let direction: Vec<(usize, f64)> = coefficients
                .iter()
                .filter(|c| c.1 == y && c.2 != 0.0)
                .map(|c| (c.0, c.2 * scale))
                .collect();
            if direction.is_empty() {
                continue;
            }
            if let Some(&(j, _)) = direction.iter().find(|d| d.0 >= self.input_dim()) {
                return Err(Error::Shape(format!("feature {j} outside input")));
            }
            // Tangent forward pass along the direction.
            let mut tangent_acts: Vec<Vec<f64>> = Vec::with_capacity(last);
            let mut zdot = vec![0.0; shapes[0].outputs];
            for &(j, beta) in &direction {
                for (o, zo) in zdot.iter_mut().enumerate() {
                    *zo += self.weight(&shapes[0], o, j) * beta;
                }
            }
            for l in 0..last {
                let adot: Vec<f64> = zdot
                    .iter()
                    .zip(&fwd.slopes[l])
                    .map(|(z, s)| z * s)
                    .collect();
                let s = &shapes[l + 1];
                zdot = (0..s.outputs)
                    .map(|o| {
                        let row = &self.params
                            [s.weight_offset + o * s.inputs..s.weight_offset + (o + 1) * s.inputs];
                        row.iter().zip(&adot).map(|(w, a)| w * a).sum()
                    })
                    .collect();
                tangent_acts.push(adot);
            }
            // s = ṗ_y = p_y (ż_y − p·ż); seed adjoints of ż and z.
            let p = &fwd.probs;
            let pz: f64 = p.iter().zip(&zdot).map(|(a, b)| a * b).sum();
            let tangent_adjoint: Vec<f64> = (0..k)
                .map(|c| p[y] * (if c == y { 1.0 } else { 0.0 } - p[c]))
                .collect();
            let prob_adjoint: Vec<f64> = (0..k)
                .map(|c| (if c == y { zdot[y] - pz } else { 0.0 }) - p[y] * zdot[c])
                .collect();
            let delta = softmax_vjp(p, &prob_adjoint);
            self.backprop(
                fwd,
                delta,
                Some((tangent_adjoint, &tangent_acts, &direction)),
                &mut out.0,
            );
        }
        if !out.is_finite() {
            return Err(Error::NonFinite(
                "input-gradient penalty parameter gradient".into(),
            ));
        }
        Ok(())
    }

    /// `∇_θ Σ β · ∂h_y/∂x_j` at `x` (eval mode).
    pub fn penalty_param_grad(
        &self,
        x: &[f64],
        coefficients: &[(usize, usize, f64)],
    ) -> Result<ParamGradient> {
        let fwd = self.forward(x, Mode::Eval)?;
        let mut out = ParamGradient::zeros_like(self);
        self.accumulate_input_grad_param_grad(&fwd, coefficients, 1.0, &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};

    fn random_model(sizes: &[usize], seed: u64) -> MlpModel {
        let mut rng = rng::stream(seed, Stream::Init);
        let mut m = MlpModel::new(sizes.to_vec(), 0.2, &mut rng).unwrap();
        for b in m.params_mut() {
            *b += rng.gen_range(-0.1..0.1);
        }
        m
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = MlpModel::zeros(vec![4, 3, 3], 0.0).unwrap();
        let p = m.predict(&[1.0, 2.0, 0.0, 3.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn eval_is_bit_reproducible_and_normalized() {
        let m = random_model(&[6, 5, 4, 3], 1);
        let x = [0.5, 0.0, 1.0, 2.0, 0.0, 1.0];
        let a = m.predict(&x).unwrap();
        let b = m.predict(&x).unwrap();
        assert_eq!(a, b);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn train_mode_dropout_is_seeded() {
        let m = random_model(&[6, 32, 3], 2);
        let x = [0.5, 0.3, 1.0, 2.0, 0.0, 1.0];
        let a = m
            .forward(&x, Mode::Train(&mut rng::stream(1, Stream::Dropout)))
            .unwrap();
        let b = m
            .forward(&x, Mode::Train(&mut rng::stream(1, Stream::Dropout)))
            .unwrap();
        assert_eq!(a.probs, b.probs);
        assert!(a.slopes[0].iter().any(|s| *s == 0.0));
        assert!(a.slopes[0].iter().any(|s| (*s - 1.25).abs() < 1e-15));
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = random_model(&[3, 2], 3);
        assert!(m.predict(&[1.0, f64::NAN, 0.0]).is_err());
        assert!(m.predict(&[1.0]).is_err());
        assert!(m.input_grad(&[1.0, 0.0, 0.0], 2).is_err());
    }

    #[test]
    fn stale_forward_cache_is_rejected() {
        let mut m = random_model(&[3, 4, 2], 4);
        let fwd = m.forward(&[1.0, 0.0, 1.0], Mode::Eval).unwrap();
        m.params_mut()[0] += 1.0;
        assert!(matches!(
            m.param_grad(&fwd, &[1.0, 0.0]),
            Err(Error::StaleCache)
        ));
    }

    #[test]
    fn zero_output_gradient_gives_zero_param_gradient() {
        let m = random_model(&[3, 4, 2], 5);
        let fwd = m.forward(&[1.0, 0.0, 1.0], Mode::Eval).unwrap();
        let g = m.param_grad(&fwd, &[0.0, 0.0]).unwrap();
        assert!(g.0.iter().all(|v| *v == 0.0));
        // A constant shift of ∂L/∂h along 1 leaves the gradient unchanged.
        let g1 = m.param_grad(&fwd, &[0.3, -0.2]).unwrap();
        let g2 = m.param_grad(&fwd, &[1.3, 0.8]).unwrap();
        for (a, b) in g1.0.iter().zip(&g2.0) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn ignored_feature_has_zero_input_gradient() {
        let mut m = random_model(&[4, 5, 3], 6);
        let d = 4;
        for o in 0..5 {
            m.params_mut()[o * d + 2] = 0.0;
        }
        let g = m.input_grad(&[1.0, 0.5, 1.0, 0.0], 1).unwrap();
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn input_gradients_sum_to_zero_over_classes() {
        let m = random_model(&[5, 6, 4, 3], 7);
        let x = [1.0, 0.0, 0.3, 1.0, 0.7];
        let grads: Vec<Vec<f64>> = (0..3).map(|y| m.input_grad(&x, y).unwrap()).collect();
        for j in 0..5 {
            let s: f64 = grads.iter().map(|g| g[j]).sum();
            assert!(s.abs() < 1e-14, "{s}");
        }
    }

    #[test]
    fn empty_coefficients_give_zero_gradient() {
        let m = random_model(&[5, 6, 3], 8);
        let g = m
            .penalty_param_grad(&[1.0, 0.0, 1.0, 0.0, 1.0], &[])
            .unwrap();
        assert!(g.0.iter().all(|v| *v == 0.0));
    }
}
