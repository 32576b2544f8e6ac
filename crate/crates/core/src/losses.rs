//! Losses generated from labelers and their aggregation.
//!
//! Per example `x` with `m(x)` non-abstaining labelers the objective is
//! `Σ_i u_i [ CE(h(x), λ_i(x)) + α · pen_i(x) ]` with `u_i = w_i / m(x)`,
//! where `pen_i` hinges the model's input gradient against `c` times the
//! smoothed labeler gradient on the entries the labeler reads.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelers::{smoothed_gradient, LabelerSpec, SmoothedLabelerGradient, Vote, VoteMatrix};
use crate::labelmodels::{accuracy_weights, AccuracyEstimate};
use crate::nnet::{Forward, MlpModel, Mode, ParamGradient};
use crate::rng::Rng;

pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    None,
    Square,
    Linear,
    Exponential,
}

impl PenaltyKind {
    /// Penalty of one hinge residual `r >= 0`.
    pub fn value(self, r: f64) -> f64 {
        match self {
            PenaltyKind::None => 0.0,
            PenaltyKind::Square => r * r,
            PenaltyKind::Linear => r,
            PenaltyKind::Exponential => r.exp_m1(),
        }
    }

    /// d value / d r, taken as 0 on an inactive hinge.
    pub fn slope(self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match self {
            PenaltyKind::None => 0.0,
            PenaltyKind::Square => 2.0 * r,
            PenaltyKind::Linear => 1.0,
            PenaltyKind::Exponential => r.exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    Coverage,
    Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LossConfig {
    pub penalty: PenaltyKind,
    pub alpha: f64,
    pub threshold: f64,
    pub smoothing_samples: usize,
    pub smoothing_epsilon: f64,
    pub top_k: Option<usize>,
    pub weighting: Weighting,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            penalty: PenaltyKind::Square,
            alpha: 0.01,
            threshold: 1.0,
            smoothing_samples: 1,
            smoothing_epsilon: 0.0,
            top_k: None,
            weighting: Weighting::Uniform,
        }
    }
}

impl LossConfig {
    pub fn simple() -> Self {
        LossConfig {
            penalty: PenaltyKind::None,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return bad(format!("threshold c must be >= 0, got {}", self.threshold));
        }
        if self.smoothing_samples == 0 {
            return bad("smoothing samples t must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.smoothing_epsilon) {
            return bad(format!(
                "smoothing epsilon must be in [0,1), got {}",
                self.smoothing_epsilon
            ));
        }
        if self.top_k == Some(0) {
            return bad("topK must be positive".into());
        }
        Ok(())
    }

    /// The penalty contributes only with a real kind and `α > 0`.
    pub fn penalty_active(&self) -> bool {
        self.penalty != PenaltyKind::None && self.alpha > 0.0
    }
}

/// Per-labeler multipliers applied before the `1/m(x)` normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightScheme {
    pub kind: Weighting,
    pub weights: Vec<f64>,
}

impl WeightScheme {
    pub fn uniform(m: usize) -> Self {
        WeightScheme {
            kind: Weighting::Uniform,
            weights: vec![1.0; m],
        }
    }
}

pub fn build_weight_scheme(
    kind: Weighting,
    vm: &VoteMatrix,
    acc: Option<&AccuracyEstimate>,
) -> Result<WeightScheme> {
    let m = vm.num_labelers();
    let coverage = vm.coverage_counts();
    let inverse_coverage = |i: usize| -> f64 {
        if coverage[i] == 0 {
            log::warn!(
                "labeler {} never votes; dropping it from the objective",
                vm.labeler_names()[i]
            );
            0.0
        } else {
            1.0 / coverage[i] as f64
        }
    };
    let weights = match kind {
        Weighting::Uniform => vec![1.0; m],
        Weighting::Coverage => (0..m).map(inverse_coverage).collect(),
        Weighting::Accuracy => {
            let acc = acc.ok_or_else(|| {
                Error::Config("accuracy weighting needs accuracy estimates".into())
            })?;
            if acc.per_labeler.len() != m {
                return Err(Error::Shape(format!(
                    "{} accuracy estimates for {m} labelers",
                    acc.per_labeler.len()
                )));
            }
            let normalized = accuracy_weights(acc)?;
            (0..m)
                .map(|i| normalized[i] * inverse_coverage(i))
                .collect()
        }
    };
    Ok(WeightScheme { kind, weights })
}

/// Output-space loss against one vote or a soft target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputLoss {
    CrossEntropy,
    /// `½‖h − target‖²`; equals `(h₁ − v)²` for two classes.
    Square,
}

impl OutputLoss {
    /// Loss and `∂/∂h` against a soft target.
    pub fn soft(self, h: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
        match self {
            OutputLoss::CrossEntropy => {
                let mut value = 0.0;
                let grad = h
                    .iter()
                    .zip(target)
                    .map(|(&p, &q)| {
                        if q == 0.0 {
                            return 0.0;
                        }
                        value -= q * p.max(PROBABILITY_FLOOR).ln();
                        if p < PROBABILITY_FLOOR {
                            0.0
                        } else {
                            -q / p
                        }
                    })
                    .collect();
                (value, grad)
            }
            OutputLoss::Square => {
                let grad: Vec<f64> = h.iter().zip(target).map(|(p, q)| p - q).collect();
                (0.5 * grad.iter().map(|g| g * g).sum::<f64>(), grad)
            }
        }
    }

    pub fn vote(self, h: &[f64], class: usize) -> (f64, Vec<f64>) {
        match self {
            OutputLoss::CrossEntropy => {
                let p = h[class];
                let mut grad = vec![0.0; h.len()];
                if p >= PROBABILITY_FLOOR {
                    grad[class] = -1.0 / p;
                }
                (-p.max(PROBABILITY_FLOOR).ln(), grad)
            }
            OutputLoss::Square => {
                let mut target = vec![0.0; h.len()];
                target[class] = 1.0;
                self.soft(h, &target)
            }
        }
    }
}

/// `−log h_vote` with a `1e-12` floor, and its gradient w.r.t. `h`.
pub fn simple_loss(h: &[f64], vote: Vote) -> Result<(f64, Vec<f64>)> {
    let class = vote
        .class()
        .ok_or_else(|| Error::Config("simple loss called with an abstain vote".into()))?;
    if class >= h.len() {
        return Err(Error::Shape(format!(
            "vote {class} outside {} classes",
            h.len()
        )));
    }
    Ok(OutputLoss::CrossEntropy.vote(h, class))
}

/// `Σ_i u_i ℓ(h, λ_i)` over a vote row; zero when every labeler abstains.
pub fn aggregate_vote_loss(
    h: &[f64],
    votes: &[Vote],
    weights: &[f64],
    loss: OutputLoss,
) -> (f64, Vec<f64>) {
    let m = votes.iter().filter(|v| !v.is_abstain()).count();
    let mut value = 0.0;
    let mut grad = vec![0.0; h.len()];
    if m == 0 {
        return (value, grad);
    }
    for (i, v) in votes.iter().enumerate() {
        if let Some(c) = v.class() {
            let u = weights[i] / m as f64;
            let (l, g) = loss.vote(h, c);
            value += u * l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += u * b;
            }
        }
    }
    (value, grad)
}

/// Hinge penalty of one labeler on one example.
#[derive(Debug, Clone, PartialEq)]
pub struct Hinge {
    pub value: f64,
    /// `(j, y, r)` with `r = max(c·g_λ − g_h, 0)`.
    pub residuals: Vec<(usize, usize, f64)>,
    /// `(j, y, ∂value/∂g_h)`.
    pub sensitivities: Vec<(usize, usize, f64)>,
}

/// `model_grad` holds `(j, y, ∂h_y/∂x_j)` sorted by `(j, y)` and must cover
/// every entry of `labeler_grad`.
pub fn hinge_penalty(
    model_grad: &[(usize, usize, f64)],
    labeler_grad: &SmoothedLabelerGradient,
    c: f64,
    kind: PenaltyKind,
) -> Result<Hinge> {
    let mut value = 0.0;
    let mut residuals = Vec::with_capacity(labeler_grad.entries.len());
    let mut sensitivities = Vec::with_capacity(labeler_grad.entries.len());
    for &(j, y, g_lambda) in &labeler_grad.entries {
        let g_h = model_grad
            .binary_search_by(|e| (e.0, e.1).cmp(&(j, y)))
            .map(|i| model_grad[i].2)
            .map_err(|_| Error::Shape(format!("model input gradient missing entry ({j}, {y})")))?;
        let r = (c * g_lambda - g_h).max(0.0);
        value += kind.value(r);
        residuals.push((j, y, r));
        sensitivities.push((j, y, -kind.slope(r)));
    }
    Ok(Hinge {
        value,
        residuals,
        sensitivities,
    })
}

/// Bernoulli parameters `(1−ε)·min(x,1) + ε/2`.
pub fn smoothing_phi(x: &[f64], epsilon: f64) -> Vec<f64> {
    x.iter()
        .map(|&v| (1.0 - epsilon) * if v > 0.0 { 1.0 } else { 0.0 } + epsilon / 2.0)
        .collect()
}

/// Points at which the model's input gradient is averaged: `t` draws from
/// `Ber(φ)`, or the binarized input itself when `ε = 0`.
fn smoothing_points(x: &[f64], cfg: &LossConfig, rng: &mut Rng) -> Vec<Vec<f64>> {
    if cfg.smoothing_epsilon == 0.0 {
        return vec![smoothing_phi(x, 0.0)];
    }
    let phi = smoothing_phi(x, cfg.smoothing_epsilon);
    (0..cfg.smoothing_samples)
        .map(|_| {
            phi.iter()
                .map(|&p| if rng.gen::<f64>() < p { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

fn sorted_pairs(mut needed: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    needed.sort_unstable();
    needed.dedup();
    needed
}

fn averaged_input_grad(
    model: &MlpModel,
    forwards: &[Forward],
    needed: &[(usize, usize)],
) -> Result<Vec<(usize, usize, f64)>> {
    let mut out: Vec<(usize, usize, f64)> = needed.iter().map(|&(j, y)| (j, y, 0.0)).collect();
    let t = forwards.len() as f64;
    // Group by class: one adjoint sweep per (sample, class).
    let mut classes: Vec<usize> = needed.iter().map(|p| p.1).collect();
    classes.sort_unstable();
    classes.dedup();
    for fwd in forwards {
        for &y in &classes {
            let idx: Vec<usize> = (0..needed.len()).filter(|&i| needed[i].1 == y).collect();
            let feats: Vec<usize> = idx.iter().map(|&i| needed[i].0).collect();
            let vals = model.input_grad_entries(fwd, y, &feats)?;
            for (i, v) in idx.into_iter().zip(vals) {
                out[i].2 += v / t;
            }
        }
    }
    Ok(out)
}

/// `(1/t) Σ_s ∂h_y(z_s)/∂x_j` at the requested `(j, y)` pairs, sorted.
pub fn model_smoothed_grad(
    model: &MlpModel,
    x: &[f64],
    cfg: &LossConfig,
    needed: &[(usize, usize)],
    rng: &mut Rng,
) -> Result<Vec<(usize, usize, f64)>> {
    let forwards = smoothing_points(x, cfg, rng)
        .iter()
        .map(|z| model.forward(z, Mode::Eval))
        .collect::<Result<Vec<_>>>()?;
    averaged_input_grad(model, &forwards, &sorted_pairs(needed.to_vec()))
}

/// Smoothed gradients of every labeler at `φ(x)`, restricted to the voted
/// class and optionally top-k masked. `None` marks labelers that abstain
/// here or whose gradient is unavailable.
pub fn labeler_gradients_at(
    specs: &[LabelerSpec],
    x: &[f64],
    votes: &[Vote],
    cfg: &LossConfig,
    num_classes: usize,
) -> Result<Vec<Option<SmoothedLabelerGradient>>> {
    let phi = smoothing_phi(x, cfg.smoothing_epsilon);
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let Some(class) = votes[i].class() else {
                return Ok(None);
            };
            let full = match smoothed_gradient(spec, i, &phi, num_classes) {
                Ok(g) => g,
                Err(Error::Unsupported(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut g = SmoothedLabelerGradient {
                labeler_index: i,
                entries: full.entries.into_iter().filter(|e| e.1 == class).collect(),
            };
            if let Some(k) = cfg.top_k {
                g = g.top_k(k);
            }
            Ok(Some(g))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PerExampleLoss {
    pub value: f64,
    pub classification_part: f64,
    pub penalty_part: f64,
    pub labelers: Vec<usize>,
}

impl PerExampleLoss {
    fn zero() -> Self {
        PerExampleLoss {
            value: 0.0,
            classification_part: 0.0,
            penalty_part: 0.0,
            labelers: Vec::new(),
        }
    }
}

/// Randomness used by one objective evaluation.
pub struct ObjectiveRngs<'a> {
    /// Dropout for the classification term; `None` evaluates in eval mode.
    pub dropout: Option<&'a mut Rng>,
    pub smoothing: &'a mut Rng,
}

/// Adds `scale · ∇_θ objective(x)` into `out` and returns the loss.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_example_objective(
    model: &MlpModel,
    x: &[f64],
    votes: &[Vote],
    labeler_grads: &[Option<SmoothedLabelerGradient>],
    cfg: &LossConfig,
    weights: &WeightScheme,
    rngs: ObjectiveRngs<'_>,
    scale: f64,
    out: &mut ParamGradient,
) -> Result<PerExampleLoss> {
    let m = votes.iter().filter(|v| !v.is_abstain()).count();
    if votes.len() != weights.weights.len() {
        return Err(Error::Shape(format!(
            "{} votes for {} labeler weights",
            votes.len(),
            weights.weights.len()
        )));
    }
    if m == 0 {
        return Ok(PerExampleLoss::zero());
    }
    let mode = match rngs.dropout {
        Some(rng) => Mode::Train(rng),
        None => Mode::Eval,
    };
    let fwd = model.forward(x, mode)?;
    let h = fwd.probs();
    let u: Vec<f64> = weights.weights.iter().map(|w| w / m as f64).collect();
    let mut loss = PerExampleLoss::zero();
    let mut out_grad = vec![0.0; h.len()];
    for (i, v) in votes.iter().enumerate() {
        let Some(class) = v.class() else { continue };
        let (l, g) = OutputLoss::CrossEntropy.vote(h, class);
        if !l.is_finite() {
            return Err(Error::NonFinite(format!(
                "classification loss of labeler {i}"
            )));
        }
        loss.classification_part += u[i] * l;
        for (a, b) in out_grad.iter_mut().zip(g) {
            *a += u[i] * b;
        }
        loss.labelers.push(i);
    }
    model.accumulate_param_grad(&fwd, &out_grad, scale, out)?;

    if cfg.penalty_active() {
        let active: Vec<&SmoothedLabelerGradient> = loss
            .labelers
            .iter()
            .filter_map(|&i| labeler_grads.get(i).and_then(|g| g.as_ref()))
            .filter(|g| !g.entries.is_empty())
            .collect();
        if !active.is_empty() {
            let needed = sorted_pairs(
                active
                    .iter()
                    .flat_map(|g| g.entries.iter().map(|e| (e.0, e.1)))
                    .collect(),
            );
            let forwards = smoothing_points(x, cfg, rngs.smoothing)
                .iter()
                .map(|z| model.forward(z, Mode::Eval))
                .collect::<Result<Vec<_>>>()?;
            let g_h = averaged_input_grad(model, &forwards, &needed)?;
            let mut coefficients: Vec<(usize, usize, f64)> =
                needed.iter().map(|&(j, y)| (j, y, 0.0)).collect();
            for g in active {
                let i = g.labeler_index;
                let hinge = hinge_penalty(&g_h, g, cfg.threshold, cfg.penalty)?;
                if !hinge.value.is_finite() {
                    return Err(Error::NonFinite(format!("penalty of labeler {i}")));
                }
                loss.penalty_part += u[i] * hinge.value;
                for (j, y, s) in hinge.sensitivities {
                    let at = needed
                        .binary_search(&(j, y))
                        .expect("entry collected above");
                    coefficients[at].2 += cfg.alpha * u[i] * s;
                }
            }
            let t = forwards.len() as f64;
            for fwd in &forwards {
                model.accumulate_input_grad_param_grad(fwd, &coefficients, scale / t, out)?;
            }
        }
    }
    loss.value = if cfg.penalty_active() {
        loss.classification_part + cfg.alpha * loss.penalty_part
    } else {
        loss.classification_part
    };
    if !loss.value.is_finite() {
        return Err(Error::NonFinite("example objective".into()));
    }
    Ok(loss)
}

/// Loss and full parameter gradient for one example.
pub fn example_objective(
    model: &MlpModel,
    x: &[f64],
    votes: &[Vote],
    labeler_grads: &[Option<SmoothedLabelerGradient>],
    cfg: &LossConfig,
    weights: &WeightScheme,
    rngs: ObjectiveRngs<'_>,
) -> Result<(PerExampleLoss, ParamGradient)> {
    let mut grad = ParamGradient::zeros_like(model);
    let loss = accumulate_example_objective(
        model,
        x,
        votes,
        labeler_grads,
        cfg,
        weights,
        rngs,
        1.0,
        &mut grad,
    )?;
    Ok((loss, grad))
}
