//! WebAssembly bindings behind the static page in `www/`.
//!
//! Each export takes plain numbers or strings and returns JSON text; the
//! same computations are available natively through the `*_view` functions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use lolws_core::data::{generate_synthetic, SyntheticTaskConfig};
use lolws_core::labelers::{
    apply_labelers, smoothed_gradient, smoothed_value, LabelerSpec, SmoothedLabelerGradient,
};
use lolws_core::losses::{hinge_penalty, smoothing_phi, LossConfig, PenaltyKind};
use lolws_core::train::{train_once, Method, RunConfig, TaskData, TrainReport};
use lolws_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct KeywordView {
    pub phi: Vec<f64>,
    /// Probability the smoothed keyword rule votes rather than abstains.
    pub fire_probability: f64,
    /// ∂(vote probability)/∂φ_j per keyword.
    pub gradient: Vec<f64>,
}

/// A keyword-any rule over `present.len()` keywords, smoothed at `epsilon`.
pub fn keyword_view(present: &[bool], epsilon: f64) -> Result<KeywordView> {
    if present.is_empty() {
        return Err(Error::Config("need at least one keyword".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Config(format!(
            "epsilon must be in [0,1], got {epsilon}"
        )));
    }
    let n = present.len();
    let spec = LabelerSpec::keyword_any("rule", (0..n).collect(), 1);
    let x: Vec<f64> = present.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect();
    let phi = smoothing_phi(&x, epsilon);
    let value = smoothed_value(&spec, &phi, 2)?;
    let grad = smoothed_gradient(&spec, 0, &phi, 2)?;
    Ok(KeywordView {
        fire_probability: value[1],
        gradient: (0..n).map(|j| grad.get(j, 1).unwrap_or(0.0)).collect(),
        phi,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CurvePoint {
    pub model_gradient: f64,
    pub penalty: f64,
    /// ∂penalty/∂(model gradient).
    pub sensitivity: f64,
}

pub fn parse_penalty(kind: &str) -> Result<PenaltyKind> {
    serde_json::from_value(serde_json::Value::String(kind.to_ascii_lowercase())).map_err(|_| {
        Error::Config(format!(
            "unknown penalty {kind:?} (none, square, linear, exponential)"
        ))
    })
}

/// Penalty on one (feature, class) entry as the model's input gradient
/// sweeps `[lo, hi]` against a fixed labeler gradient.
pub fn penalty_curve_view(
    kind: PenaltyKind,
    threshold: f64,
    labeler_gradient: f64,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<Vec<CurvePoint>> {
    if steps < 2 || !(lo < hi) {
        return Err(Error::Config("need lo < hi and at least 2 steps".into()));
    }
    let lambda = SmoothedLabelerGradient {
        labeler_index: 0,
        entries: vec![(0, 1, labeler_gradient)],
    };
    (0..steps)
        .map(|i| {
            let g = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
            let h = hinge_penalty(&[(0, 1, g)], &lambda, threshold, kind)?;
            Ok(CurvePoint {
                model_gradient: g,
                penalty: h.value,
                sensitivity: h.sensitivities.first().map_or(0.0, |s| s.2),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSummary {
    pub method: Method,
    pub validation_accuracy: Vec<f64>,
    pub penalty_loss: Vec<f64>,
    pub selected_epoch: usize,
    pub test_accuracy: f64,
}

impl From<&TrainReport> for RunSummary {
    fn from(r: &TrainReport) -> Self {
        RunSummary {
            method: r.method,
            validation_accuracy: r.epochs.iter().map(|e| e.validation_accuracy).collect(),
            penalty_loss: r.epochs.iter().map(|e| e.penalty_loss).collect(),
            selected_epoch: r.selected_epoch,
            test_accuracy: r.test_accuracy.unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Comparison {
    pub train_examples: usize,
    pub lol: RunSummary,
    pub simple: RunSummary,
}

/// Small keyword task for in-browser training.
pub fn demo_task_config(seed: u64, num_train: usize) -> SyntheticTaskConfig {
    SyntheticTaskConfig {
        feature_dim: 80,
        num_train,
        num_validation: 200,
        num_test: 600,
        num_labelers: 6,
        keywords_per_labeler: 8,
        keyword_skew: 1.5,
        feature_signal_strength: 0.3,
        rng_seed: seed,
        ..Default::default()
    }
}

/// Trains LoL and LoL-simple on the same task and seed.
pub fn compare_view(
    seed: u64,
    num_train: usize,
    alpha: f64,
    threshold: f64,
    epochs: usize,
) -> Result<Comparison> {
    if num_train == 0 || num_train > 5000 {
        return Err(Error::Config("training size must be in 1..=5000".into()));
    }
    let task = generate_synthetic(&demo_task_config(seed, num_train))?;
    let votes = apply_labelers(&task.labelers, &task.train)?;
    let data = TaskData {
        train: &task.train,
        validation: &task.validation,
        test: Some(&task.test),
        votes: &votes,
        labelers: &task.labelers,
        accuracy: None,
    };
    let base = RunConfig {
        learning_rate: 0.01,
        epochs,
        batch_size: 32,
        hidden: vec![32, 8],
        seed,
        ..Default::default()
    };
    let lol = RunConfig {
        method: Method::Lol,
        loss: LossConfig {
            penalty: PenaltyKind::Square,
            alpha,
            threshold,
            ..Default::default()
        },
        ..base.clone()
    };
    let simple = RunConfig {
        method: Method::LolSimple,
        loss: LossConfig::simple(),
        ..base
    };
    let lol = train_once(&lol, data)?.report;
    let simple = train_once(&simple, data)?.report;
    Ok(Comparison {
        train_examples: lol.train_examples,
        lol: (&lol).into(),
        simple: (&simple).into(),
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// `present` is a string of `0`/`1` flags, one per keyword.
#[wasm_bindgen(js_name = exploreKeywords)]
pub fn explore_keywords(present: &str, epsilon: f64) -> Result<String, JsError> {
    let flags: Vec<bool> = present
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| c == '1')
        .collect();
    to_js(keyword_view(&flags, epsilon))
}

#[wasm_bindgen(js_name = penaltyCurve)]
pub fn penalty_curve(
    kind: &str,
    threshold: f64,
    labeler_gradient: f64,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<String, JsError> {
    to_js(
        parse_penalty(kind)
            .and_then(|k| penalty_curve_view(k, threshold, labeler_gradient, lo, hi, steps)),
    )
}

#[wasm_bindgen(js_name = compareTraining)]
pub fn compare_training(
    seed: u32,
    num_train: usize,
    alpha: f64,
    threshold: f64,
    epochs: usize,
) -> Result<String, JsError> {
    to_js(compare_view(
        u64::from(seed),
        num_train,
        alpha,
        threshold,
        epochs,
    ))
}
