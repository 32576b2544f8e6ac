//! Training loop, model selection, sweeps and seed ablations.

mod ablation;
mod sweep;

pub use ablation::{
    ablation_suite, mean_std, report_table, AblationRow, AblationSpec, AblationTable, TableFormat,
};
pub use sweep::{sweep, SweepResult, SweepSpec, TrialRecord};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::labelers::{LabelerSpec, SmoothedLabelerGradient, VoteMatrix};
use crate::labelmodels::{
    majority_vote_hard, majority_vote_soft, triplet_accuracies, triplet_soft_labels,
    AccuracyEstimate, TripletAggregation, DEFAULT_MIN_OVERLAP,
};
use crate::losses::{
    accumulate_example_objective, build_weight_scheme, labeler_gradients_at, LossConfig,
    ObjectiveRngs, OutputLoss, PenaltyKind, WeightScheme, Weighting,
};
use crate::nnet::{
    adam_step, MlpModel, Mode, OptimizerState, ParamGradient, DEFAULT_DROPOUT, DEFAULT_HIDDEN,
};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "LoL")]
    Lol,
    #[serde(rename = "LoL-simple")]
    LolSimple,
    #[serde(rename = "LoL-c")]
    LolCoverage,
    #[serde(rename = "LoL-a")]
    LolAccuracy,
    #[serde(rename = "MV")]
    MajorityVote,
    #[serde(rename = "SoftMV")]
    SoftMajorityVote,
    #[serde(rename = "T-Mean")]
    TripletMean,
    #[serde(rename = "T-Median")]
    TripletMedian,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Lol,
        Method::LolSimple,
        Method::LolCoverage,
        Method::LolAccuracy,
        Method::MajorityVote,
        Method::SoftMajorityVote,
        Method::TripletMean,
        Method::TripletMedian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lol => "LoL",
            Method::LolSimple => "LoL-simple",
            Method::LolCoverage => "LoL-c",
            Method::LolAccuracy => "LoL-a",
            Method::MajorityVote => "MV",
            Method::SoftMajorityVote => "SoftMV",
            Method::TripletMean => "T-Mean",
            Method::TripletMedian => "T-Median",
        }
    }

    /// Trains on labeler losses rather than pseudolabels.
    pub fn is_loss_based(self) -> bool {
        matches!(
            self,
            Method::Lol | Method::LolSimple | Method::LolCoverage | Method::LolAccuracy
        )
    }

    pub fn binary_only(self) -> bool {
        matches!(self, Method::TripletMean | Method::TripletMedian)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method {s:?}; expected one of {}",
                    Method::ALL.map(|m| m.name()).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RunConfig {
    pub method: Method,
    pub loss: LossConfig,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub max_train_examples: Option<usize>,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    /// Minimum jointly non-abstaining rows per labeler pair for triplets.
    pub min_overlap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Lol,
            loss: LossConfig::default(),
            learning_rate: 0.001,
            weight_decay: 0.0,
            epochs: 30,
            batch_size: 128,
            seed: 0,
            max_train_examples: None,
            hidden: DEFAULT_HIDDEN.to_vec(),
            dropout: DEFAULT_DROPOUT,
            min_overlap: DEFAULT_MIN_OVERLAP,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch size must be positive".into(),
            ));
        }
        if self.max_train_examples == Some(0) {
            return Err(Error::Config("maxTrainExamples must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0,1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Loss configuration actually used by the method.
    pub fn effective_loss(&self) -> LossConfig {
        let mut loss = self.loss.clone();
        match self.method {
            Method::Lol => loss.weighting = Weighting::Uniform,
            Method::LolCoverage => loss.weighting = Weighting::Coverage,
            Method::LolAccuracy => loss.weighting = Weighting::Accuracy,
            _ => {
                loss.penalty = PenaltyKind::None;
                loss.weighting = Weighting::Uniform;
            }
        }
        loss
    }

    /// Rejects method/task combinations that cannot run.
    pub fn check_task(&self, num_classes: usize) -> Result<()> {
        if self.method.binary_only() && num_classes != 2 {
            return Err(Error::Unsupported(format!(
                "{} is defined for binary classification tasks only; this task has {num_classes} classes",
                self.method
            )));
        }
        Ok(())
    }
}

/// Everything a run reads. Training gold labels are never consulted.
#[derive(Clone, Copy)]
pub struct TaskData<'a> {
    pub train: &'a Dataset,
    pub validation: &'a Dataset,
    pub test: Option<&'a Dataset>,
    pub votes: &'a VoteMatrix,
    /// Definitions behind `votes`; empty when votes come from elsewhere, in
    /// which case no gradient penalty can be formed.
    pub labelers: &'a [LabelerSpec],
    /// Externally supplied accuracies for LoL-a; triplet estimates otherwise.
    pub accuracy: Option<&'a AccuracyEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub classification_loss: f64,
    pub penalty_loss: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainReport {
    pub method: Method,
    pub config: RunConfig,
    pub train_examples: usize,
    pub train_rows_used: usize,
    pub labeler_weights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_estimates: Option<Vec<f64>>,
    pub epochs: Vec<EpochRecord>,
    pub selected_epoch: usize,
    pub validation_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_confusion: Option<Vec<Vec<usize>>>,
}

pub enum TrainEvent<'a> {
    Batch {
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    Epoch(&'a EpochRecord),
}

/// Best-validation model plus its report.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub report: TrainReport,
}

/// Argmax with ties going to the lowest class index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate(model: &MlpModel, ds: &Dataset) -> Result<Evaluation> {
    let labels = ds.labels()?;
    let k = ds.schema().num_classes();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut correct = 0usize;
    for (i, &y) in labels.iter().enumerate() {
        let pred = argmax(&model.predict(&ds.dense(i))?);
        confusion[y][pred] += 1;
        correct += usize::from(pred == y);
    }
    let accuracy = if labels.is_empty() {
        0.0
    } else {
        correct as f64 / labels.len() as f64
    };
    Ok(Evaluation {
        accuracy,
        confusion,
    })
}

enum Targets {
    /// Loss-based: votes, per-row labeler gradients (when penalized), weights.
    Labelers {
        gradients: Vec<Vec<Option<SmoothedLabelerGradient>>>,
        weights: WeightScheme,
        loss: LossConfig,
    },
    Hard(Vec<usize>),
    Soft(Vec<Vec<f64>>),
}

fn estimate_accuracies(
    votes: &VoteMatrix,
    agg: TripletAggregation,
    min_overlap: usize,
) -> Result<AccuracyEstimate> {
    triplet_accuracies(votes, 2, agg, min_overlap)
}

pub fn train_once(cfg: &RunConfig, data: TaskData<'_>) -> Result<TrainOutcome> {
    train_once_observed(cfg, data, &mut |_| {})
}

pub fn train_once_observed(
    cfg: &RunConfig,
    data: TaskData<'_>,
    observer: &mut dyn FnMut(TrainEvent<'_>),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let schema = data.train.schema();
    let k = schema.num_classes();
    cfg.check_task(k)?;
    if data.votes.num_rows() != data.train.len() {
        return Err(Error::Shape(format!(
            "vote matrix has {} rows for {} training examples",
            data.votes.num_rows(),
            data.train.len()
        )));
    }
    if !data.labelers.is_empty() && data.votes.num_labelers() != data.labelers.len() {
        return Err(Error::Shape(format!(
            "vote matrix has {} labelers but {} specs were given",
            data.votes.num_labelers(),
            data.labelers.len()
        )));
    }
    if data.validation.is_empty() {
        return Err(Error::Config("validation split is empty".into()));
    }

    let n = cfg
        .max_train_examples
        .map_or(data.train.len(), |m| m.min(data.train.len()));
    let train = data.train.truncated(n);
    let all_rows: Vec<usize> = (0..n).collect();
    let votes = data.votes.select_rows(&all_rows);
    let rows = votes.covered_rows();
    if rows.is_empty() {
        return Err(Error::Config(
            "every training example is abstained on by every labeler".into(),
        ));
    }
    let inputs: Vec<Vec<f64>> = (0..n).map(|i| train.dense(i)).collect();

    let mut accuracy_estimates = None;
    let targets = match cfg.method {
        Method::MajorityVote => {
            let mut tie = rng::stream(cfg.seed, Stream::TieBreak);
            Targets::Hard(majority_vote_hard(&votes, k, &mut tie))
        }
        Method::SoftMajorityVote => Targets::Soft(
            majority_vote_soft(&votes, k)
                .into_iter()
                .map(|s| s.0)
                .collect(),
        ),
        Method::TripletMean | Method::TripletMedian => {
            let agg = if cfg.method == Method::TripletMean {
                TripletAggregation::Mean
            } else {
                TripletAggregation::Median
            };
            let acc = estimate_accuracies(&votes, agg, cfg.min_overlap)?;
            let soft = triplet_soft_labels(&votes, &acc)?;
            accuracy_estimates = Some(acc.per_labeler);
            Targets::Soft(soft.into_iter().map(|s| s.0).collect())
        }
        _ => {
            let mut loss = cfg.effective_loss();
            let acc = if loss.weighting == Weighting::Accuracy {
                match (data.accuracy, k) {
                    (Some(a), _) => Some(a.clone()),
                    (None, 2) => Some(estimate_accuracies(
                        &votes,
                        TripletAggregation::Mean,
                        cfg.min_overlap,
                    )?),
                    (None, _) => {
                        log::warn!(
                            "accuracy weighting needs a binary task for triplet estimates; using uniform weights"
                        );
                        loss.weighting = Weighting::Uniform;
                        None
                    }
                }
            } else {
                None
            };
            let weights = build_weight_scheme(loss.weighting, &votes, acc.as_ref())?;
            accuracy_estimates = acc.map(|a| a.per_labeler);
            if loss.penalty_active() && data.labelers.is_empty() {
                log::warn!("no labeler definitions for externally supplied votes; training without the gradient penalty");
            }
            let gradients = if loss.penalty_active() && !data.labelers.is_empty() {
                (0..n)
                    .map(|r| {
                        labeler_gradients_at(data.labelers, &inputs[r], votes.row(r), &loss, k)
                    })
                    .collect::<Result<Vec<_>>>()?
            } else {
                Vec::new()
            };
            Targets::Labelers {
                gradients,
                weights,
                loss,
            }
        }
    };
    let labeler_weights = match &targets {
        Targets::Labelers { weights, .. } => weights.weights.clone(),
        _ => vec![1.0; votes.num_labelers()],
    };

    let mut sizes = vec![schema.feature_dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(k);
    let mut model = MlpModel::new(sizes, cfg.dropout, &mut rng::stream(cfg.seed, Stream::Init))?;
    let mut opt = OptimizerState::new(&model, cfg.learning_rate, cfg.weight_decay)?;
    let mut batching = rng::stream(cfg.seed, Stream::Batching);
    let mut dropout = rng::stream(cfg.seed, Stream::Dropout);
    let mut smoothing = rng::stream(cfg.seed, Stream::Smoothing);
    let no_gradients: Vec<Option<SmoothedLabelerGradient>> = Vec::new();

    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, MlpModel)> = None;
    let mut order = rows.clone();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut batching);
        let (mut total, mut cls, mut pen) = (0.0, 0.0, 0.0);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grad = ParamGradient::zeros_like(&model);
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &r in batch {
                let x = &inputs[r];
                let (value, c, p) = match &targets {
                    Targets::Labelers {
                        gradients,
                        weights,
                        loss,
                    } => {
                        let g = gradients.get(r).unwrap_or(&no_gradients);
                        let l = accumulate_example_objective(
                            &model,
                            x,
                            votes.row(r),
                            g,
                            loss,
                            weights,
                            ObjectiveRngs {
                                dropout: Some(&mut dropout),
                                smoothing: &mut smoothing,
                            },
                            scale,
                            &mut grad,
                        )
                        .map_err(|e| annotate(e, epoch, r))?;
                        (l.value, l.classification_part, l.penalty_part)
                    }
                    Targets::Hard(labels) => {
                        let fwd = model.forward(x, Mode::Train(&mut dropout))?;
                        let (l, g) = OutputLoss::CrossEntropy.vote(fwd.probs(), labels[r]);
                        model.accumulate_param_grad(&fwd, &g, scale, &mut grad)?;
                        (l, l, 0.0)
                    }
                    Targets::Soft(targets) => {
                        let fwd = model.forward(x, Mode::Train(&mut dropout))?;
                        let (l, g) = OutputLoss::CrossEntropy.soft(fwd.probs(), &targets[r]);
                        model.accumulate_param_grad(&fwd, &g, scale, &mut grad)?;
                        (l, l, 0.0)
                    }
                };
                if !value.is_finite() {
                    return Err(annotate(Error::NonFinite("loss".into()), epoch, r));
                }
                batch_loss += value;
                total += value;
                cls += c;
                pen += p;
            }
            observer(TrainEvent::Batch {
                epoch,
                batch: b,
                loss: batch_loss * scale,
            });
            adam_step(&mut model, &mut opt, &grad).map_err(|e| annotate(e, epoch, batch[0]))?;
        }
        let used = order.len() as f64;
        let validation_accuracy = evaluate(&model, data.validation)?.accuracy;
        let record = EpochRecord {
            epoch,
            train_loss: total / used,
            classification_loss: cls / used,
            penalty_loss: pen / used,
            validation_accuracy,
        };
        observer(TrainEvent::Epoch(&record));
        log::debug!(
            "{} epoch {epoch}: loss {:.5} val {:.4}",
            cfg.method,
            record.train_loss,
            validation_accuracy
        );
        if best.as_ref().map_or(true, |b| validation_accuracy > b.0) {
            best = Some((validation_accuracy, epoch, model.clone()));
        }
        epochs.push(record);
    }
    let (validation_accuracy, selected_epoch, model) = best.expect("at least one epoch");
    let test = data.test.map(|t| evaluate(&model, t)).transpose()?;
    let report = TrainReport {
        method: cfg.method,
        config: cfg.clone(),
        train_examples: n,
        train_rows_used: rows.len(),
        labeler_weights,
        accuracy_estimates,
        epochs,
        selected_epoch,
        validation_accuracy,
        test_accuracy: test.as_ref().map(|t| t.accuracy),
        test_confusion: test.map(|t| t.confusion),
    };
    Ok(TrainOutcome { model, report })
}

fn annotate(e: Error, epoch: usize, row: usize) -> Error {
    match e {
        Error::NonFinite(what) => {
            Error::NonFinite(format!("{what} (epoch {epoch}, training row {row})"))
        }
        other => other,
    }
}
