use std::cmp::Ordering;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{train_once, Method, RunConfig, TaskData, TrainReport};
use crate::error::{Error, Result};
use crate::losses::PenaltyKind;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SweepSpec {
    pub learning_rates: Vec<f64>,
    pub weight_decays: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Trials to run; `None` runs the full grid.
    pub budget: Option<usize>,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            learning_rates: vec![0.1, 0.01, 0.001, 0.0001],
            weight_decays: vec![0.0, 0.01, 0.001],
            thresholds: (0..6).map(|i| i as f64).collect(),
            alphas: vec![0.1, 0.01, 0.001, 0.0001, 0.00001],
            budget: None,
            seed: 0,
        }
    }
}

impl SweepSpec {
    /// `count` evenly spaced thresholds over `[0, max]`.
    pub fn evenly_spaced_thresholds(max: f64, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            1 => vec![0.0],
            _ => (0..count)
                .map(|i| max * i as f64 / (count - 1) as f64)
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.learning_rates.is_empty() || self.weight_decays.is_empty() {
            return Err(Error::Config("sweep grids must be non-empty".into()));
        }
        if self.budget == Some(0) {
            return Err(Error::Config("sweep budget must be at least 1".into()));
        }
        Ok(())
    }

    /// Whether α and c are searched for this template.
    pub fn searches_penalty(template: &RunConfig) -> bool {
        matches!(
            template.method,
            Method::Lol | Method::LolCoverage | Method::LolAccuracy
        ) && template.loss.penalty != PenaltyKind::None
    }

    /// Full grid in (lr, wd, α, c) order.
    pub fn grid(&self, template: &RunConfig) -> Result<Vec<RunConfig>> {
        self.validate()?;
        let penalty = Self::searches_penalty(template);
        if penalty && (self.alphas.is_empty() || self.thresholds.is_empty()) {
            return Err(Error::Config("α and c grids must be non-empty".into()));
        }
        let alphas = if penalty {
            self.alphas.clone()
        } else {
            vec![template.loss.alpha]
        };
        let thresholds = if penalty {
            self.thresholds.clone()
        } else {
            vec![template.loss.threshold]
        };
        let mut out = Vec::new();
        for &lr in &self.learning_rates {
            for &wd in &self.weight_decays {
                for &alpha in &alphas {
                    for &c in &thresholds {
                        let mut cfg = template.clone();
                        cfg.learning_rate = lr;
                        cfg.weight_decay = wd;
                        cfg.loss.alpha = alpha;
                        cfg.loss.threshold = c;
                        out.push(cfg);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Grid indices to evaluate: all of them, or a seeded subset of size `budget`.
    pub fn trial_indices(&self, grid_len: usize) -> Result<Vec<usize>> {
        self.validate()?;
        match self.budget {
            Some(b) if b < grid_len => {
                let mut idx =
                    sample(&mut rng::stream(self.seed, Stream::Sweep), grid_len, b).into_vec();
                idx.sort_unstable();
                Ok(idx)
            }
            _ => Ok((0..grid_len).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialRecord {
    pub index: usize,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<TrainReport>,
    /// Numerical failure that ended the trial.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepResult {
    pub trials: Vec<TrialRecord>,
    pub best_index: usize,
    pub best_config: RunConfig,
}

impl SweepResult {
    pub fn best_report(&self) -> &TrainReport {
        self.trials
            .iter()
            .find(|t| t.index == self.best_index)
            .and_then(|t| t.report.as_ref())
            .expect("best trial has a report")
    }
}

/// Higher validation accuracy wins; ties go to the earlier selected epoch,
/// then lower α, then lower learning rate, then grid order.
fn better(a: &TrialRecord, b: &TrialRecord) -> Ordering {
    let (ra, rb) = (a.report.as_ref().unwrap(), b.report.as_ref().unwrap());
    rb.validation_accuracy
        .total_cmp(&ra.validation_accuracy)
        .then(ra.selected_epoch.cmp(&rb.selected_epoch))
        .then(a.config.loss.alpha.total_cmp(&b.config.loss.alpha))
        .then(a.config.learning_rate.total_cmp(&b.config.learning_rate))
        .then(a.index.cmp(&b.index))
}

fn run_trial(index: usize, config: RunConfig, data: TaskData<'_>) -> Result<TrialRecord> {
    match train_once(&config, data) {
        Ok(out) => Ok(TrialRecord {
            index,
            config,
            report: Some(out.report),
            error: None,
        }),
        Err(e) if e.is_numerical() => {
            log::warn!("trial {index} failed numerically: {e}");
            Ok(TrialRecord {
                index,
                config,
                report: None,
                error: Some(e.to_string()),
            })
        }
        Err(e) => Err(e),
    }
}

/// Maps `f` over `items` on up to `jobs` threads, keeping input order.
#[cfg(feature = "parallel")]
pub(crate) fn parallel_map<T, R, F>(items: Vec<T>, jobs: usize, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if jobs <= 1 {
        return Ok(items.into_iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| items.into_par_iter().map(f).collect()))
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn parallel_map<T, R, F>(items: Vec<T>, _jobs: usize, f: F) -> Result<Vec<R>>
where
    F: Fn(T) -> R,
{
    Ok(items.into_iter().map(f).collect())
}

/// Runs the selected grid points and picks the best by validation accuracy.
pub fn sweep(
    spec: &SweepSpec,
    template: &RunConfig,
    data: TaskData<'_>,
    jobs: usize,
) -> Result<SweepResult> {
    if data.validation.is_empty() {
        return Err(Error::Config(
            "sweep needs a non-empty validation split".into(),
        ));
    }
    template.check_task(data.train.schema().num_classes())?;
    let grid = spec.grid(template)?;
    let work: Vec<(usize, RunConfig)> = spec
        .trial_indices(grid.len())?
        .into_iter()
        .map(|i| (i, grid[i].clone()))
        .collect();
    let mut trials = parallel_map(work, jobs, |(i, cfg)| run_trial(i, cfg, data))?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    trials.sort_by_key(|t| t.index);
    let best = trials
        .iter()
        .filter(|t| t.report.is_some())
        .min_by(|a, b| better(a, b))
        .ok_or_else(|| Error::NonFinite("every sweep trial failed numerically".into()))?;
    Ok(SweepResult {
        best_index: best.index,
        best_config: best.config.clone(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        let spec = SweepSpec::default();
        let simple = RunConfig {
            method: Method::LolSimple,
            loss: crate::losses::LossConfig::simple(),
            ..Default::default()
        };
        assert_eq!(spec.grid(&simple).unwrap().len(), 12);
        assert_eq!(spec.grid(&RunConfig::default()).unwrap().len(), 12 * 30);
        assert_eq!(
            SweepSpec::evenly_spaced_thresholds(5.0, 6),
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
        );
    }

    #[test]
    fn budget_subsets_are_seeded() {
        let spec = SweepSpec {
            budget: Some(20),
            seed: 4,
            ..Default::default()
        };
        let a = spec.trial_indices(360).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a, spec.trial_indices(360).unwrap());
        assert_eq!(spec.trial_indices(12).unwrap().len(), 12);
        let zero = SweepSpec {
            budget: Some(0),
            ..Default::default()
        };
        assert!(zero.trial_indices(12).is_err());
    }
}
