use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Example, SparseFeatures, Split, TaskSchema};
use crate::error::{Error, Result};
use crate::labelers::LabelerSpec;
use crate::rng::{self, Stream};

/// Parameters of a synthetic keyword-labeler task.
///
/// Feature layout: the first `num_labelers * keywords_per_labeler` features
/// are keyword blocks, one block per labeler, present only when that labeler
/// fires. The remaining features are class-signal words; each belongs to one
/// class and fires with probability `base_rate * (1 + feature_signal_strength)`
/// in examples of that class and `base_rate` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SyntheticTaskConfig {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub num_train: usize,
    pub num_validation: usize,
    pub num_test: usize,
    pub num_labelers: usize,
    pub per_labeler_accuracy: f64,
    pub per_labeler_coverage: f64,
    pub feature_signal_strength: f64,
    pub keywords_per_labeler: usize,
    /// Zipf exponent over a labeler's keywords; 0 picks them uniformly.
    pub keyword_skew: f64,
    pub base_rate: f64,
    pub rng_seed: u64,
}

impl Default for SyntheticTaskConfig {
    fn default() -> Self {
        SyntheticTaskConfig {
            num_classes: 2,
            feature_dim: 200,
            num_train: 2000,
            num_validation: 500,
            num_test: 2000,
            num_labelers: 8,
            per_labeler_accuracy: 0.75,
            per_labeler_coverage: 0.4,
            feature_signal_strength: 0.3,
            keywords_per_labeler: 10,
            keyword_skew: 1.0,
            base_rate: 0.05,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub schema: TaskSchema,
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub labelers: Vec<LabelerSpec>,
}

impl SyntheticTaskConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_classes < 2 {
            return bad(format!("need k >= 2, got {}", self.num_classes));
        }
        if self.num_labelers == 0 || self.keywords_per_labeler == 0 {
            return bad("need at least one labeler with at least one keyword".into());
        }
        if !(self.per_labeler_accuracy > 0.0 && self.per_labeler_accuracy <= 1.0) {
            return bad(format!(
                "accuracy must be in (0,1], got {}",
                self.per_labeler_accuracy
            ));
        }
        if !(self.per_labeler_coverage > 0.0 && self.per_labeler_coverage <= 1.0) {
            return bad(format!(
                "coverage must be in (0,1], got {}",
                self.per_labeler_coverage
            ));
        }
        if !(self.base_rate >= 0.0 && self.base_rate <= 1.0) || self.feature_signal_strength < 0.0 {
            return bad("base rate must be in [0,1] and signal strength non-negative".into());
        }
        if self.keyword_skew < 0.0 {
            return bad("keyword skew must be non-negative".into());
        }
        let keyword_dims = self.num_labelers * self.keywords_per_labeler;
        if self.feature_dim < keyword_dims + self.num_classes {
            return bad(format!(
                "feature dimension {} leaves no room for class-signal features after {} keyword features",
                self.feature_dim, keyword_dims
            ));
        }
        Ok(())
    }

    /// Per-class firing probabilities (target class, every other class) that
    /// realize the configured accuracy and coverage under a uniform class
    /// prior. A keyword rule always votes its own class, so coverage is capped
    /// where the target-class firing rate would exceed 1.
    pub fn firing_rates(&self) -> (f64, f64, f64) {
        let k = self.num_classes as f64;
        let a = self.per_labeler_accuracy;
        let mut coverage = self.per_labeler_coverage.min(1.0 / (a * k));
        if a < 1.0 {
            coverage = coverage.min((k - 1.0) / ((1.0 - a) * k));
        }
        let on_target = a * k * coverage;
        let off_target = (1.0 - a) * k * coverage / (k - 1.0);
        (on_target.min(1.0), off_target.min(1.0), coverage)
    }
}

pub fn generate_synthetic(cfg: &SyntheticTaskConfig) -> Result<SyntheticTask> {
    cfg.validate()?;
    let (on_target, off_target, coverage) = cfg.firing_rates();
    if coverage < cfg.per_labeler_coverage {
        log::warn!(
            "coverage {} is infeasible for keyword labelers at accuracy {} with {} classes; using {coverage}",
            cfg.per_labeler_coverage,
            cfg.per_labeler_accuracy,
            cfg.num_classes
        );
    }
    let k = cfg.num_classes;
    let kw = cfg.keywords_per_labeler;
    let keyword_dims = cfg.num_labelers * kw;
    let d = cfg.feature_dim;

    let mut names = Vec::with_capacity(d);
    for i in 0..cfg.num_labelers {
        for j in 0..kw {
            names.push(format!("kw{i}_{j}"));
        }
    }
    for f in keyword_dims..d {
        names.push(format!("sig{}_{}", (f - keyword_dims) % k, f));
    }
    let schema = TaskSchema::new(
        (0..k).map(|c| format!("class{c}")).collect(),
        d,
        Some(names),
    )?;

    let labelers: Vec<LabelerSpec> = (0..cfg.num_labelers)
        .map(|i| {
            LabelerSpec::keyword_any(format!("lf{i}"), (i * kw..(i + 1) * kw).collect(), i % k)
        })
        .collect();

    let keyword_weights: Vec<f64> = (0..kw)
        .map(|r| 1.0 / ((r + 1) as f64).powf(cfg.keyword_skew))
        .collect();
    let keyword_pick = WeightedIndex::new(&keyword_weights)
        .map_err(|e| Error::Config(format!("keyword weights: {e}")))?;
    let signal_on = (cfg.base_rate * (1.0 + cfg.feature_signal_strength)).min(1.0);

    let mut rng = rng::stream(cfg.rng_seed, Stream::Data);
    let mut draw_split = |n: usize, split: Split| -> Result<Dataset> {
        let mut examples = Vec::with_capacity(n);
        for _ in 0..n {
            let y = rng.gen_range(0..k);
            let mut pairs = Vec::new();
            for i in 0..cfg.num_labelers {
                let p = if i % k == y { on_target } else { off_target };
                if rng.gen_bool(p) {
                    pairs.push((i * kw + keyword_pick.sample(&mut rng), 1.0));
                }
            }
            for f in keyword_dims..d {
                let p = if (f - keyword_dims) % k == y {
                    signal_on
                } else {
                    cfg.base_rate
                };
                if rng.gen_bool(p) {
                    pairs.push((f, 1.0));
                }
            }
            examples.push(Example::new(SparseFeatures::from_pairs(pairs), Some(y)));
        }
        Dataset::new(schema.clone(), split, examples)
    };
    let train = draw_split(cfg.num_train, Split::Train)?;
    let validation = draw_split(cfg.num_validation, Split::Validation)?;
    let test = draw_split(cfg.num_test, Split::Test)?;
    Ok(SyntheticTask {
        schema,
        train,
        validation,
        test,
        labelers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelers::apply_labelers;

    fn cfg(accuracy: f64, coverage: f64) -> SyntheticTaskConfig {
        SyntheticTaskConfig {
            num_classes: 2,
            feature_dim: 20,
            num_train: 2000,
            num_validation: 50,
            num_test: 50,
            num_labelers: 3,
            per_labeler_accuracy: accuracy,
            per_labeler_coverage: coverage,
            keywords_per_labeler: 2,
            rng_seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn perfect_labelers_agree_with_gold() {
        let task = generate_synthetic(&cfg(1.0, 1.0)).unwrap();
        let votes = apply_labelers(&task.labelers, &task.train).unwrap();
        let gold = task.train.oracle_labels().unwrap();
        let mut fired = 0;
        for (r, y) in gold.iter().enumerate() {
            for v in votes.row(r).iter().filter_map(|v| v.class()) {
                assert_eq!(v, *y);
                fired += 1;
            }
        }
        assert!(fired > 1000);
    }

    #[test]
    fn empirical_accuracy_and_coverage_match_config() {
        let task = generate_synthetic(&cfg(0.8, 0.5)).unwrap();
        let votes = apply_labelers(&task.labelers, &task.train).unwrap();
        let gold = task.train.oracle_labels().unwrap();
        for i in 0..votes.num_labelers() {
            let mut fired = 0usize;
            let mut correct = 0usize;
            for (r, y) in gold.iter().enumerate() {
                if let Some(v) = votes.get(r, i).class() {
                    fired += 1;
                    correct += usize::from(v == *y);
                }
            }
            let cov = fired as f64 / gold.len() as f64;
            let acc = correct as f64 / fired as f64;
            assert!((cov - 0.5).abs() <= 0.05, "labeler {i} coverage {cov}");
            assert!((acc - 0.8).abs() <= 0.05, "labeler {i} accuracy {acc}");
        }
    }

    #[test]
    fn same_seed_same_task() {
        let a = generate_synthetic(&cfg(0.8, 0.5)).unwrap();
        let b = generate_synthetic(&cfg(0.8, 0.5)).unwrap();
        assert_eq!(
            serde_json::to_vec(&a.train).unwrap(),
            serde_json::to_vec(&b.train).unwrap()
        );
        assert_eq!(a, b);
        let mut other = cfg(0.8, 0.5);
        other.rng_seed = 8;
        assert_ne!(generate_synthetic(&other).unwrap().train, a.train);
    }

    #[test]
    fn degenerate_configs_rejected() {
        assert!(generate_synthetic(&cfg(0.8, 0.0)).is_err());
        assert!(generate_synthetic(&cfg(0.0, 0.5)).is_err());
        assert!(generate_synthetic(&cfg(1.2, 0.5)).is_err());
        let mut small = cfg(0.8, 0.5);
        small.feature_dim = 6;
        assert!(generate_synthetic(&small).is_err());
    }
}
