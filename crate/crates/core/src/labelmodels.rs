//! Pseudolabel baselines: hard and soft majority vote, and the triplet
//! method for labeler accuracies with its naive-Bayes soft labels.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelers::VoteMatrix;
use crate::rng::Rng;

/// Probability vector over the k classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SoftLabel(pub Vec<f64>);

impl SoftLabel {
    pub fn uniform(k: usize) -> Self {
        SoftLabel(vec![1.0 / k as f64; k])
    }

    pub fn one_hot(k: usize, class: usize) -> Self {
        let mut v = vec![0.0; k];
        v[class] = 1.0;
        SoftLabel(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// Indices attaining the maximum probability.
    pub fn argmax_set(&self) -> Vec<usize> {
        let max = self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..self.0.len()).filter(|&c| self.0[c] == max).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteCounts {
    pub per_class: Vec<usize>,
    pub abstain: usize,
}

pub fn vote_counts(vm: &VoteMatrix, r: usize, k: usize) -> VoteCounts {
    let mut per_class = vec![0; k];
    let mut abstain = 0;
    for v in vm.row(r) {
        match v.class() {
            Some(c) => per_class[c] += 1,
            None => abstain += 1,
        }
    }
    VoteCounts { per_class, abstain }
}

/// Hard majority vote; ties and all-abstain rows are resolved by a uniform
/// draw from `rng`.
pub fn majority_vote_hard(vm: &VoteMatrix, k: usize, rng: &mut Rng) -> Vec<usize> {
    (0..vm.num_rows())
        .map(|r| {
            let counts = vote_counts(vm, r, k).per_class;
            let best = *counts.iter().max().unwrap_or(&0);
            let winners: Vec<usize> = (0..k).filter(|&c| counts[c] == best).collect();
            if winners.len() == 1 {
                winners[0]
            } else {
                winners[rng.gen_range(0..winners.len())]
            }
        })
        .collect()
}

/// Vote-count proportions among non-abstaining labelers; uniform when all
/// abstain.
pub fn majority_vote_soft(vm: &VoteMatrix, k: usize) -> Vec<SoftLabel> {
    (0..vm.num_rows())
        .map(|r| {
            let counts = vote_counts(vm, r, k).per_class;
            let total: usize = counts.iter().sum();
            if total == 0 {
                SoftLabel::uniform(k)
            } else {
                SoftLabel(counts.iter().map(|&c| c as f64 / total as f64).collect())
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccuracyMethod {
    TripletMean,
    TripletMedian,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AccuracyEstimate {
    pub per_labeler: Vec<f64>,
    pub method: AccuracyMethod,
}

impl AccuracyEstimate {
    /// `{labelerName: accuracy}` for inspection.
    pub fn to_named_json(&self, names: &[String]) -> serde_json::Value {
        let map: BTreeMap<&str, f64> = names
            .iter()
            .map(String::as_str)
            .zip(self.per_labeler.iter().copied())
            .collect();
        serde_json::json!(map)
    }

    pub fn from_named_json(value: &serde_json::Value, names: &[String]) -> Result<Self> {
        let map: BTreeMap<String, f64> = serde_json::from_value(value.clone())?;
        let per_labeler = names
            .iter()
            .map(|n| {
                map.get(n)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("no accuracy for labeler {n}")))
            })
            .collect::<Result<_>>()?;
        Ok(AccuracyEstimate {
            per_labeler,
            method: AccuracyMethod::Oracle,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripletAggregation {
    Mean,
    Median,
}

pub const DEFAULT_MIN_OVERLAP: usize = 10;
pub const ACCURACY_CLAMP: f64 = 1e-3;
const DEGENERATE_DENOMINATOR: f64 = 1e-6;

/// Closed-form triplet estimates of labeler accuracies for binary tasks.
///
/// With votes mapped to ±1 and labelers conditionally independent given the
/// label, `|E[λᵢY]| = sqrt(|E[λᵢλⱼ]·E[λᵢλₗ] / E[λⱼλₗ]|)`. Every triplet
/// containing labeler i yields one estimate; these are combined by mean or
/// median, mapped to `(1 + |E[λᵢY]|)/2` and clamped away from 0.5 and 1.
pub fn triplet_accuracies(
    vm: &VoteMatrix,
    k: usize,
    aggregation: TripletAggregation,
    min_overlap: usize,
) -> Result<AccuracyEstimate> {
    if k != 2 {
        return Err(Error::Unsupported(format!(
            "the triplet method is defined for binary classification only (k = {k})"
        )));
    }
    let m = vm.num_labelers();
    if m < 3 {
        return Err(Error::Unsupported(format!(
            "the triplet method needs at least 3 labelers, got {m}"
        )));
    }
    let names = vm.labeler_names();
    // Pairwise second moments over jointly non-abstaining rows.
    let mut moment = vec![0.0; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let mut sum = 0.0;
            let mut count = 0usize;
            for r in 0..vm.num_rows() {
                if let (Some(a), Some(b)) = (vm.get(r, i).class(), vm.get(r, j).class()) {
                    let sa = if a == 1 { 1.0 } else { -1.0 };
                    let sb = if b == 1 { 1.0 } else { -1.0 };
                    sum += sa * sb;
                    count += 1;
                }
            }
            if count < min_overlap {
                return Err(Error::InsufficientOverlap {
                    first: names[i].clone(),
                    second: names[j].clone(),
                    count,
                    required: min_overlap,
                });
            }
            let e = sum / count as f64;
            moment[i * m + j] = e;
            moment[j * m + i] = e;
        }
    }
    let mut per_labeler = Vec::with_capacity(m);
    for i in 0..m {
        let mut estimates = Vec::new();
        for j in 0..m {
            for l in (j + 1)..m {
                if j == i || l == i {
                    continue;
                }
                let denom = moment[j * m + l];
                if denom.abs() < DEGENERATE_DENOMINATOR {
                    continue;
                }
                let ratio = (moment[i * m + j] * moment[i * m + l] / denom).abs();
                estimates.push(ratio.sqrt());
            }
        }
        if estimates.is_empty() {
            return Err(Error::DegenerateTriplets(names[i].clone()));
        }
        let mean_abs = match aggregation {
            TripletAggregation::Mean => estimates.iter().sum::<f64>() / estimates.len() as f64,
            TripletAggregation::Median => median(&mut estimates),
        };
        let accuracy = (1.0 + mean_abs) / 2.0;
        per_labeler.push(accuracy.clamp(0.5 + ACCURACY_CLAMP, 1.0 - ACCURACY_CLAMP));
    }
    Ok(AccuracyEstimate {
        per_labeler,
        method: match aggregation {
            TripletAggregation::Mean => AccuracyMethod::TripletMean,
            TripletAggregation::Median => AccuracyMethod::TripletMedian,
        },
    })
}

/// Median of a non-empty slice; even counts average the two middle values.
fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Naive-Bayes posterior under conditional independence and a uniform prior.
pub fn triplet_soft_labels(vm: &VoteMatrix, acc: &AccuracyEstimate) -> Result<Vec<SoftLabel>> {
    if acc.per_labeler.len() != vm.num_labelers() {
        return Err(Error::Shape(format!(
            "{} accuracies for {} labelers",
            acc.per_labeler.len(),
            vm.num_labelers()
        )));
    }
    if let Some(c) = vm.max_class().filter(|c| *c > 1) {
        return Err(Error::Unsupported(format!(
            "triplet soft labels are binary-only; saw class {c}"
        )));
    }
    Ok((0..vm.num_rows())
        .map(|r| {
            // Log-odds of class 1 accumulated in labeler order.
            let mut log_odds = 0.0;
            for (v, &w) in vm.row(r).iter().zip(&acc.per_labeler) {
                match v.class() {
                    Some(1) => log_odds += w.ln() - (1.0 - w).ln(),
                    Some(_) => log_odds += (1.0 - w).ln() - w.ln(),
                    None => {}
                }
            }
            let p1 = 1.0 / (1.0 + (-log_odds).exp());
            SoftLabel(vec![1.0 - p1, p1])
        })
        .collect())
}

/// `wᵢ / Σ w`.
pub fn accuracy_weights(acc: &AccuracyEstimate) -> Result<Vec<f64>> {
    let z: f64 = acc.per_labeler.iter().sum();
    if acc.per_labeler.is_empty() || z <= 0.0 || !z.is_finite() {
        return Err(Error::Config(
            "accuracy weights need at least one positive accuracy".into(),
        ));
    }
    Ok(acc.per_labeler.iter().map(|w| w / z).collect())
}
