//! Task schemas, sparse bag-of-words examples and dataset splits.

mod cache;
mod featurize;
mod split;
mod synthetic;
pub mod wrench;

pub use cache::{load_dataset, save_dataset, CACHE_FORMAT_VERSION};
pub use featurize::{featurize, featurize_texts, tokenize, FeaturizeOptions, Vocabulary};
pub use split::{split_dataset, split_per_class, SplitFractions};
pub use synthetic::{generate_synthetic, SyntheticTask, SyntheticTaskConfig};
pub use wrench::{load_wrench_dir, WrenchTask};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskSchema {
    num_classes: usize,
    class_names: Vec<String>,
    feature_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature_names: Option<Vec<String>>,
}

impl TaskSchema {
    pub fn new(
        class_names: Vec<String>,
        feature_dim: usize,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let schema = TaskSchema {
            num_classes: class_names.len(),
            class_names,
            feature_dim,
            feature_names,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Schema with classes named "0".."k-1" and anonymous features.
    pub fn anonymous(num_classes: usize, feature_dim: usize) -> Result<Self> {
        Self::new(
            (0..num_classes).map(|c| c.to_string()).collect(),
            feature_dim,
            None,
        )
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Schema(format!(
                "need at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.class_names.len() != self.num_classes {
            return Err(Error::Schema("class name count differs from k".into()));
        }
        if self.feature_dim == 0 {
            return Err(Error::Schema("feature dimension must be positive".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.class_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Schema(format!("duplicate class name {dup:?}")));
        }
        if let Some(names) = &self.feature_names {
            if names.len() != self.feature_dim {
                return Err(Error::Schema(format!(
                    "{} feature names for dimension {}",
                    names.len(),
                    self.feature_dim
                )));
            }
            let mut seen = HashSet::new();
            if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
                return Err(Error::Schema(format!("duplicate feature name {dup:?}")));
            }
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names
            .as_ref()
            .and_then(|names| names.iter().position(|n| n == name))
    }
}

/// Sparse non-negative feature vector stored as sorted (index, value) pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseFeatures {
    #[serde(rename = "i")]
    indices: Vec<u32>,
    #[serde(rename = "v")]
    values: Vec<f64>,
}

impl SparseFeatures {
    /// Builds from unsorted pairs; duplicate indices are summed, zeros dropped.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (idx, val) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == idx as u32 => last.1 += val,
                _ => merged.push((idx as u32, val)),
            }
        }
        let (indices, values) = merged.into_iter().filter(|p| p.1 != 0.0).unzip();
        SparseFeatures { indices, values }
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        Self::from_pairs(
            dense
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect(),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(i, v)| (*i as usize, *v))
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&(index as u32)) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().map(|i| *i as usize)
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    /// Counts clipped to presence indicators.
    pub fn binarized(&self) -> Self {
        SparseFeatures {
            indices: self.indices.clone(),
            values: vec![1.0; self.indices.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    features: SparseFeatures,
    #[serde(rename = "y", default, skip_serializing_if = "Option::is_none")]
    gold: Option<usize>,
}

impl Example {
    pub fn new(features: SparseFeatures, gold: Option<usize>) -> Self {
        Example { features, gold }
    }

    pub fn features(&self) -> &SparseFeatures {
        &self.features
    }

    pub fn has_gold(&self) -> bool {
        self.gold.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// A set of examples conforming to one schema.
///
/// Gold labels on the training split are oracle-only: `labels()` refuses to
/// hand them out, and only `oracle_labels()` (used for reporting labeler
/// quality) can read them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: TaskSchema,
    split: Split,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(schema: TaskSchema, split: Split, examples: Vec<Example>) -> Result<Self> {
        let ds = Dataset {
            schema,
            split,
            examples,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        let d = self.schema.feature_dim();
        let k = self.schema.num_classes();
        for (i, ex) in self.examples.iter().enumerate() {
            if let Some(max) = ex.features.max_index() {
                if max >= d {
                    return Err(Error::Shape(format!(
                        "example {i} has feature index {max} >= dimension {d}"
                    )));
                }
            }
            if ex
                .features
                .values
                .iter()
                .any(|v| !v.is_finite() || *v < 0.0)
            {
                return Err(Error::Shape(format!(
                    "example {i} has a negative or non-finite feature"
                )));
            }
            match ex.gold {
                Some(y) if y >= k => {
                    return Err(Error::Shape(format!(
                        "example {i} has label {y} outside [0,{k})"
                    )))
                }
                None if self.split != Split::Train => {
                    return Err(Error::MissingLabels(format!(
                        "example {i} of the {:?} split has no gold label",
                        self.split
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> &TaskSchema {
        &self.schema
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn features(&self, index: usize) -> &SparseFeatures {
        &self.examples[index].features
    }

    /// Dense copy of one example, the form the model consumes.
    pub fn dense(&self, index: usize) -> Vec<f64> {
        self.examples[index]
            .features
            .to_dense(self.schema.feature_dim())
    }

    /// Gold labels of a validation or test split.
    pub fn labels(&self) -> Result<Vec<usize>> {
        if self.split == Split::Train {
            return Err(Error::MissingLabels(
                "training-split labels are oracle-only".into(),
            ));
        }
        self.collect_gold()
    }

    /// Gold labels of any split, for oracle diagnostics only. Never feed the
    /// result into a weakly supervised training path.
    pub fn oracle_labels(&self) -> Result<Vec<usize>> {
        self.collect_gold()
    }

    fn collect_gold(&self) -> Result<Vec<usize>> {
        self.examples
            .iter()
            .enumerate()
            .map(|(i, ex)| {
                ex.gold
                    .ok_or_else(|| Error::MissingLabels(format!("example {i} is unlabeled")))
            })
            .collect()
    }

    /// Copy with a different split tag; re-validates label presence.
    pub fn with_split(&self, split: Split) -> Result<Self> {
        Dataset::new(self.schema.clone(), split, self.examples.clone())
    }

    /// Keeps the listed rows, in the given order.
    pub fn subset(&self, rows: &[usize], split: Split) -> Result<Self> {
        Dataset::new(
            self.schema.clone(),
            split,
            rows.iter().map(|&r| self.examples[r].clone()).collect(),
        )
    }

    /// First `n` rows (all rows if `n >= len`).
    pub fn truncated(&self, n: usize) -> Self {
        Dataset {
            schema: self.schema.clone(),
            split: self.split,
            examples: self.examples.iter().take(n).cloned().collect(),
        }
    }

    /// Copy with every feature clipped to a presence indicator.
    pub fn binarized(&self) -> Self {
        Dataset {
            schema: self.schema.clone(),
            split: self.split,
            examples: self
                .examples
                .iter()
                .map(|ex| Example::new(ex.features.binarized(), ex.gold))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_rejects_bad_shapes() {
        assert!(TaskSchema::anonymous(1, 3).is_err());
        assert!(TaskSchema::anonymous(2, 0).is_err());
        assert!(TaskSchema::new(vec!["a".into(), "a".into()], 2, None).is_err());
        assert!(TaskSchema::new(
            vec!["a".into(), "b".into()],
            2,
            Some(vec!["x".into(), "x".into()])
        )
        .is_err());
        assert!(TaskSchema::new(vec!["a".into(), "b".into()], 2, Some(vec!["x".into()])).is_err());
    }

    #[test]
    fn sparse_features_merge_and_drop_zeros() {
        let f = SparseFeatures::from_pairs(vec![(3, 1.0), (1, 2.0), (3, 1.0), (2, 0.0)]);
        assert_eq!(f.iter().collect::<Vec<_>>(), vec![(1, 2.0), (3, 2.0)]);
        assert_eq!(f.to_dense(4), vec![0.0, 2.0, 0.0, 2.0]);
        assert_eq!(f.get(2), 0.0);
        assert_eq!(f.binarized().to_dense(4), vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn train_labels_are_quarantined() {
        let schema = TaskSchema::anonymous(2, 2).unwrap();
        let ex = vec![Example::new(
            SparseFeatures::from_dense(&[1.0, 0.0]),
            Some(1),
        )];
        let train = Dataset::new(schema.clone(), Split::Train, ex.clone()).unwrap();
        assert!(train.labels().is_err());
        assert_eq!(train.oracle_labels().unwrap(), vec![1]);
        let val = train.with_split(Split::Validation).unwrap();
        assert_eq!(val.labels().unwrap(), vec![1]);
    }

    #[test]
    fn evaluation_splits_require_labels() {
        let schema = TaskSchema::anonymous(2, 2).unwrap();
        let ex = vec![Example::new(SparseFeatures::default(), None)];
        assert!(Dataset::new(schema.clone(), Split::Train, ex.clone()).is_ok());
        assert!(Dataset::new(schema, Split::Test, ex).is_err());
    }

    #[test]
    fn out_of_range_feature_rejected() {
        let schema = TaskSchema::anonymous(2, 2).unwrap();
        let ex = vec![Example::new(
            SparseFeatures::from_pairs(vec![(5, 1.0)]),
            None,
        )];
        assert!(Dataset::new(schema, Split::Train, ex).is_err());
    }
}
