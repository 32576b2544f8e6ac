//! Reader for WRENCH-style benchmark directories.
//!
//! A directory holds `train.json`, `valid.json` and `test.json`, each an
//! object keyed by example id with entries
//! `{"label": int, "weak_labels": [int...], "data": {"text": str}}` where a
//! weak label of -1 is an abstention. An optional `label.json` maps class
//! ids to names.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{Dataset, Example, FeaturizeOptions, Split, TaskSchema, Vocabulary};
use crate::error::{Error, Result};
use crate::labelers::{Vote, VoteMatrix};

#[derive(Deserialize)]
struct Entry {
    label: i64,
    weak_labels: Vec<i64>,
    data: EntryData,
}

#[derive(Deserialize)]
struct EntryData {
    #[serde(default)]
    text: String,
}

#[derive(Debug, Clone)]
pub struct WrenchTask {
    pub schema: TaskSchema,
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    /// Weak labels shipped with the training split.
    pub train_votes: VoteMatrix,
}

fn read_split(path: &Path) -> Result<Vec<Entry>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let map: BTreeMap<String, Entry> = serde_json::from_slice(&bytes)?;
    // Ids are numeric strings; order numerically for a stable row order.
    let mut entries: Vec<(String, Entry)> = map.into_iter().collect();
    entries.sort_by(|a, b| match (a.0.parse::<u64>(), b.0.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.0.cmp(&b.0),
    });
    Ok(entries.into_iter().map(|e| e.1).collect())
}

pub fn load_wrench_dir(dir: &Path, opts: &FeaturizeOptions) -> Result<WrenchTask> {
    let train = read_split(&dir.join("train.json"))?;
    let valid = read_split(&dir.join("valid.json"))?;
    let test = read_split(&dir.join("test.json"))?;
    if train.is_empty() {
        return Err(Error::EmptyCorpus(dir.join("train.json")));
    }
    let max_label = train
        .iter()
        .chain(&valid)
        .chain(&test)
        .map(|e| e.label)
        .chain(train.iter().flat_map(|e| e.weak_labels.iter().copied()))
        .max()
        .unwrap_or(1);
    let k = match opts.num_classes {
        Some(k) => k,
        None => (max_label.max(1) as usize) + 1,
    };
    let class_names = match fs::read(dir.join("label.json")) {
        Ok(bytes) => {
            let names: BTreeMap<String, String> = serde_json::from_slice(&bytes)?;
            let mut ordered = vec![String::new(); k];
            for (id, name) in names {
                if let Ok(i) = id.parse::<usize>() {
                    if i < k {
                        ordered[i] = name;
                    }
                }
            }
            if ordered.iter().any(String::is_empty) {
                (0..k).map(|c| c.to_string()).collect()
            } else {
                ordered
            }
        }
        Err(_) => (0..k).map(|c| c.to_string()).collect(),
    };
    let vocab = Vocabulary::build(train.iter().map(|e| e.data.text.as_str()), opts.vocab_limit);
    let schema = TaskSchema::new(
        class_names,
        vocab.len().max(1),
        Some(vocab.words().to_vec()),
    )?;
    let to_examples = |entries: &[Entry]| -> Result<Vec<Example>> {
        entries
            .iter()
            .map(|e| {
                if e.label < 0 || e.label as usize >= k {
                    return Err(Error::Schema(format!("label {} outside [0,{k})", e.label)));
                }
                Ok(Example::new(
                    vocab.vectorize(&e.data.text, opts.binarize),
                    Some(e.label as usize),
                ))
            })
            .collect()
    };
    let m = train[0].weak_labels.len();
    let mut votes = Vec::with_capacity(train.len() * m);
    for (r, e) in train.iter().enumerate() {
        if e.weak_labels.len() != m {
            return Err(Error::Shape(format!(
                "train row {r} has {} weak labels, expected {m}",
                e.weak_labels.len()
            )));
        }
        for &w in &e.weak_labels {
            votes.push(if w < 0 {
                Vote::ABSTAIN
            } else {
                Vote::of(w as usize)
            });
        }
    }
    let names = (0..m).map(|i| format!("lf{i}")).collect();
    Ok(WrenchTask {
        train: Dataset::new(schema.clone(), Split::Train, to_examples(&train)?)?,
        validation: Dataset::new(schema.clone(), Split::Validation, to_examples(&valid)?)?,
        test: Dataset::new(schema.clone(), Split::Test, to_examples(&test)?)?,
        train_votes: VoteMatrix::new(train.len(), m, votes, names)?,
        schema,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_a_tiny_directory() {
        let dir = tempfile::tempdir().unwrap();
        let split = r#"{
            "0": {"label": 1, "weak_labels": [1, -1], "data": {"text": "check out my channel"}},
            "1": {"label": 0, "weak_labels": [-1, 0], "data": {"text": "nice song"}}
        }"#;
        for name in ["train.json", "valid.json", "test.json"] {
            fs::write(dir.path().join(name), split).unwrap();
        }
        fs::write(
            dir.path().join("label.json"),
            r#"{"0": "ham", "1": "spam"}"#,
        )
        .unwrap();
        let task = load_wrench_dir(dir.path(), &FeaturizeOptions::default()).unwrap();
        assert_eq!(task.schema.class_names(), ["ham", "spam"]);
        assert_eq!(task.train_votes.get(0, 0), Vote::of(1));
        assert!(task.train_votes.get(0, 1).is_abstain());
        assert_eq!(task.test.labels().unwrap(), vec![1, 0]);
    }
}
