use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::{Dataset, Example, SparseFeatures, Split, TaskSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizeOptions {
    pub vocab_limit: usize,
    pub binarize: bool,
    /// Number of classes; inferred as `max label + 1` (at least 2) when unset.
    pub num_classes: Option<usize>,
}

impl Default for FeaturizeOptions {
    fn default() -> Self {
        FeaturizeOptions {
            vocab_limit: 5000,
            binarize: false,
            num_classes: None,
        }
    }
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Word → feature index map.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the `limit` most frequent tokens (ties broken lexicographically)
    /// and numbers them in order of first appearance.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, limit: usize) -> Self {
        let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
        let mut position = 0usize;
        for text in texts {
            for tok in tokenize(text) {
                let entry = counts.entry(tok).or_insert((0, position));
                entry.0 += 1;
                position += 1;
            }
        }
        let mut ranked: Vec<(String, usize, usize)> =
            counts.into_iter().map(|(w, (c, p))| (w, c, p)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(limit);
        ranked.sort_by_key(|r| r.2);
        let words: Vec<String> = ranked.into_iter().map(|r| r.0).collect();
        Self::from_words(words)
    }

    pub fn from_words(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocabulary { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vectorize(&self, text: &str, binarize: bool) -> SparseFeatures {
        let mut pairs = Vec::new();
        for tok in tokenize(text) {
            if let Some(&i) = self.index.get(&tok) {
                pairs.push((i, 1.0));
            }
        }
        let f = SparseFeatures::from_pairs(pairs);
        if binarize {
            f.binarized()
        } else {
            f
        }
    }
}

#[derive(Deserialize)]
struct CorpusLine {
    text: String,
    #[serde(default)]
    label: Option<i64>,
}

/// Reads a JSONL corpus (`{"text": ..., "label": ...}` per line) into a
/// bag-of-words dataset tagged as the training split.
pub fn featurize(path: &Path, opts: &FeaturizeOptions) -> Result<(Dataset, TaskSchema)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<(usize, String, Option<i64>)> = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        rows.push((n + 1, parsed.text, parsed.label));
    }
    if rows.is_empty() {
        return Err(Error::EmptyCorpus(path.to_path_buf()));
    }
    let k = match opts.num_classes {
        Some(k) => k,
        None => rows
            .iter()
            .filter_map(|r| r.2)
            .max()
            .map_or(2, |m| (m.max(0) as usize + 1).max(2)),
    };
    let mut labels = Vec::with_capacity(rows.len());
    for (line, _, label) in &rows {
        labels.push(match label {
            None => None,
            Some(y) if *y < 0 || *y as usize >= k => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: *line,
                    message: format!("label {y} outside [0,{k})"),
                })
            }
            Some(y) => Some(*y as usize),
        });
    }
    let texts: Vec<&str> = rows.iter().map(|r| r.1.as_str()).collect();
    featurize_texts(&texts, &labels, k, opts)
}

/// In-memory variant of [`featurize`].
pub fn featurize_texts(
    texts: &[&str],
    labels: &[Option<usize>],
    num_classes: usize,
    opts: &FeaturizeOptions,
) -> Result<(Dataset, TaskSchema)> {
    if texts.is_empty() {
        return Err(Error::Config("empty corpus".into()));
    }
    if opts.vocab_limit == 0 {
        return Err(Error::Config("vocabulary limit must be positive".into()));
    }
    let vocab = Vocabulary::build(texts.iter().copied(), opts.vocab_limit);
    if vocab.is_empty() {
        return Err(Error::Config("corpus contains no tokens".into()));
    }
    let schema = TaskSchema::new(
        (0..num_classes).map(|c| c.to_string()).collect(),
        vocab.len(),
        Some(vocab.words().to_vec()),
    )?;
    let examples = texts
        .iter()
        .zip(labels)
        .map(|(t, y)| Example::new(vocab.vectorize(t, opts.binarize), *y))
        .collect();
    let ds = Dataset::new(schema.clone(), Split::Train, examples)?;
    Ok((ds, schema))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn opts(limit: usize, binarize: bool) -> FeaturizeOptions {
        FeaturizeOptions {
            vocab_limit: limit,
            binarize,
            num_classes: Some(2),
        }
    }

    #[test]
    fn two_sentence_corpus() {
        let (ds, schema) = featurize_texts(
            &["good food", "bad food"],
            &[None, None],
            2,
            &opts(10, false),
        )
        .unwrap();
        let names = schema.feature_names().unwrap();
        let mut sorted = names.to_vec();
        sorted.sort();
        assert_eq!(sorted, ["bad", "food", "good"]);
        // Read back in (good, bad, food) order.
        let at = |row: usize| -> Vec<f64> {
            let dense = ds.dense(row);
            ["good", "bad", "food"]
                .iter()
                .map(|w| dense[schema.feature_index(w).unwrap()])
                .collect()
        };
        assert_eq!(at(0), vec![1.0, 0.0, 1.0]);
        assert_eq!(at(1), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn binarize_clips_counts() {
        let vocab = Vocabulary::build(["good food", "bad food"], 10);
        let order = |v: SparseFeatures| -> Vec<f64> {
            let dense = v.to_dense(3);
            ["good", "bad", "food"]
                .iter()
                .map(|w| dense[vocab.words().iter().position(|x| x == w).unwrap()])
                .collect()
        };
        assert_eq!(
            order(vocab.vectorize("food food good", true)),
            vec![1.0, 0.0, 1.0]
        );
        assert_eq!(
            order(vocab.vectorize("food food good", false)),
            vec![1.0, 0.0, 2.0]
        );
    }

    #[test]
    fn tokenizer_lowercases_and_splits_punctuation() {
        let toks: Vec<String> = tokenize("Great,great!! food--OK 42").collect();
        assert_eq!(toks, ["great", "great", "food", "ok", "42"]);
    }

    #[test]
    fn vocab_truncation_breaks_ties_lexicographically() {
        let vocab = Vocabulary::build(["b a c", "c"], 2);
        // c has count 2; a and b tie at 1 and a wins.
        let mut w = vocab.words().to_vec();
        w.sort();
        assert_eq!(w, ["a", "c"]);
    }

    #[test]
    fn label_out_of_range_names_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"text": "fine", "label": 0}}"#).unwrap();
        writeln!(f, r#"{{"text": "worse", "label": 5}}"#).unwrap();
        let err = featurize(f.path(), &opts(10, false)).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let f = tempfile::NamedTempFile::new().unwrap();
        assert!(matches!(
            featurize(f.path(), &opts(10, false)),
            Err(Error::EmptyCorpus(_))
        ));
    }

    #[test]
    fn featurize_is_deterministic() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in ["the cat sat", "the dog ran", "a cat ran"] {
            writeln!(f, r#"{{"text": "{line}"}}"#).unwrap();
        }
        let a = featurize(f.path(), &opts(4, false)).unwrap();
        let b = featurize(f.path(), &opts(4, false)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.feature_dim(), 4);
    }
}
