//! Weak labelers, vote matrices and Bernoulli-smoothed labeler relaxations.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SparseFeatures, TaskSchema};
use crate::error::{Error, Result};

/// One labeler output: a class index or an abstention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vote(u32);

impl Vote {
    /// Abstention sentinel; lies outside every class range.
    pub const ABSTAIN: Vote = Vote(u32::MAX);

    pub fn of(class: usize) -> Vote {
        assert!(class < u32::MAX as usize, "class index too large");
        Vote(class as u32)
    }

    pub fn is_abstain(self) -> bool {
        self == Vote::ABSTAIN
    }

    /// `None` for an abstention, otherwise the voted class.
    pub fn class(self) -> Option<usize> {
        (!self.is_abstain()).then_some(self.0 as usize)
    }
}

/// n×m matrix of labeler votes, row-major by example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VoteMatrix {
    num_rows: usize,
    num_labelers: usize,
    votes: Vec<Vote>,
    labeler_names: Vec<String>,
}

impl VoteMatrix {
    pub fn new(
        num_rows: usize,
        num_labelers: usize,
        votes: Vec<Vote>,
        labeler_names: Vec<String>,
    ) -> Result<Self> {
        if votes.len() != num_rows * num_labelers {
            return Err(Error::Shape(format!(
                "{} votes for a {num_rows}x{num_labelers} matrix",
                votes.len()
            )));
        }
        if labeler_names.len() != num_labelers {
            return Err(Error::Shape(format!(
                "{} labeler names for {num_labelers} labelers",
                labeler_names.len()
            )));
        }
        Ok(VoteMatrix {
            num_rows,
            num_labelers,
            votes,
            labeler_names,
        })
    }

    /// Builds from per-row vote lists (`None` = abstain).
    pub fn from_rows(rows: &[Vec<Option<usize>>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let mut votes = Vec::with_capacity(rows.len() * m);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Shape(format!(
                    "row {r} has {} votes, expected {m}",
                    row.len()
                )));
            }
            votes.extend(row.iter().map(|v| v.map_or(Vote::ABSTAIN, Vote::of)));
        }
        VoteMatrix::new(
            rows.len(),
            m,
            votes,
            (0..m).map(|i| format!("lf{i}")).collect(),
        )
    }

    /// Per-row vote lists (`None` = abstain).
    pub fn to_rows(&self) -> Vec<Vec<Option<usize>>> {
        (0..self.num_rows)
            .map(|r| self.row(r).iter().map(|v| v.class()).collect())
            .collect()
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_labelers(&self) -> usize {
        self.num_labelers
    }

    pub fn labeler_names(&self) -> &[String] {
        &self.labeler_names
    }

    pub fn row(&self, r: usize) -> &[Vote] {
        &self.votes[r * self.num_labelers..(r + 1) * self.num_labelers]
    }

    pub fn get(&self, r: usize, labeler: usize) -> Vote {
        self.votes[r * self.num_labelers + labeler]
    }

    /// Number of non-abstaining labelers on row `r`.
    pub fn non_abstain_count(&self, r: usize) -> usize {
        self.row(r).iter().filter(|v| !v.is_abstain()).count()
    }

    /// Per-labeler count of non-abstentions over all rows.
    pub fn coverage_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_labelers];
        for r in 0..self.num_rows {
            for (i, v) in self.row(r).iter().enumerate() {
                counts[i] += usize::from(!v.is_abstain());
            }
        }
        counts
    }

    /// Rows on which at least one labeler votes.
    pub fn covered_rows(&self) -> Vec<usize> {
        (0..self.num_rows)
            .filter(|&r| self.non_abstain_count(r) > 0)
            .collect()
    }

    /// Largest class index voted anywhere, if any.
    pub fn max_class(&self) -> Option<usize> {
        self.votes.iter().filter_map(|v| v.class()).max()
    }

    /// Keeps the listed rows in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut votes = Vec::with_capacity(rows.len() * self.num_labelers);
        for &r in rows {
            votes.extend_from_slice(self.row(r));
        }
        VoteMatrix {
            num_rows: rows.len(),
            num_labelers: self.num_labelers,
            votes,
            labeler_names: self.labeler_names.clone(),
        }
    }
}

/// m(x): number of labelers that do not abstain on row `r`.
pub fn non_abstain_count(vm: &VoteMatrix, r: usize) -> usize {
    vm.non_abstain_count(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum LabelerKind {
    /// Votes `voted_class` when any keyword feature is present.
    #[serde(rename_all = "camelCase")]
    KeywordAny {
        keyword_indices: Vec<usize>,
        voted_class: usize,
    },
    /// Votes by the sign of `w·x + b`; abstains when `|w·x + b| <= abstain_band`.
    #[serde(rename_all = "camelCase")]
    Linear {
        weights: Vec<f64>,
        bias: f64,
        positive_class: usize,
        negative_class: usize,
        abstain_band: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LabelerKind,
}

impl LabelerSpec {
    pub fn keyword_any(name: impl Into<String>, keywords: Vec<usize>, voted_class: usize) -> Self {
        let mut keyword_indices = keywords;
        keyword_indices.sort_unstable();
        keyword_indices.dedup();
        LabelerSpec {
            name: name.into(),
            kind: LabelerKind::KeywordAny {
                keyword_indices,
                voted_class,
            },
        }
    }

    pub fn linear(
        name: impl Into<String>,
        weights: Vec<f64>,
        bias: f64,
        negative_class: usize,
        positive_class: usize,
        abstain_band: f64,
    ) -> Self {
        LabelerSpec {
            name: name.into(),
            kind: LabelerKind::Linear {
                weights,
                bias,
                positive_class,
                negative_class,
                abstain_band,
            },
        }
    }

    pub fn validate(&self, schema: &TaskSchema) -> Result<()> {
        let d = schema.feature_dim();
        let k = schema.num_classes();
        let bad = |msg: String| Err(Error::Config(format!("labeler {}: {msg}", self.name)));
        match &self.kind {
            LabelerKind::KeywordAny {
                keyword_indices,
                voted_class,
            } => {
                if keyword_indices.is_empty() {
                    return bad("no keywords".into());
                }
                if let Some(j) = keyword_indices.iter().find(|j| **j >= d) {
                    return bad(format!("keyword index {j} outside [0,{d})"));
                }
                if *voted_class >= k {
                    return bad(format!("class {voted_class} outside [0,{k})"));
                }
            }
            LabelerKind::Linear {
                weights,
                bias,
                positive_class,
                negative_class,
                abstain_band,
            } => {
                if weights.len() != d {
                    return bad(format!("{} weights for dimension {d}", weights.len()));
                }
                if *positive_class >= k || *negative_class >= k {
                    return bad(format!("class mapping outside [0,{k})"));
                }
                if !(*abstain_band >= 0.0)
                    || !bias.is_finite()
                    || weights.iter().any(|w| !w.is_finite())
                {
                    return bad("non-finite parameters or negative abstain band".into());
                }
            }
        }
        Ok(())
    }

    /// Features the labeler reads.
    pub fn used_features(&self) -> Vec<usize> {
        match &self.kind {
            LabelerKind::KeywordAny {
                keyword_indices, ..
            } => keyword_indices.clone(),
            LabelerKind::Linear { weights, .. } => weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(j, _)| j)
                .collect(),
        }
    }

    pub fn apply(&self, x: &SparseFeatures) -> Vote {
        match &self.kind {
            LabelerKind::KeywordAny {
                keyword_indices,
                voted_class,
            } => {
                if keyword_indices.iter().any(|&j| x.get(j) > 0.0) {
                    Vote::of(*voted_class)
                } else {
                    Vote::ABSTAIN
                }
            }
            LabelerKind::Linear {
                weights,
                bias,
                positive_class,
                negative_class,
                abstain_band,
            } => {
                let score: f64 = bias + x.iter().map(|(j, v)| weights[j] * v).sum::<f64>();
                if score.abs() <= *abstain_band {
                    Vote::ABSTAIN
                } else if score > 0.0 {
                    Vote::of(*positive_class)
                } else {
                    Vote::of(*negative_class)
                }
            }
        }
    }
}

pub fn apply_labelers(specs: &[LabelerSpec], ds: &Dataset) -> Result<VoteMatrix> {
    for s in specs {
        s.validate(ds.schema())?;
    }
    let row = |r: usize| -> Vec<Vote> {
        let x = ds.features(r);
        specs.iter().map(|s| s.apply(x)).collect()
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<Vote>> = {
        use rayon::prelude::*;
        (0..ds.len()).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<Vote>> = (0..ds.len()).map(row).collect();
    VoteMatrix::new(
        ds.len(),
        specs.len(),
        rows.into_iter().flatten().collect(),
        specs.iter().map(|s| s.name.clone()).collect(),
    )
}

fn check_phi(phi: &[f64], d: usize) -> Result<()> {
    if phi.len() != d {
        return Err(Error::Shape(format!(
            "phi has length {}, expected {d}",
            phi.len()
        )));
    }
    if let Some((j, v)) = phi
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::Config(format!("phi[{j}] = {v} outside [0,1]")));
    }
    Ok(())
}

fn phi_dim(spec: &LabelerSpec, phi: &[f64]) -> usize {
    match &spec.kind {
        LabelerKind::Linear { weights, .. } => weights.len(),
        LabelerKind::KeywordAny { .. } => phi.len(),
    }
}

/// Probability that none of the keywords fires under independent
/// Bernoulli(φ) inputs.
fn silence_probability(keywords: &[usize], phi: &[f64]) -> f64 {
    keywords.iter().map(|&j| 1.0 - phi[j]).product()
}

/// Closed-form `E_{x~Ber(φ)}[onehot(λ(x))]` over the k classes followed by
/// the abstain slot (length k+1).
pub fn smoothed_value(spec: &LabelerSpec, phi: &[f64], num_classes: usize) -> Result<Vec<f64>> {
    check_phi(phi, phi_dim(spec, phi))?;
    match &spec.kind {
        LabelerKind::KeywordAny {
            keyword_indices,
            voted_class,
        } => {
            if let Some(j) = keyword_indices.iter().find(|j| **j >= phi.len()) {
                return Err(Error::Shape(format!("keyword {j} outside phi")));
            }
            let silent = silence_probability(keyword_indices, phi);
            let mut out = vec![0.0; num_classes + 1];
            out[*voted_class] = 1.0 - silent;
            out[num_classes] = silent;
            Ok(out)
        }
        LabelerKind::Linear { .. } => Err(Error::Unsupported(format!(
            "labeler {}: no closed-form smoothing for linear labelers",
            spec.name
        ))),
    }
}

/// ∂λ̃(φ)/∂φ_j over all k+1 outputs (abstain slot last), for each feature
/// the labeler reads.
pub fn smoothed_jacobian(
    spec: &LabelerSpec,
    phi: &[f64],
    num_classes: usize,
) -> Result<Vec<(usize, Vec<f64>)>> {
    check_phi(phi, phi_dim(spec, phi))?;
    match &spec.kind {
        LabelerKind::KeywordAny {
            keyword_indices,
            voted_class,
        } => {
            let n = keyword_indices.len();
            if let Some(j) = keyword_indices.iter().find(|j| **j >= phi.len()) {
                return Err(Error::Shape(format!("keyword {j} outside phi")));
            }
            // prefix[i] = ∏_{l<i}(1-φ_l), suffix[i] = ∏_{l>=i}(1-φ_l)
            let mut prefix = vec![1.0; n + 1];
            let mut suffix = vec![1.0; n + 1];
            for i in 0..n {
                prefix[i + 1] = prefix[i] * (1.0 - phi[keyword_indices[i]]);
            }
            for i in (0..n).rev() {
                suffix[i] = suffix[i + 1] * (1.0 - phi[keyword_indices[i]]);
            }
            Ok(keyword_indices
                .iter()
                .enumerate()
                .map(|(i, &j)| {
                    let others = prefix[i] * suffix[i + 1];
                    let mut col = vec![0.0; num_classes + 1];
                    col[*voted_class] = others;
                    col[num_classes] = -others;
                    (j, col)
                })
                .collect())
        }
        LabelerKind::Linear {
            weights,
            positive_class,
            negative_class,
            ..
        } => Ok(weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(j, &w)| {
                let mut col = vec![0.0; num_classes + 1];
                col[*positive_class] += w;
                col[*negative_class] -= w;
                (j, col)
            })
            .collect()),
    }
}

/// Gradient of a smoothed labeler restricted to the class (non-abstain)
/// output dimensions, as sparse `(feature, class) -> value` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedLabelerGradient {
    pub labeler_index: usize,
    /// Sorted by (feature, class).
    pub entries: Vec<(usize, usize, f64)>,
}

impl SmoothedLabelerGradient {
    pub fn get(&self, feature: usize, class: usize) -> Option<f64> {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(feature, class)))
            .ok()
            .map(|i| self.entries[i].2)
    }

    /// Entries for one output class only.
    pub fn for_class(&self, class: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries
            .iter()
            .filter(move |e| e.1 == class)
            .map(|e| (e.0, e.2))
    }

    /// Keeps the `k` largest-magnitude entries (lower feature index wins ties).
    pub fn top_k(&self, k: usize) -> Self {
        let mut ranked = self.entries.clone();
        ranked.sort_by(|a, b| {
            b.2.abs()
                .total_cmp(&a.2.abs())
                .then_with(|| (a.0, a.1).cmp(&(b.0, b.1)))
        });
        ranked.truncate(k);
        ranked.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        SmoothedLabelerGradient {
            labeler_index: self.labeler_index,
            entries: ranked,
        }
    }
}

pub fn smoothed_gradient(
    spec: &LabelerSpec,
    labeler_index: usize,
    phi: &[f64],
    num_classes: usize,
) -> Result<SmoothedLabelerGradient> {
    let jac = smoothed_jacobian(spec, phi, num_classes)?;
    let class_set: Vec<usize> = match &spec.kind {
        LabelerKind::KeywordAny { voted_class, .. } => vec![*voted_class],
        LabelerKind::Linear {
            positive_class,
            negative_class,
            ..
        } => {
            let mut c = vec![*negative_class, *positive_class];
            c.sort_unstable();
            c.dedup();
            c
        }
    };
    let mut entries = Vec::with_capacity(jac.len() * class_set.len());
    for (j, col) in jac {
        for &y in &class_set {
            entries.push((j, y, col[y]));
        }
    }
    entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    Ok(SmoothedLabelerGradient {
        labeler_index,
        entries,
    })
}

#[derive(Deserialize, Serialize)]
#[serde(rename_all = "camelCase")]
struct LabelerFileEntry {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keywords: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keyword_indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<f64>,
    /// Voted class for keyword rules; `[negative, positive]` for linear ones.
    class: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    abstain_band: Option<f64>,
}

/// Parses a labeler spec file (a JSON array), resolving keyword words to
/// feature indices through the schema's feature names.
pub fn parse_labeler_file(json: &str, schema: &TaskSchema) -> Result<Vec<LabelerSpec>> {
    let entries: Vec<LabelerFileEntry> = serde_json::from_str(json)?;
    let mut specs = Vec::with_capacity(entries.len());
    for e in entries {
        let bad = |msg: String| Error::Config(format!("labeler {}: {msg}", e.name));
        let spec = match e.kind.as_str() {
            "keywordAny" | "keyword" => {
                let mut idx = e.keyword_indices.clone().unwrap_or_default();
                for w in e.keywords.iter().flatten() {
                    let lw = w.to_lowercase();
                    let j = schema
                        .feature_index(&lw)
                        .ok_or_else(|| bad(format!("keyword {w:?} not in vocabulary")))?;
                    idx.push(j);
                }
                let class = e
                    .class
                    .as_u64()
                    .ok_or_else(|| bad("class must be an integer".into()))?;
                LabelerSpec::keyword_any(e.name.clone(), idx, class as usize)
            }
            "linear" => {
                let pair: Vec<usize> = serde_json::from_value(e.class.clone())
                    .map_err(|_| bad("linear class must be [negative, positive]".into()))?;
                if pair.len() != 2 {
                    return Err(bad("linear class must be [negative, positive]".into()));
                }
                LabelerSpec::linear(
                    e.name.clone(),
                    e.weights
                        .clone()
                        .ok_or_else(|| bad("missing weights".into()))?,
                    e.bias.unwrap_or(0.0),
                    pair[0],
                    pair[1],
                    e.abstain_band.unwrap_or(0.0),
                )
            }
            other => return Err(bad(format!("unknown kind {other:?}"))),
        };
        spec.validate(schema)?;
        specs.push(spec);
    }
    Ok(specs)
}

pub fn load_labeler_file(path: &Path, schema: &TaskSchema) -> Result<Vec<LabelerSpec>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labeler_file(&text, schema)
}

/// Inverse of [`parse_labeler_file`]; keywords are written as words when
/// the schema names its features.
pub fn labeler_file_json(specs: &[LabelerSpec], schema: &TaskSchema) -> Result<String> {
    let entries: Vec<LabelerFileEntry> = specs
        .iter()
        .map(|s| match &s.kind {
            LabelerKind::KeywordAny {
                keyword_indices,
                voted_class,
            } => {
                let words = schema.feature_names().map(|names| {
                    keyword_indices
                        .iter()
                        .map(|&j| names[j].clone())
                        .collect::<Vec<_>>()
                });
                LabelerFileEntry {
                    name: s.name.clone(),
                    kind: "keywordAny".into(),
                    keyword_indices: words.is_none().then(|| keyword_indices.clone()),
                    keywords: words,
                    weights: None,
                    bias: None,
                    class: serde_json::json!(voted_class),
                    abstain_band: None,
                }
            }
            LabelerKind::Linear {
                weights,
                bias,
                positive_class,
                negative_class,
                abstain_band,
            } => LabelerFileEntry {
                name: s.name.clone(),
                kind: "linear".into(),
                keywords: None,
                keyword_indices: None,
                weights: Some(weights.clone()),
                bias: Some(*bias),
                class: serde_json::json!([negative_class, positive_class]),
                abstain_band: Some(*abstain_band),
            },
        })
        .collect();
    Ok(serde_json::to_string_pretty(&entries)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Example, Split};

    fn schema(d: usize) -> TaskSchema {
        TaskSchema::anonymous(2, d).unwrap()
    }

    fn ds(rows: &[&[f64]]) -> Dataset {
        let d = rows[0].len();
        Dataset::new(
            schema(d),
            Split::Train,
            rows.iter()
                .map(|r| Example::new(SparseFeatures::from_dense(r), None))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn keyword_rule_votes_on_presence() {
        let lf = LabelerSpec::keyword_any("kw", vec![1], 1);
        let vm = apply_labelers(&[lf], &ds(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0]])).unwrap();
        assert_eq!(vm.get(0, 0), Vote::of(1));
        assert!(vm.get(1, 0).is_abstain());
    }

    #[test]
    fn zero_linear_labeler_always_abstains() {
        let lf = LabelerSpec::linear("lin", vec![0.0; 3], 0.0, 0, 1, 0.1);
        let vm = apply_labelers(&[lf], &ds(&[&[0.0, 1.0, 0.0], &[1.0, 3.0, 2.0]])).unwrap();
        assert!(vm.row(0)[0].is_abstain() && vm.row(1)[0].is_abstain());
    }

    #[test]
    fn linear_labeler_votes_by_sign() {
        let lf = LabelerSpec::linear("lin", vec![1.0, -1.0], 0.0, 0, 1, 0.5);
        let vm = apply_labelers(&[lf], &ds(&[&[2.0, 0.0], &[0.0, 2.0], &[1.0, 1.0]])).unwrap();
        assert_eq!(vm.get(0, 0), Vote::of(1));
        assert_eq!(vm.get(1, 0), Vote::of(0));
        assert!(vm.get(2, 0).is_abstain());
    }

    #[test]
    fn or_rule_casts_a_single_vote() {
        let lf = LabelerSpec::keyword_any("or", vec![0, 2], 0);
        let vm = apply_labelers(&[lf], &ds(&[&[1.0, 0.0, 1.0]])).unwrap();
        assert_eq!(vm.row(0), &[Vote::of(0)]);
        assert_eq!(vm.non_abstain_count(0), 1);
    }

    #[test]
    fn non_abstain_counts() {
        let vm =
            VoteMatrix::from_rows(&[vec![Some(1), None, Some(0)], vec![None, None, None]]).unwrap();
        assert_eq!(non_abstain_count(&vm, 0), 2);
        assert_eq!(non_abstain_count(&vm, 1), 0);
        let full = VoteMatrix::from_rows(&[vec![Some(0); 5]]).unwrap();
        assert_eq!(full.non_abstain_count(0), 5);
        assert_eq!(vm.covered_rows(), vec![0]);
        assert_eq!(vm.coverage_counts(), vec![1, 0, 1]);
    }

    #[test]
    fn single_keyword_smoothing() {
        let lf = LabelerSpec::keyword_any("kw", vec![0], 1);
        let v = smoothed_value(&lf, &[0.3], 2).unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 0.3).abs() < 1e-15 && v[2] == 0.7);
        assert_eq!(smoothed_value(&lf, &[0.0], 2).unwrap(), vec![0.0, 0.0, 1.0]);
        let jac = smoothed_jacobian(&lf, &[0.3], 2).unwrap();
        assert_eq!(jac, vec![(0, vec![0.0, 1.0, -1.0])]);
        let g = smoothed_gradient(&lf, 0, &[0.3], 2).unwrap();
        assert_eq!(g.entries, vec![(0, 1, 1.0)]);
    }

    #[test]
    fn two_keyword_smoothing() {
        let lf = LabelerSpec::keyword_any("kw", vec![0, 1], 1);
        let v = smoothed_value(&lf, &[0.5, 0.5], 2).unwrap();
        assert_eq!(v[1], 0.75);
        let g = smoothed_gradient(&lf, 0, &[0.2, 0.5], 2).unwrap();
        assert_eq!(g.get(0, 1), Some(0.5));
        let g = smoothed_gradient(&lf, 0, &[0.2, 1.0], 2).unwrap();
        assert_eq!(g.get(0, 1), Some(0.0));
    }

    #[test]
    fn phi_outside_unit_interval_rejected() {
        let lf = LabelerSpec::keyword_any("kw", vec![0], 1);
        assert!(smoothed_value(&lf, &[1.5], 2).is_err());
        assert!(smoothed_gradient(&lf, 0, &[-0.1], 2).is_err());
    }

    #[test]
    fn linear_gradient_is_signed_weights() {
        let lf = LabelerSpec::linear("lin", vec![0.5, 0.0, -2.0], 0.0, 0, 1, 0.0);
        let g = smoothed_gradient(&lf, 3, &[0.0; 3], 2).unwrap();
        assert_eq!(
            g.entries,
            vec![(0, 0, -0.5), (0, 1, 0.5), (2, 0, 2.0), (2, 1, -2.0)]
        );
        assert_eq!(g.top_k(2).entries, vec![(2, 0, 2.0), (2, 1, -2.0)]);
        assert!(smoothed_value(&lf, &[0.0; 3], 2).is_err());
    }

    #[test]
    fn spec_file_resolves_words() {
        let schema = TaskSchema::new(
            vec!["neg".into(), "pos".into()],
            3,
            Some(vec!["good".into(), "bad".into(), "food".into()]),
        )
        .unwrap();
        let json = r#"[
            {"name": "good", "kind": "keywordAny", "keywords": ["Good"], "class": 1},
            {"name": "lin", "kind": "linear", "weights": [1, -1, 0], "bias": 0.1, "class": [0, 1], "abstainBand": 0.2}
        ]"#;
        let specs = parse_labeler_file(json, &schema).unwrap();
        assert_eq!(specs[0], LabelerSpec::keyword_any("good", vec![0], 1));
        assert!(matches!(
            specs[1].kind,
            LabelerKind::Linear {
                positive_class: 1,
                ..
            }
        ));
        let back = labeler_file_json(&specs, &schema).unwrap();
        assert_eq!(parse_labeler_file(&back, &schema).unwrap(), specs);
        let unknown = r#"[{"name": "x", "kind": "keywordAny", "keywords": ["pizza"], "class": 1}]"#;
        assert!(parse_labeler_file(unknown, &schema).is_err());
    }
}
