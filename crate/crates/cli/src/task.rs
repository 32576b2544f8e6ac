//! Config files and task loading shared by the training commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lolws_core::data::{load_dataset, load_wrench_dir, Dataset, FeaturizeOptions, Split};
use lolws_core::labelers::{apply_labelers, load_labeler_file, LabelerSpec, VoteMatrix};
use lolws_core::labelmodels::AccuracyEstimate;
use lolws_core::train::{Method, RunConfig, SweepSpec, TaskData};
use lolws_core::{Error, Result};

/// Epoch budget used with a small labeled validation set.
pub const LIMITED_VALIDATION_EPOCHS: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AblationSection {
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub search: bool,
    #[serde(default)]
    pub search_per_seed: bool,
}

/// On-disk run configuration. Relative paths resolve against the file's
/// directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    /// Directory holding `train.json`, `validation.json` and optionally `test.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labelers: Option<PathBuf>,
    /// WRENCH-style directory; replaces `data` and `labelers`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrench: Option<PathBuf>,
    /// `{labelerName: accuracy}` used by LoL-a instead of triplet estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_per_class: Option<usize>,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationSection>,
}

impl ConfigFile {
    /// Reads a config file; the flag reports whether it set `run.epochs`.
    pub fn load(path: &Path) -> Result<(Self, bool)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let has_epochs = value.pointer("/run/epochs").is_some();
        let mut cfg: ConfigFile = serde_json::from_value(value)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.data,
            &mut cfg.labelers,
            &mut cfg.wrench,
            &mut cfg.accuracy,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok((cfg, has_epochs))
    }

    /// Rewrites relative paths against the working directory, so the
    /// config can be stored anywhere.
    pub fn absolutized(&self) -> Result<Self> {
        let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
        let mut cfg = self.clone();
        for p in [
            &mut cfg.data,
            &mut cfg.labelers,
            &mut cfg.wrench,
            &mut cfg.accuracy,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = cwd.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn task_name(&self) -> String {
        if let Some(t) = &self.task {
            return t.clone();
        }
        let dir = self.wrench.as_ref().or(self.data.as_ref());
        dir.and_then(|d| d.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "task".into())
    }
}

pub struct LoadedTask {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Option<Dataset>,
    pub votes: VoteMatrix,
    pub labelers: Vec<LabelerSpec>,
    pub accuracy: Option<AccuracyEstimate>,
    /// Files read, for the manifest.
    pub inputs: Vec<PathBuf>,
}

impl LoadedTask {
    pub fn data(&self) -> TaskData<'_> {
        TaskData {
            train: &self.train,
            validation: &self.validation,
            test: self.test.as_ref(),
            votes: &self.votes,
            labelers: &self.labelers,
            accuracy: self.accuracy.as_ref(),
        }
    }
}

/// First `per_class` validation rows of each class, in stored order.
pub fn limit_validation(ds: &Dataset, per_class: usize) -> Result<Dataset> {
    let labels = ds.labels()?;
    let k = ds.schema().num_classes();
    let mut taken = vec![0usize; k];
    let mut rows = Vec::new();
    for (r, &y) in labels.iter().enumerate() {
        if taken[y] < per_class {
            taken[y] += 1;
            rows.push(r);
        }
    }
    if let Some((class, have)) = taken.iter().enumerate().find(|(_, t)| **t < per_class) {
        return Err(Error::Config(format!(
            "validation split has only {have} examples of class {class}, need {per_class}"
        )));
    }
    ds.subset(&rows, Split::Validation)
}

pub fn load_task(cfg: &ConfigFile) -> Result<LoadedTask> {
    let mut inputs = Vec::new();
    let (train, validation, test, votes, labelers) = if let Some(dir) = &cfg.wrench {
        let opts = FeaturizeOptions {
            binarize: true,
            ..Default::default()
        };
        let task = load_wrench_dir(dir, &opts)?;
        for f in ["train.json", "valid.json", "test.json"] {
            inputs.push(dir.join(f));
        }
        if dir.join("label.json").exists() {
            inputs.push(dir.join("label.json"));
        }
        (
            task.train,
            task.validation,
            Some(task.test),
            task.train_votes,
            Vec::new(),
        )
    } else {
        let dir = cfg.data.as_ref().ok_or_else(|| {
            Error::Config("no dataset given (--data or \"data\" in the config)".into())
        })?;
        let labeler_path = cfg.labelers.as_ref().ok_or_else(|| {
            Error::Config("no labeler file given (--labelers or \"labelers\" in the config)".into())
        })?;
        let train_path = dir.join("train.json");
        let val_path = dir.join("validation.json");
        let test_path = dir.join("test.json");
        let train = load_dataset(&train_path)?;
        let validation = load_dataset(&val_path)?;
        inputs.push(train_path);
        inputs.push(val_path);
        let test = if test_path.exists() {
            let t = load_dataset(&test_path)?;
            inputs.push(test_path);
            Some(t)
        } else {
            None
        };
        let labelers = load_labeler_file(labeler_path, train.schema())?;
        inputs.push(labeler_path.clone());
        let votes = apply_labelers(&labelers, &train)?;
        (train, validation, test, votes, labelers)
    };
    let validation = match cfg.val_per_class {
        Some(n) => limit_validation(&validation, n)?,
        None => validation,
    };
    let accuracy = match &cfg.accuracy {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            inputs.push(path.clone());
            Some(AccuracyEstimate::from_named_json(
                &value,
                votes.labeler_names(),
            )?)
        }
        None => None,
    };
    Ok(LoadedTask {
        train,
        validation,
        test,
        votes,
        labelers,
        accuracy,
        inputs,
    })
}
