use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Example, Split, TaskSchema};
use crate::error::{Error, Result};

pub const CACHE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CacheFile {
    format_version: u32,
    k: usize,
    d: usize,
    #[serde(default)]
    feature_names: Option<Vec<String>>,
    class_names: Vec<String>,
    split: Split,
    examples: Vec<Example>,
}

/// Writes a dataset as a JSON container with a `{formatVersion, k, d,
/// featureNames}` header.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let schema = ds.schema();
    let file = CacheFile {
        format_version: CACHE_FORMAT_VERSION,
        k: schema.num_classes(),
        d: schema.feature_dim(),
        feature_names: schema.feature_names().map(<[String]>::to_vec),
        class_names: schema.class_names().to_vec(),
        split: ds.split(),
        examples: ds.examples().to_vec(),
    };
    let bytes = serde_json::to_vec(&file)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let file: CacheFile = serde_json::from_slice(&bytes)?;
    if file.format_version != CACHE_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "{}: unsupported dataset cache version {}",
            path.display(),
            file.format_version
        )));
    }
    if file.class_names.len() != file.k {
        return Err(Error::Schema(format!(
            "{}: header k={} but {} class names",
            path.display(),
            file.k,
            file.class_names.len()
        )));
    }
    let schema = TaskSchema::new(file.class_names, file.d, file.feature_names)?;
    Dataset::new(schema, file.split, file.examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticTaskConfig};

    #[test]
    fn cache_roundtrip() {
        let task = generate_synthetic(&SyntheticTaskConfig {
            num_train: 30,
            num_validation: 5,
            num_test: 5,
            ..Default::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("train.json");
        save_dataset(&task.validation, &p).unwrap();
        assert_eq!(load_dataset(&p).unwrap(), task.validation);
        let header: serde_json::Value = serde_json::from_slice(&fs::read(&p).unwrap()).unwrap();
        assert_eq!(header["formatVersion"], 1);
        assert_eq!(header["d"], 200);
    }

    #[test]
    fn rejects_future_versions() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        fs::write(
            &p,
            r#"{"formatVersion":9,"k":2,"d":1,"classNames":["a","b"],"split":"train","examples":[]}"#,
        )
        .unwrap();
        assert!(load_dataset(&p).is_err());
    }
}
