use rand::seq::SliceRandom;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let f = SplitFractions {
            train,
            validation,
            test,
        };
        if [train, validation, test]
            .iter()
            .any(|v| !v.is_finite() || *v <= 0.0)
        {
            return Err(Error::Config(format!(
                "split fractions must be positive, got {f:?}"
            )));
        }
        if (train + validation + test - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {}",
                train + validation + test
            )));
        }
        Ok(f)
    }
}

fn shuffled_rows(n: usize, seed: u64) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng::stream(seed, Stream::Split));
    rows
}

/// Shuffles and partitions a labeled dataset into train/validation/test.
pub fn split_dataset(
    ds: &Dataset,
    fractions: SplitFractions,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let n = ds.len();
    let n_val = (n as f64 * fractions.validation).round() as usize;
    let n_test = (n as f64 * fractions.test).round() as usize;
    if n_val + n_test > n {
        return Err(Error::Config(format!("cannot split {n} examples")));
    }
    let rows = shuffled_rows(n, seed);
    let (val, rest) = rows.split_at(n_val);
    let (test, train) = rest.split_at(n_test);
    Ok((
        ds.subset(train, Split::Train)?,
        ds.subset(val, Split::Validation)?,
        ds.subset(test, Split::Test)?,
    ))
}

/// Holds out `test_fraction` for testing, then takes exactly `per_class`
/// labeled validation examples of every class from the remainder; the rest
/// is the (weakly supervised) training split.
pub fn split_per_class(
    ds: &Dataset,
    test_fraction: f64,
    per_class: usize,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must be in (0,1), got {test_fraction}"
        )));
    }
    let labels = ds.oracle_labels()?;
    let k = ds.schema().num_classes();
    let n = ds.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    let rows = shuffled_rows(n, seed);
    let (test, rest) = rows.split_at(n_test);
    let mut taken = vec![0usize; k];
    let mut val = Vec::with_capacity(per_class * k);
    let mut train = Vec::new();
    for &r in rest {
        let y = labels[r];
        if taken[y] < per_class {
            taken[y] += 1;
            val.push(r);
        } else {
            train.push(r);
        }
    }
    if let Some((class, have)) = taken.iter().enumerate().find(|(_, t)| **t < per_class) {
        return Err(Error::Config(format!(
            "class {class} has only {have} examples available for {per_class} validation examples per class"
        )));
    }
    Ok((
        ds.subset(&train, Split::Train)?,
        ds.subset(&val, Split::Validation)?,
        ds.subset(test, Split::Test)?,
    ))
}
