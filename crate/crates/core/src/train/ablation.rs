use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sweep::{parallel_map, sweep, SweepSpec};
use super::{train_once, Method, RunConfig, TaskData, TrainReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AblationSpec {
    pub task: String,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub template: RunConfig,
    /// Searched once at the template seed unless `search_per_seed` is set.
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub search_per_seed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AblationRow {
    pub task: String,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub test_accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
    /// Configuration each seed was trained with.
    pub configs: Vec<RunConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(TableFormat::Text),
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(Error::Config(format!(
                "unknown format {other:?} (text, csv, json)"
            ))),
        }
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl AblationRow {
    pub fn from_runs(
        task: &str,
        method: Method,
        seeds: Vec<u64>,
        reports: &[TrainReport],
    ) -> Result<Self> {
        let test_accuracies = reports
            .iter()
            .map(|r| {
                r.test_accuracy
                    .ok_or_else(|| Error::MissingLabels("ablation runs need a test split".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let (mean, std) = mean_std(&test_accuracies);
        Ok(AblationRow {
            task: task.to_string(),
            method,
            seeds,
            test_accuracies,
            mean,
            std,
            configs: reports.iter().map(|r| r.config.clone()).collect(),
        })
    }
}

impl AblationTable {
    /// Methods as rows, tasks as columns, cells `mean ± std` in percent.
    pub fn render(&self, format: TableFormat) -> Result<String> {
        match format {
            TableFormat::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            TableFormat::Csv => {
                let mut out = String::from("task,method,runs,mean,std,accuracies\n");
                for r in &self.rows {
                    let accs: Vec<String> = r
                        .test_accuracies
                        .iter()
                        .map(|a| format!("{a:.6}"))
                        .collect();
                    writeln!(
                        out,
                        "{},{},{},{:.6},{:.6},{}",
                        r.task,
                        r.method,
                        r.test_accuracies.len(),
                        r.mean,
                        r.std,
                        accs.join(";")
                    )
                    .unwrap();
                }
                Ok(out)
            }
            TableFormat::Text => {
                let mut tasks: Vec<&str> = Vec::new();
                let mut methods: Vec<Method> = Vec::new();
                let mut cells: BTreeMap<(Method, &str), String> = BTreeMap::new();
                for r in &self.rows {
                    if !tasks.contains(&r.task.as_str()) {
                        tasks.push(&r.task);
                    }
                    if !methods.contains(&r.method) {
                        methods.push(r.method);
                    }
                    cells.insert(
                        (r.method, r.task.as_str()),
                        format!("{:.2} ± {:.2}", 100.0 * r.mean, 100.0 * r.std),
                    );
                }
                let mut header = vec!["method".to_string()];
                header.extend(tasks.iter().map(|t| t.to_string()));
                let mut lines = vec![header];
                for m in &methods {
                    let mut line = vec![m.to_string()];
                    for t in &tasks {
                        line.push(cells.get(&(*m, *t)).cloned().unwrap_or_else(|| "-".into()));
                    }
                    lines.push(line);
                }
                Ok(align(&lines))
            }
        }
    }
}

pub(crate) fn align(lines: &[Vec<String>]) -> String {
    let cols = lines.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            lines
                .iter()
                .filter_map(|l| l.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for l in lines {
        let cells: Vec<String> = l
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s}{}", " ".repeat(widths[c] - s.chars().count())))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Runs every method across the seeds and aggregates test accuracy.
pub fn ablation_suite(
    spec: &AblationSpec,
    data: TaskData<'_>,
    jobs: usize,
) -> Result<AblationTable> {
    if spec.seeds.len() < 2 {
        return Err(Error::Config("an ablation needs at least 2 seeds".into()));
    }
    if data.test.is_none() {
        return Err(Error::MissingLabels(
            "ablation runs need a test split".into(),
        ));
    }
    let mut rows = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        let template = RunConfig {
            method,
            ..spec.template.clone()
        };
        let configs: Vec<RunConfig> = match (&spec.sweep, spec.search_per_seed) {
            (Some(sw), false) => {
                let best = sweep(sw, &template, data, jobs)?.best_config;
                spec.seeds
                    .iter()
                    .map(|&seed| RunConfig {
                        seed,
                        ..best.clone()
                    })
                    .collect()
            }
            (Some(sw), true) => spec
                .seeds
                .iter()
                .map(|&seed| {
                    let seeded = RunConfig {
                        seed,
                        ..template.clone()
                    };
                    Ok(sweep(sw, &seeded, data, jobs)?.best_config)
                })
                .collect::<Result<_>>()?,
            (None, _) => spec
                .seeds
                .iter()
                .map(|&seed| RunConfig {
                    seed,
                    ..template.clone()
                })
                .collect(),
        };
        let reports = parallel_map(configs, jobs, |cfg| {
            train_once(&cfg, data).map(|o| o.report)
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        log::info!(
            "{method}: {:?}",
            reports.iter().map(|r| r.test_accuracy).collect::<Vec<_>>()
        );
        rows.push(AblationRow::from_runs(
            &spec.task,
            method,
            spec.seeds.clone(),
            &reports,
        )?);
    }
    Ok(AblationTable { rows })
}

/// One row per stored report.
pub fn report_table(reports: &[(String, TrainReport)], format: TableFormat) -> Result<String> {
    match format {
        TableFormat::Json => {
            let v: Vec<&TrainReport> = reports.iter().map(|r| &r.1).collect();
            Ok(serde_json::to_string_pretty(&v)? + "\n")
        }
        TableFormat::Csv => {
            let mut out = String::from("name,method,seed,learningRate,weightDecay,alpha,threshold,selectedEpoch,validationAccuracy,testAccuracy\n");
            for (name, r) in reports {
                writeln!(
                    out,
                    "{name},{},{},{},{},{},{},{},{:.6},{}",
                    r.method,
                    r.config.seed,
                    r.config.learning_rate,
                    r.config.weight_decay,
                    r.config.loss.alpha,
                    r.config.loss.threshold,
                    r.selected_epoch,
                    r.validation_accuracy,
                    r.test_accuracy.map_or(String::new(), |a| format!("{a:.6}"))
                )
                .unwrap();
            }
            Ok(out)
        }
        TableFormat::Text => {
            let mut lines = vec![[
                "name", "method", "seed", "lr", "wd", "alpha", "c", "epoch", "val", "test",
            ]
            .map(String::from)
            .to_vec()];
            for (name, r) in reports {
                lines.push(vec![
                    name.clone(),
                    r.method.to_string(),
                    r.config.seed.to_string(),
                    r.config.learning_rate.to_string(),
                    r.config.weight_decay.to_string(),
                    r.config.loss.alpha.to_string(),
                    r.config.loss.threshold.to_string(),
                    r.selected_epoch.to_string(),
                    format!("{:.4}", r.validation_accuracy),
                    r.test_accuracy.map_or("-".into(), |a| format!("{a:.4}")),
                ]);
            }
            Ok(align(&lines))
        }
    }
}
