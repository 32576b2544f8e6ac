use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use lolws_core::data::{
    featurize as featurize_corpus, generate_synthetic, load_dataset, save_dataset, split_dataset,
    split_per_class, Dataset, FeaturizeOptions, SplitFractions, SyntheticTaskConfig,
};
use lolws_core::labelers::{apply_labelers, labeler_file_json, load_labeler_file};
use lolws_core::labelmodels::{triplet_accuracies, TripletAggregation};
use lolws_core::nnet::{save_checkpoint, Checkpoint};
use lolws_core::train::{
    ablation_suite, report_table, sweep as run_sweep, train_once, AblationSpec, AblationTable,
    Method, SweepSpec, TableFormat, TrainReport, TrialRecord,
};
use lolws_core::{Error, Result};

use crate::manifest::ManifestBuilder;
use crate::task::{load_task, AblationSection, ConfigFile, LIMITED_VALIDATION_EPOCHS};
use crate::{
    AblateArgs, FeaturizeArgs, LabelArgs, ReportArgs, RunArgs, SweepArgs, SynthArgs, TaskArgs,
};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn write_json<T: Serialize + ?Sized>(path: PathBuf, value: &T) -> Result<PathBuf> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_text(path, &text)
}

fn save_splits(out: &Path, splits: [(&str, &Dataset); 3]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (name, ds) in splits {
        let path = out.join(format!("{name}.json"));
        save_dataset(ds, &path)?;
        written.push(path);
    }
    Ok(written)
}

pub fn featurize(args: FeaturizeArgs) -> Result<()> {
    let opts = FeaturizeOptions {
        vocab_limit: args.vocab_limit,
        binarize: args.binarize,
        num_classes: args.num_classes,
    };
    let mut manifest = ManifestBuilder::start(
        "featurize",
        json!({
            "vocabLimit": args.vocab_limit,
            "binarize": args.binarize,
            "numClasses": args.num_classes,
            "fractions": args.fractions,
            "valPerClass": args.val_per_class,
            "seed": args.seed,
        }),
    );
    let (ds, schema) = featurize_corpus(&args.corpus, &opts)?;
    manifest.input(&args.corpus);
    let (train, validation, test) = match args.val_per_class {
        Some(n) => split_per_class(&ds, 0.2, n, args.seed)?,
        None => {
            let parts: Vec<f64> = args
                .fractions
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("--fractions: {e}")))?;
            let [a, b, c] = parts[..] else {
                return Err(Error::Config(
                    "--fractions takes three comma-separated numbers".into(),
                ));
            };
            split_dataset(&ds, SplitFractions::new(a, b, c)?, args.seed)?
        }
    };
    create_dir(&args.out)?;
    let mut outputs = save_splits(
        &args.out,
        [
            ("train", &train),
            ("validation", &validation),
            ("test", &test),
        ],
    )?;
    outputs.push(write_json(
        args.out.join("schema.json"),
        &json!({
            "classes": schema.class_names(),
            "featureDim": schema.feature_dim(),
            "vocabulary": schema.feature_names(),
        }),
    )?);
    manifest.finish(&outputs, &args.out)?;
    println!(
        "featurized {} examples: {} features, {} classes; train {} / validation {} / test {} -> {}",
        ds.len(),
        schema.feature_dim(),
        schema.num_classes(),
        train.len(),
        validation.len(),
        test.len(),
        args.out.display()
    );
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut cfg: SyntheticTaskConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SyntheticTaskConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    let mut manifest = ManifestBuilder::start("synth", serde_json::to_value(&cfg)?);
    if let Some(path) = &args.config {
        manifest.input(path);
    }
    let task = generate_synthetic(&cfg)?;
    create_dir(&args.out)?;
    let mut outputs = save_splits(
        &args.out,
        [
            ("train", &task.train),
            ("validation", &task.validation),
            ("test", &task.test),
        ],
    )?;
    outputs.push(write_text(
        args.out.join("labelers.json"),
        &(labeler_file_json(&task.labelers, &task.schema)? + "\n"),
    )?);
    outputs.push(write_json(args.out.join("synth-config.json"), &cfg)?);
    manifest.finish(&outputs, &args.out)?;
    println!(
        "synthetic task: {} classes, {} features, {} labelers; train {} / validation {} / test {} -> {}",
        cfg.num_classes,
        cfg.feature_dim,
        task.labelers.len(),
        task.train.len(),
        task.validation.len(),
        task.test.len(),
        args.out.display()
    );
    Ok(())
}

pub fn label(args: LabelArgs) -> Result<()> {
    let train_path = args.data.join("train.json");
    let mut manifest = ManifestBuilder::start("label", json!({ "minOverlap": args.min_overlap }));
    let train = load_dataset(&train_path)?;
    let specs = load_labeler_file(&args.labelers, train.schema())?;
    manifest.input(&train_path);
    manifest.input(&args.labelers);
    let votes = apply_labelers(&specs, &train)?;
    let n = votes.num_rows().max(1) as f64;
    let coverage: Vec<f64> = votes
        .coverage_counts()
        .iter()
        .map(|&c| c as f64 / n)
        .collect();
    create_dir(&args.out)?;
    let mut outputs = vec![write_json(
        args.out.join("votes.json"),
        &json!({
            "labelers": votes.labeler_names(),
            "coverage": coverage,
            "rows": votes.to_rows(),
        }),
    )?];
    println!(
        "{} rows, {} covered",
        votes.num_rows(),
        votes.covered_rows().len()
    );
    for (name, c) in votes.labeler_names().iter().zip(&coverage) {
        println!("  {name}: coverage {c:.3}");
    }
    let k = train.schema().num_classes();
    if k == 2 {
        match triplet_accuracies(&votes, k, TripletAggregation::Mean, args.min_overlap) {
            Ok(est) => {
                outputs.push(write_json(
                    args.out.join("accuracy.json"),
                    &est.to_named_json(votes.labeler_names()),
                )?);
                for (name, a) in votes.labeler_names().iter().zip(&est.per_labeler) {
                    println!("  {name}: estimated accuracy {a:.3}");
                }
            }
            Err(e) if !e.is_numerical() => log::warn!("no accuracy estimates: {e}"),
            Err(e) => return Err(e),
        }
    }
    manifest.finish(&outputs, &args.out)?;
    Ok(())
}

struct Resolved {
    config: ConfigFile,
    jobs: usize,
}

fn resolve(args: &TaskArgs) -> Result<Resolved> {
    let (mut config, mut has_epochs) = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => (ConfigFile::default(), false),
    };
    if let Some(d) = &args.data {
        config.data = Some(d.clone());
    }
    if let Some(l) = &args.labelers {
        config.labelers = Some(l.clone());
    }
    if let Some(w) = &args.wrench {
        config.wrench = Some(w.clone());
    }
    if let Some(m) = &args.method {
        config.run.method = Method::from_str(m)?;
    }
    if let Some(seed) = args.seed {
        config.run.seed = seed;
        if let Some(sw) = config.sweep.as_mut() {
            sw.seed = seed;
        }
    }
    if let Some(e) = args.epochs {
        config.run.epochs = e;
        has_epochs = true;
    }
    if let Some(n) = args.max_train {
        config.run.max_train_examples = Some(n);
    }
    if let Some(n) = args.val_per_class {
        config.val_per_class = Some(n);
    }
    if config.val_per_class.is_some() && !has_epochs {
        config.run.epochs = LIMITED_VALIDATION_EPOCHS;
    }
    config.run.validate()?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    Ok(Resolved { config, jobs })
}

fn start_manifest(
    command: &str,
    config: &ConfigFile,
    inputs: &[PathBuf],
) -> Result<ManifestBuilder> {
    let mut m = ManifestBuilder::start(command, serde_json::to_value(config)?);
    for p in inputs {
        m.input(p);
    }
    Ok(m)
}

pub fn run(args: RunArgs) -> Result<()> {
    let Resolved { config, .. } = resolve(&args.task)?;
    let task = load_task(&config)?;
    let out = &args.task.out;
    let mut manifest = start_manifest("run", &config, &task.inputs)?;
    if let Some(n) = config.run.max_train_examples {
        manifest.detail(
            "truncation",
            json!({
                "maxTrainExamples": n,
                "availableTrainExamples": task.train.len(),
                "usedTrainExamples": n.min(task.train.len()),
            }),
        );
    }
    let outcome = train_once(&config.run, task.data())?;
    create_dir(out)?;
    let report = &outcome.report;
    let mut outputs = vec![write_json(out.join("report.json"), report)?];
    let mut metrics = String::new();
    for e in &report.epochs {
        metrics.push_str(&serde_json::to_string(e)?);
        metrics.push('\n');
    }
    outputs.push(write_text(out.join("metrics.jsonl"), &metrics)?);
    let ckpt_path = out.join("model.ckpt");
    save_checkpoint(
        &ckpt_path,
        &Checkpoint {
            model: outcome.model.clone(),
            rng_seed: config.run.seed,
            epoch: report.selected_epoch,
        },
    )?;
    outputs.push(ckpt_path);
    manifest.finish(&outputs, out)?;
    println!(
        "{}: selected epoch {}, validation accuracy {:.4}, test accuracy {}",
        report.method,
        report.selected_epoch,
        report.validation_accuracy,
        report
            .test_accuracy
            .map_or("n/a".into(), |a| format!("{a:.4}"))
    );
    Ok(())
}

fn sweep_spec(config: &ConfigFile, budget: Option<usize>) -> SweepSpec {
    let mut spec = config.sweep.clone().unwrap_or_else(|| SweepSpec {
        seed: config.run.seed,
        ..Default::default()
    });
    if budget.is_some() {
        spec.budget = budget;
    }
    spec
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let Resolved { config, jobs } = resolve(&args.task)?;
    let spec = sweep_spec(&config, args.budget);
    let task = load_task(&config)?;
    let out = &args.task.out;
    let mut recorded = config.clone();
    recorded.sweep = Some(spec.clone());
    let manifest = start_manifest("sweep", &recorded, &task.inputs)?;
    let result = run_sweep(&spec, &config.run, task.data(), jobs)?;
    let trials_dir = out.join("trials");
    create_dir(&trials_dir)?;
    let mut outputs = Vec::new();
    for t in &result.trials {
        outputs.push(write_json(
            trials_dir.join(format!("trial-{:04}.json", t.index)),
            t,
        )?);
    }
    let best = ConfigFile {
        run: result.best_config.clone(),
        sweep: None,
        ablation: None,
        ..config.absolutized()?
    };
    outputs.push(write_json(out.join("best-config.json"), &best)?);
    let summary: Vec<Value> = result
        .trials
        .iter()
        .map(|t| {
            json!({
                "index": t.index,
                "learningRate": t.config.learning_rate,
                "weightDecay": t.config.weight_decay,
                "alpha": t.config.loss.alpha,
                "threshold": t.config.loss.threshold,
                "validationAccuracy": t.report.as_ref().map(|r| r.validation_accuracy),
                "selectedEpoch": t.report.as_ref().map(|r| r.selected_epoch),
                "error": t.error,
            })
        })
        .collect();
    outputs.push(write_json(
        out.join("sweep.json"),
        &json!({ "bestIndex": result.best_index, "trials": summary }),
    )?);
    manifest.finish(&outputs, out)?;
    let r = result.best_report();
    println!(
        "{} trials; best #{}: lr {} wd {} alpha {} c {} -> validation {:.4}, test {}",
        result.trials.len(),
        result.best_index,
        result.best_config.learning_rate,
        result.best_config.weight_decay,
        result.best_config.loss.alpha,
        result.best_config.loss.threshold,
        r.validation_accuracy,
        r.test_accuracy.map_or("n/a".into(), |a| format!("{a:.4}"))
    );
    Ok(())
}

fn parse_seeds(text: &str, base: u64) -> Result<Vec<u64>> {
    let bad = |e: std::num::ParseIntError| Error::Config(format!("--seeds {text:?}: {e}"));
    if text.contains(',') {
        text.split(',')
            .map(|s| s.trim().parse::<u64>().map_err(bad))
            .collect()
    } else {
        let n: u64 = text.trim().parse().map_err(bad)?;
        Ok((base..base + n).collect())
    }
}

fn parse_methods(text: &str) -> Result<Vec<Method>> {
    text.split(',')
        .map(|s| Method::from_str(s.trim()))
        .collect()
}

pub fn ablate(args: AblateArgs) -> Result<()> {
    let Resolved { mut config, jobs } = resolve(&args.task)?;
    let format = TableFormat::from_str(&args.format)?;
    let section = config.ablation.take().unwrap_or_default();
    let task = load_task(&config)?;
    let k = task.train.schema().num_classes();
    let methods = match &args.methods {
        Some(m) => parse_methods(m)?,
        None if !section.methods.is_empty() => section.methods.clone(),
        None => Method::ALL
            .iter()
            .copied()
            .filter(|m| k == 2 || !m.binary_only())
            .collect(),
    };
    let seeds = match &args.seeds {
        Some(s) => parse_seeds(s, config.run.seed)?,
        None if !section.seeds.is_empty() => section.seeds.clone(),
        None => (config.run.seed..config.run.seed + 5).collect(),
    };
    let search = args.search || args.search_per_seed || section.search || section.search_per_seed;
    let spec = AblationSpec {
        task: config.task_name(),
        methods: methods.clone(),
        seeds: seeds.clone(),
        template: config.run.clone(),
        sweep: search.then(|| sweep_spec(&config, args.budget)),
        search_per_seed: args.search_per_seed || section.search_per_seed,
    };
    let mut recorded = config.clone();
    recorded.sweep = spec.sweep.clone();
    recorded.ablation = Some(AblationSection {
        methods,
        seeds,
        search,
        search_per_seed: spec.search_per_seed,
    });
    let manifest = start_manifest("ablate", &recorded, &task.inputs)?;
    let table = ablation_suite(&spec, task.data(), jobs)?;
    let out = &args.task.out;
    create_dir(out)?;
    let outputs = vec![
        write_text(out.join("ablation.json"), &table.render(TableFormat::Json)?)?,
        write_text(out.join("ablation.txt"), &table.render(TableFormat::Text)?)?,
        write_text(out.join("ablation.csv"), &table.render(TableFormat::Csv)?)?,
    ];
    manifest.finish(&outputs, out)?;
    print!("{}", table.render(format)?);
    Ok(())
}

fn collect_json(path: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(path, err)))
            .collect::<Result<_>>()?;
        entries.sort();
        for e in entries {
            collect_json(&e, found)?;
        }
    } else if path.extension().is_some_and(|x| x == "json") {
        found.push(path.to_path_buf());
    } else if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::from(std::io::ErrorKind::NotFound),
        ));
    }
    Ok(())
}

pub fn report(args: ReportArgs) -> Result<()> {
    let format = TableFormat::from_str(&args.format)?;
    let mut files = Vec::new();
    for p in &args.paths {
        collect_json(p, &mut files)?;
    }
    let mut reports: Vec<(String, TrainReport)> = Vec::new();
    let mut ablation = AblationTable { rows: Vec::new() };
    for f in &files {
        let text = fs::read_to_string(f).map_err(|e| Error::io(f, e))?;
        let Ok(value) = serde_json::from_str::<Value>(&text) else {
            continue;
        };
        let name = f.display().to_string();
        if value.get("rows").is_some() {
            if let Ok(t) = serde_json::from_value::<AblationTable>(value) {
                ablation.rows.extend(t.rows);
            }
        } else if value.get("selectedEpoch").is_some() {
            if let Ok(r) = serde_json::from_value::<TrainReport>(value) {
                reports.push((name, r));
            }
        } else if value.get("report").is_some() {
            if let Ok(TrialRecord {
                report: Some(r), ..
            }) = serde_json::from_value::<TrialRecord>(value)
            {
                reports.push((name, r));
            }
        }
    }
    if reports.is_empty() && ablation.rows.is_empty() {
        let paths: Vec<String> = args.paths.iter().map(|p| p.display().to_string()).collect();
        return Err(Error::Config(format!(
            "no reports found under {}",
            paths.join(", ")
        )));
    }
    let mut text = String::new();
    if !reports.is_empty() {
        text.push_str(&report_table(&reports, format)?);
    }
    if !ablation.rows.is_empty() {
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&ablation.render(format)?);
    }
    match &args.out {
        Some(path) => {
            write_text(path.clone(), &text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}
