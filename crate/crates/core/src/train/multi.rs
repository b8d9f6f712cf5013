use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{config_digest, Checkpoint};
use crate::data::{random_split, scaffold_split, Dataset, DatasetSplit, SplitMethod};
use crate::model::{Mlfgnn, ModelConfig};

use super::{mean_std, metric_name, train, TargetScaler, TrainConfig, TrainError, TrainOutcome};
use super::Prepared;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub valid_metric: Option<f64>,
    pub test_metric: Option<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Relative to the output directory.
    pub checkpoint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub task: String,
    pub split: SplitMethod,
    pub config_digest: String,
    pub dataset_checksum: String,
    pub seeds: Vec<SeedResult>,
    pub test_mean: Option<f64>,
    pub test_std: Option<f64>,
    pub valid_mean: Option<f64>,
    pub valid_std: Option<f64>,
}

/// Checkpoint metadata needed to turn raw outputs back into label space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub task_names: Vec<String>,
    pub scaler: TargetScaler,
    pub seed: u64,
    pub best_epoch: usize,
}

impl EvalReport {
    pub fn new(model: &ModelConfig, train: &TrainConfig, dataset_checksum: &str, seeds: Vec<SeedResult>) -> Self {
        let tests: Vec<f64> = seeds.iter().filter_map(|s| s.test_metric).collect();
        let valids: Vec<f64> = seeds.iter().filter_map(|s| s.valid_metric).collect();
        let (test_mean, test_std) = mean_std(&tests).unzip();
        let (valid_mean, valid_std) = mean_std(&valids).unzip();
        EvalReport {
            metric: metric_name(model.task).to_string(),
            task: model.task.to_string(),
            split: train.split,
            config_digest: config_digest(&model.to_text()),
            dataset_checksum: dataset_checksum.to_string(),
            seeds,
            test_mean,
            test_std,
            valid_mean,
            valid_std,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `bytes` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), TrainError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_seed_artifacts(dir: &Path, model: &Mlfgnn, split: &DatasetSplit, outcome: &TrainOutcome, dataset: &Dataset, seed: u64) -> Result<(), TrainError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let meta = CheckpointMeta {
        task_names: dataset.task_names.clone(),
        scaler: outcome.scaler.clone(),
        seed,
        best_epoch: outcome.best_epoch,
    };
    let meta = serde_json::to_string(&meta).expect("metadata serializes");
    Checkpoint::from_store(&model.config.to_text(), &meta, &model.store).save(&dir.join("model.ckpt"))?;
    let manifest = serde_json::to_string_pretty(&split.manifest(&dataset.checksum)).expect("manifest serializes");
    write_atomic(&dir.join("split.json"), manifest.as_bytes())?;
    let mut log = String::new();
    for entry in &outcome.history {
        log.push_str(&serde_json::to_string(entry).expect("log serializes"));
        log.push('\n');
    }
    write_atomic(&dir.join("train_log.jsonl"), log.as_bytes())
}

pub fn multi_seed(data: &Prepared, dataset: &Dataset, model_config: &ModelConfig, train_config: &TrainConfig, out_dir: Option<&Path>) -> Result<EvalReport, TrainError> {
    multi_seed_with(data, dataset, model_config, train_config, out_dir, |_, _| {})
}

/// Trains one model per seed, in parallel. A random split is redrawn per
/// seed; a scaffold split is computed once and only initialization varies.
/// `on_seed` sees each trained model.
pub fn multi_seed_with<F>(data: &Prepared, dataset: &Dataset, model_config: &ModelConfig, train_config: &TrainConfig, out_dir: Option<&Path>, on_seed: F) -> Result<EvalReport, TrainError>
where
    F: Fn(&Mlfgnn, &TrainOutcome) + Sync,
{
    let mut errors = model_config.validate();
    errors.extend(train_config.validate());
    if model_config.task != train_config.task {
        errors.push(format!("model task {} differs from training task {}", model_config.task, train_config.task));
    }
    if !errors.is_empty() {
        return Err(TrainError::InvalidConfig(errors));
    }
    let fixed = match train_config.split {
        SplitMethod::Scaffold => Some(scaffold_split(dataset, train_config.seeds[0], train_config.fractions)?),
        SplitMethod::Random => None,
    };
    let results = train_config
        .seeds
        .par_iter()
        .map(|&seed| -> Result<SeedResult, TrainError> {
            let split = match &fixed {
                Some(s) => s.clone(),
                None => random_split(dataset, seed, train_config.fractions)?,
            };
            let mut model = Mlfgnn::new(model_config.clone(), seed)?;
            let outcome = train(&mut model, data, &split, train_config, seed)?;
            on_seed(&model, &outcome);
            let checkpoint = match out_dir {
                Some(out) => {
                    let rel = format!("seed_{seed}");
                    write_seed_artifacts(&out.join(&rel), &model, &split, &outcome, dataset, seed)?;
                    Some(format!("{rel}/model.ckpt"))
                }
                None => None,
            };
            Ok(SeedResult {
                seed,
                valid_metric: outcome.valid_metric,
                test_metric: outcome.test_metric,
                best_epoch: outcome.best_epoch,
                epochs_run: outcome.epochs_run,
                checkpoint,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::new(model_config, train_config, &dataset.checksum, results))
}
