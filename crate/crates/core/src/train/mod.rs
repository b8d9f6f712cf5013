//! Losses, metrics, the training loop and multi-seed orchestration.

mod loss;
mod metrics;
mod multi;
mod search;

pub use loss::{masked_loss, masked_loss_sum};
pub use metrics::{improves, mean_std, metric_name, rmse, roc_auc, task_metric, MetricError};
pub use multi::{multi_seed, multi_seed_with, write_atomic, CheckpointMeta, EvalReport, SeedResult};
pub use search::{random_search, sample_configs, SearchResult, SearchSpace};

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{sigmoid, AdError, Adam, CheckpointError, Tape, Tensor};
use crate::data::{DataError, Dataset, DatasetSplit, SplitMethod};
use crate::featurize::{FeaturizedMolecule, FingerprintConfig};
use crate::model::{parse_field, parse_key_values, Mlfgnn, ModelConfig, ModelError, ModelInput, TaskType, MODEL_KEYS};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("every label is missing")]
    AllMasked,
    #[error("model emits {expected} outputs but {found} labels were given")]
    LabelWidth { expected: usize, found: usize },
    #[error("non-finite {what} at epoch {epoch} (record {record}): {value}")]
    NonFiniteLoss {
        what: &'static str,
        epoch: usize,
        record: usize,
        value: f64,
    },
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("empty search space: {0}")]
    EmptySpace(String),
}

pub const TRAIN_KEYS: &[&str] = &["epochs", "lr", "batch_size", "seeds", "patience", "task", "split", "fractions"];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Molecules per optimizer step.
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    pub patience: usize,
    pub task: TaskType,
    pub split: SplitMethod,
    pub fractions: [f64; 3],
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            lr: 1e-3,
            batch_size: 32,
            seeds: vec![0],
            patience: 30,
            task: TaskType::Regression,
            split: SplitMethod::Random,
            fractions: [0.8, 0.1, 0.1],
        }
    }
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl TrainConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.epochs == 0 {
            errors.push("epochs must be at least 1".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            errors.push(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            errors.push("batch_size must be at least 1".into());
        }
        if self.seeds.is_empty() {
            errors.push("seeds must list at least one seed".into());
        }
        let s: f64 = self.fractions.iter().sum();
        if self.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (s - 1.0).abs() > 1e-9 {
            errors.push(format!("fractions must be non-negative and sum to 1, got {:?}", self.fractions));
        }
        errors
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        [
            ("epochs", self.epochs.to_string()),
            ("lr", self.lr.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("seeds", join(&self.seeds)),
            ("patience", self.patience.to_string()),
            ("task", self.task.to_string()),
            ("split", self.split.to_string()),
            ("fractions", join(&self.fractions)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Overrides fields from `map`; keys outside [`TRAIN_KEYS`] are ignored.
    pub fn apply_map(&mut self, map: &BTreeMap<String, String>) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        let e = &mut errors;
        for (key, value) in map {
            let v = value.as_str();
            match key.as_str() {
                "epochs" => self.epochs = parse_field(key, v, e).unwrap_or(self.epochs),
                "lr" => self.lr = parse_field(key, v, e).unwrap_or(self.lr),
                "batch_size" => self.batch_size = parse_field(key, v, e).unwrap_or(self.batch_size),
                "patience" => self.patience = parse_field(key, v, e).unwrap_or(self.patience),
                "task" => self.task = parse_field(key, v, e).unwrap_or(self.task),
                "split" => self.split = parse_field(key, v, e).unwrap_or(self.split),
                "seeds" => {
                    let parsed: Option<Vec<u64>> = v.split(',').map(|s| parse_field(key, s.trim(), e)).collect();
                    if let Some(s) = parsed {
                        self.seeds = s;
                    }
                }
                "fractions" => {
                    let parsed: Option<Vec<f64>> = v.split(',').map(|s| parse_field(key, s.trim(), e)).collect();
                    match parsed.as_deref() {
                        Some(&[a, b, c]) => self.fractions = [a, b, c],
                        Some(_) => e.push(format!("fractions: expected three values, got '{v}'")),
                        None => {}
                    }
                }
                _ => {}
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

/// Reads one `key=value` file holding both model and training keys.
/// Every problem is reported, not just the first.
pub fn parse_run_config(text: &str) -> Result<(ModelConfig, TrainConfig), Vec<String>> {
    let map = parse_key_values(text)?;
    let mut errors: Vec<String> = map
        .keys()
        .filter(|k| !MODEL_KEYS.contains(&k.as_str()) && !TRAIN_KEYS.contains(&k.as_str()))
        .map(|k| format!("unknown key '{k}'"))
        .collect();
    let mut model = ModelConfig::default();
    let mut train = TrainConfig::default();
    if let Err(e) = model.apply_map(&map) {
        errors.extend(e);
    }
    if let Err(e) = train.apply_map(&map) {
        errors.extend(e.into_iter().filter(|m| !m.starts_with("task:")));
    }
    if errors.is_empty() {
        Ok((model, train))
    } else {
        Err(errors)
    }
}

/// Per-task standardization of regression targets, fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl TargetScaler {
    pub fn identity(n_tasks: usize) -> Self {
        TargetScaler {
            mean: vec![0.0; n_tasks],
            std: vec![1.0; n_tasks],
        }
    }

    pub fn fit(labels: &[Vec<Option<f64>>], rows: &[usize], n_tasks: usize) -> Self {
        let mut s = TargetScaler::identity(n_tasks);
        for t in 0..n_tasks {
            let v: Vec<f64> = rows.iter().filter_map(|&i| labels[i][t]).collect();
            if v.is_empty() {
                continue;
            }
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt();
            s.mean[t] = m;
            s.std[t] = if sd > 1e-12 { sd } else { 1.0 };
        }
        s
    }

    pub fn scale(&self, labels: &[Option<f64>]) -> Vec<Option<f64>> {
        labels
            .iter()
            .enumerate()
            .map(|(t, l)| l.map(|y| (y - self.mean[t]) / self.std[t]))
            .collect()
    }

    pub fn unscale(&self, out: &[f64]) -> Vec<f64> {
        out.iter().enumerate().map(|(t, y)| self.mean[t] + self.std[t] * y).collect()
    }
}

/// Featurized inputs and labels of a dataset.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub inputs: Vec<ModelInput>,
    pub labels: Vec<Vec<Option<f64>>>,
    pub task: TaskType,
}

impl Prepared {
    pub fn new(dataset: &Dataset, fingerprints: &FingerprintConfig) -> Result<Self, ModelError> {
        let inputs = dataset
            .records
            .par_iter()
            .map(|r| ModelInput::new(&FeaturizedMolecule::new(&r.graph, fingerprints)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Prepared {
            inputs,
            labels: dataset.records.iter().map(|r| r.labels.clone()).collect(),
            task: dataset.task_type,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn n_tasks(&self) -> usize {
        self.labels.first().map_or(0, Vec::len)
    }
}

/// Model output for one molecule in label space: probabilities for
/// classification, unstandardized values for regression.
pub fn predict_one(model: &Mlfgnn, scaler: &TargetScaler, input: &ModelInput) -> Result<Vec<f64>, ModelError> {
    let raw = model.predict(input)?;
    Ok(match model.config.task {
        TaskType::Classification => raw.into_iter().map(sigmoid).collect(),
        TaskType::Regression => scaler.unscale(&raw),
    })
}

/// Metric of `model` over `rows`; `None` for an empty row set.
pub fn evaluate(model: &Mlfgnn, scaler: &TargetScaler, data: &Prepared, rows: &[usize]) -> Result<Option<f64>, TrainError> {
    if rows.is_empty() {
        return Ok(None);
    }
    let preds = rows
        .iter()
        .map(|&i| predict_one(model, scaler, &data.inputs[i]))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<_> = rows.iter().map(|&i| data.labels[i].clone()).collect();
    Ok(Some(task_metric(data.task, &preds, &labels)?))
}

fn try_evaluate(model: &Mlfgnn, scaler: &TargetScaler, data: &Prepared, rows: &[usize]) -> Result<Option<f64>, TrainError> {
    match evaluate(model, scaler, data, rows) {
        Err(TrainError::Metric(MetricError::SingleClass)) => Ok(None),
        other => other,
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_metric: Option<f64>,
    pub gate_alpha: Option<f64>,
    /// One entry per transformer layer.
    pub lambda_a: Vec<f64>,
    pub lambda_b: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub valid_metric: Option<f64>,
    pub test_metric: Option<f64>,
    /// True when selection fell back to the training metric (no usable validation rows).
    pub selected_on_train: bool,
    pub history: Vec<EpochLog>,
    pub scaler: TargetScaler,
}

pub fn train(model: &mut Mlfgnn, data: &Prepared, split: &DatasetSplit, config: &TrainConfig, seed: u64) -> Result<TrainOutcome, TrainError> {
    train_observed(model, data, split, config, seed, |_, _, _| true)
}

/// Training loop. `observer` sees every epoch after its update and may
/// return `false` to stop. On return the model holds the parameters of the
/// best-scoring epoch.
pub fn train_observed<F>(model: &mut Mlfgnn, data: &Prepared, split: &DatasetSplit, config: &TrainConfig, seed: u64, mut observer: F) -> Result<TrainOutcome, TrainError>
where
    F: FnMut(&EpochLog, &Mlfgnn, &TargetScaler) -> bool,
{
    let mut errors: Vec<String> = config.validate().into_iter().filter(|e| !e.starts_with("lr") && !e.starts_with("seeds")).collect();
    if !(config.lr.is_finite() && config.lr >= 0.0) {
        errors.push(format!("lr must be non-negative, got {}", config.lr));
    }
    if model.config.task != data.task {
        errors.push(format!("model task {} does not match data task {}", model.config.task, data.task));
    }
    if model.config.n_tasks != data.n_tasks() {
        errors.push(format!("model has {} outputs, data has {} tasks", model.config.n_tasks, data.n_tasks()));
    }
    if split.train.is_empty() {
        errors.push("training split is empty".into());
    }
    if !split.is_partition(data.len()) {
        errors.push("split does not partition the dataset".into());
    }
    if !errors.is_empty() {
        return Err(TrainError::InvalidConfig(errors));
    }

    let task = data.task;
    let scaler = match task {
        TaskType::Regression => TargetScaler::fit(&data.labels, &split.train, data.n_tasks()),
        TaskType::Classification => TargetScaler::identity(data.n_tasks()),
    };
    let targets: Vec<Vec<Option<f64>>> = data.labels.iter().map(|l| scaler.scale(l)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7a11);
    let mut adam = Adam::new(&model.store, config.lr);
    let mut order = split.train.clone();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Vec<Tensor>)> = None;
    let mut since_best = 0;
    let mut selected_on_train = false;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut loss_count = 0;
        for batch in order.chunks(config.batch_size) {
            model.store.zero_grads();
            let count: usize = batch.iter().map(|&i| targets[i].iter().flatten().count()).sum();
            if count == 0 {
                continue;
            }
            for &i in batch {
                let mut tape = Tape::training(ChaCha8Rng::seed_from_u64(rng.gen()));
                let out = model.forward(&mut tape, &data.inputs[i])?;
                let (sum, n) = match masked_loss_sum(&mut tape, out, &targets[i], task) {
                    Err(TrainError::AllMasked) => continue,
                    other => other?,
                };
                let value = tape.value(sum).item()?;
                if !value.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        what: "loss",
                        epoch,
                        record: i,
                        value,
                    });
                }
                loss_sum += value;
                loss_count += n;
                let scaled = tape.scale(sum, 1.0 / count as f64)?;
                tape.backward(scaled, &mut model.store)?;
            }
            if !model.store.grads_finite() {
                return Err(TrainError::NonFiniteLoss {
                    what: "gradient",
                    epoch,
                    record: batch[0],
                    value: f64::NAN,
                });
            }
            adam.step(&mut model.store);
        }

        let valid_metric = try_evaluate(model, &scaler, data, &split.valid)?;
        let score = match valid_metric {
            Some(v) => v,
            None => {
                if !selected_on_train {
                    log::warn!("no usable validation rows; selecting on the training metric");
                    selected_on_train = true;
                }
                evaluate(model, &scaler, data, &split.train)?.unwrap_or(f64::NAN)
            }
        };
        let lambdas = model.lambdas();
        let entry = EpochLog {
            epoch,
            train_loss: if loss_count > 0 { loss_sum / loss_count as f64 } else { f64::NAN },
            valid_metric,
            gate_alpha: model.gate_alpha(),
            lambda_a: lambdas.iter().map(|l| l.0).collect(),
            lambda_b: lambdas.iter().map(|l| l.1).collect(),
        };
        log::info!(
            "seed {seed} epoch {epoch}: loss {:.5} valid {:?}",
            entry.train_loss,
            entry.valid_metric
        );
        let improved = score.is_finite() && best.as_ref().map_or(true, |b| improves(task, score, b.0));
        if improved {
            let snapshot = model.store.ids().map(|id| model.store.value(id).clone()).collect();
            best = Some((score, epoch, snapshot));
            since_best = 0;
        } else {
            since_best += 1;
        }
        let keep_going = observer(&entry, model, &scaler);
        history.push(entry);
        if !keep_going || since_best >= config.patience.max(1) {
            break;
        }
    }

    let epochs_run = history.len();
    let best_epoch = match best {
        Some((_, epoch, snapshot)) => {
            let ids: Vec<_> = model.store.ids().collect();
            for (id, t) in ids.into_iter().zip(snapshot) {
                model.store.set_value(id, t)?;
            }
            epoch
        }
        None => epochs_run,
    };
    Ok(TrainOutcome {
        best_epoch,
        epochs_run,
        valid_metric: try_evaluate(model, &scaler, data, &split.valid)?,
        test_metric: try_evaluate(model, &scaler, data, &split.test)?,
        selected_on_train,
        history,
        scaler,
    })
}
