use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::model::{ModelConfig, TaskType};

use super::{multi_seed, EvalReport, Prepared, TrainConfig, TrainError};

/// Inclusive ranges for the searched hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub transformer_layers: (usize, usize),
    pub heads: (usize, usize),
    pub head_dim: (usize, usize),
    pub gat_out_dim: (usize, usize),
    pub dropout_gat: (f64, f64),
    pub dropout_ffn: (f64, f64),
    pub dropout_attn: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            transformer_layers: (1, 3),
            heads: (1, 4),
            head_dim: (4, 16),
            gat_out_dim: (16, 64),
            dropout_gat: (0.0, 0.3),
            dropout_ffn: (0.0, 0.3),
            dropout_attn: (0.0, 0.3),
        }
    }
}

impl SearchSpace {
    fn check(&self) -> Result<(), TrainError> {
        for (name, (lo, hi)) in [
            ("transformer_layers", self.transformer_layers),
            ("heads", self.heads),
            ("head_dim", self.head_dim),
            ("gat_out_dim", self.gat_out_dim),
        ] {
            if lo > hi || hi == 0 {
                return Err(TrainError::EmptySpace(format!("{name} range {lo}..={hi}")));
            }
        }
        for (name, (lo, hi)) in [
            ("dropout_gat", self.dropout_gat),
            ("dropout_ffn", self.dropout_ffn),
            ("dropout_attn", self.dropout_attn),
        ] {
            if !(lo <= hi && lo >= 0.0 && hi < 1.0) {
                return Err(TrainError::EmptySpace(format!("{name} range {lo}..={hi}")));
            }
        }
        Ok(())
    }
}

/// `budget` configurations drawn uniformly from `space`, other fields from `base`.
pub fn sample_configs(space: &SearchSpace, base: &ModelConfig, budget: usize, seed: u64) -> Result<Vec<ModelConfig>, TrainError> {
    space.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let int = |r: (usize, usize), rng: &mut ChaCha8Rng| rng.gen_range(r.0.max(1)..=r.1);
    let real = |r: (f64, f64), rng: &mut ChaCha8Rng| if r.0 == r.1 { r.0 } else { rng.gen_range(r.0..r.1) };
    let mut out = Vec::with_capacity(budget);
    for _ in 0..budget {
        let mut c = base.clone();
        c.transformer_layers = int(space.transformer_layers, &mut rng);
        c.heads = int(space.heads, &mut rng);
        c.head_dim = int(space.head_dim, &mut rng);
        c.hidden_dim = c.heads * c.head_dim;
        c.gat_out_dim = int(space.gat_out_dim, &mut rng);
        c.dropout_gat = real(space.dropout_gat, &mut rng);
        c.dropout_ffn = real(space.dropout_ffn, &mut rng);
        c.dropout_attn = real(space.dropout_attn, &mut rng);
        out.push(c);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub config: ModelConfig,
    pub report: EvalReport,
}

impl SearchResult {
    pub fn score(&self) -> Option<f64> {
        self.report.valid_mean
    }
}

/// Samples and trains `budget` configurations, best mean validation metric first.
pub fn random_search(space: &SearchSpace, base: &ModelConfig, data: &Prepared, dataset: &Dataset, train_config: &TrainConfig, budget: usize, seed: u64) -> Result<Vec<SearchResult>, TrainError> {
    let mut results = Vec::new();
    for config in sample_configs(space, base, budget, seed)? {
        let report = multi_seed(data, dataset, &config, train_config, None)?;
        results.push(SearchResult { config, report });
    }
    rank(&mut results, base.task);
    Ok(results)
}

pub(crate) fn rank(results: &mut [SearchResult], task: TaskType) {
    results.sort_by(|a, b| match (a.score(), b.score()) {
        (Some(x), Some(y)) => match task {
            TaskType::Regression => x.total_cmp(&y),
            TaskType::Classification => y.total_cmp(&x),
        },
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    });
}
