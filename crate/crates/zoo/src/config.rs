//! Zoo build configuration with desk- and paper-scale presets.

use formal_lang::DatasetLanguageSpec;
use serde::{Deserialize, Serialize};

use crate::split::desk_language_pool;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ZooConfig {
    pub num_models: usize,
    pub steps: u64,
    pub batch_size: usize,
    pub weight_decay: f64,
    /// Piecewise-linear learning-rate knots (step, value).
    pub lr_knots: Vec<(u64, f64)>,
    pub checkpoint_steps: Vec<u64>,
    pub rollouts_per_checkpoint: usize,
    /// Rollouts sampled per checkpoint to estimate generation accuracy.
    pub accuracy_samples: usize,
    pub seed: u64,
    pub hidden: usize,
    pub layers: usize,
    pub total_len: usize,
    /// Language pool tasks are drawn from; `None` means the full
    /// 216-language grid.
    pub language_pool: Option<Vec<DatasetLanguageSpec>>,
}

impl ZooConfig {
    /// Desk scale: minutes, not hours. 64 models over a fixed
    /// 12-language pool, 2000 steps, schedule knots rescaled by 1/10.
    pub fn desk(seed: u64) -> Self {
        Self {
            num_models: 64,
            steps: 2000,
            batch_size: 32,
            weight_decay: 1e-4,
            lr_knots: vec![(0, 0.01), (1000, 0.003), (2000, 0.0003)],
            checkpoint_steps: vec![0, 100, 200, 500, 1000, 2000],
            rollouts_per_checkpoint: 16,
            accuracy_samples: 100,
            seed,
            hidden: 32,
            layers: 2,
            total_len: 42,
            language_pool: Some(desk_language_pool()),
        }
    }

    /// Full published scale.
    pub fn paper(seed: u64) -> Self {
        Self {
            num_models: 1000,
            steps: 20_000,
            batch_size: 32,
            weight_decay: 1e-4,
            lr_knots: vec![(0, 0.01), (10_000, 0.003), (20_000, 0.0003)],
            checkpoint_steps: vec![0, 100, 200, 500, 1000, 2000, 5000, 10_000, 20_000],
            rollouts_per_checkpoint: 100,
            accuracy_samples: 100,
            seed,
            hidden: 32,
            layers: 2,
            total_len: 42,
            language_pool: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.checkpoint_steps.is_empty() {
            return Err("checkpoint_steps must not be empty".into());
        }
        if self.checkpoint_steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err("checkpoint_steps must be strictly ascending".into());
        }
        if *self.checkpoint_steps.last().unwrap() != self.steps {
            return Err(format!(
                "last checkpoint step {} must equal steps {}",
                self.checkpoint_steps.last().unwrap(),
                self.steps
            ));
        }
        if let Some(pool) = &self.language_pool {
            if pool.is_empty() {
                return Err("language pool must not be empty".into());
            }
        }
        if self.num_models == 0 || self.batch_size == 0 {
            return Err("num_models and batch_size must be positive".into());
        }
        Ok(())
    }

    pub fn pool(&self) -> Vec<DatasetLanguageSpec> {
        match &self.language_pool {
            Some(p) => p.clone(),
            None => DatasetLanguageSpec::grid(),
        }
    }
}
