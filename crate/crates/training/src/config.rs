//! Training hyperparameters and their text-config plumbing.

use crate::error::TrainError;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight on the multi-scale log-mel loss.
    pub lambda_mel: f64,
    /// Weight on the complex-spectrum MSE.
    pub lambda_stft: f64,
    /// Commitment weight inside the quantizer objective.
    pub beta: f64,
    pub lr: f64,
    pub weight_decay: f64,
    /// Probability of sampling a reduced stream count for a step.
    pub stream_drop_p: f64,
    /// Global gradient-norm ceiling.
    pub grad_clip: f64,
    pub total_steps: usize,
    /// Steps spent as a plain autoencoder before the quantizers activate.
    pub pretrain_steps: usize,
    pub batch_size: usize,
    /// Steps per utilization window in the history.
    pub util_window: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_mel: 0.25,
            lambda_stft: 1.0,
            beta: 0.25,
            lr: 1e-4,
            weight_decay: 1e-2,
            stream_drop_p: 0.75,
            grad_clip: 10.0,
            total_steps: 2000,
            pretrain_steps: 500,
            batch_size: 8,
            util_window: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Applies one `key = value` override; Ok(false) means the key is not
    /// a training key.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<bool, TrainError> {
        let bad = |k: &str, v: &str| TrainError::InvalidConfig(format!("bad value {v:?} for {k}"));
        let f = |v: &str, k: &str| v.parse::<f64>().map_err(|_| bad(k, v));
        let u = |v: &str, k: &str| v.parse::<usize>().map_err(|_| bad(k, v));
        match key {
            "lambda_mel" => self.lambda_mel = f(value, key)?,
            "lambda_stft" => self.lambda_stft = f(value, key)?,
            "beta" => self.beta = f(value, key)?,
            "lr" => self.lr = f(value, key)?,
            "weight_decay" => self.weight_decay = f(value, key)?,
            "stream_drop_p" => self.stream_drop_p = f(value, key)?,
            "grad_clip" => self.grad_clip = f(value, key)?,
            "total_steps" => self.total_steps = u(value, key)?,
            "pretrain_steps" => self.pretrain_steps = u(value, key)?,
            "batch_size" => self.batch_size = u(value, key)?,
            "util_window" => self.util_window = u(value, key)?,
            "seed" => self.seed = value.parse::<u64>().map_err(|_| bad(key, value))?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be positive".into()));
        }
        if self.total_steps == 0 {
            return Err(TrainError::InvalidConfig("total_steps must be positive".into()));
        }
        if self.pretrain_steps > self.total_steps {
            return Err(TrainError::InvalidConfig(format!(
                "pretrain_steps {} exceeds total_steps {}",
                self.pretrain_steps, self.total_steps
            )));
        }
        if !(0.0..=1.0).contains(&self.stream_drop_p) {
            return Err(TrainError::InvalidConfig("stream_drop_p must be in [0, 1]".into()));
        }
        if self.util_window == 0 {
            return Err(TrainError::InvalidConfig("util_window must be positive".into()));
        }
        Ok(())
    }
}
