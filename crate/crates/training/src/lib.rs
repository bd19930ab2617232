//! Training loop: combined objective, AdamW, stream-count sampling, the
//! two-phase schedule (plain autoencoder warmup, then quantized training),
//! and the synthetic corpus generator.

pub mod config;
pub mod data;
pub mod error;
pub mod optimizer;
pub mod trainer;

pub use config::TrainConfig;
pub use data::synth_corpus;
pub use error::TrainError;
pub use optimizer::{global_grad_norm, AdamW};
pub use trainer::{
    prepare_items, run_schedule, toy_mel_scales, HistoryRow, StepStats, TrainHistory, TrainItem,
    Trainer,
};
