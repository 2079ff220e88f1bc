//! Pretraining, finetuning, evaluation and the experiment protocols built on them.

pub mod ablation;
pub mod coldstart;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod report;
pub mod sampling;
pub mod synth;
pub mod train;

pub use ablation::{run_ablation, LOSS_GRID};
pub use coldstart::cold_start_eval;
pub use config::TrainConfig;
pub use dataset::{split_interactions, DatasetStats, InteractionDataset, RawDataset};
pub use eval::{evaluate, RankingMetrics};
pub use report::{EvalReport, ReportRow, ReportTable};
pub use synth::{generate_synthetic, generate_synthetic_dataset, SyntheticConfig};
pub use train::{finetune, pretrain, TrainLog};
