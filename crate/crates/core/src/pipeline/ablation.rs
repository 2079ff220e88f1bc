use rayon::prelude::*;

use crate::error::Result;
use crate::losses::LossKind;
use crate::model::TaVariant;

use super::config::TrainConfig;
use super::dataset::InteractionDataset;
use super::eval::{evaluate, RankingMetrics};
use super::report::{EvalReport, ReportRow, ReportTable};
use super::train::{finetune, pretrain};

/// (pretraining loss, finetuning loss) cells of the loss grid, in report order.
pub const LOSS_GRID: [(LossKind, LossKind); 10] = [
    (LossKind::Bpr, LossKind::Bpr),
    (LossKind::BprPos, LossKind::BprPos),
    (LossKind::Au, LossKind::Au),
    (LossKind::Alignment, LossKind::Alignment),
    (LossKind::Bpr, LossKind::BprPos),
    (LossKind::Bpr, LossKind::Au),
    (LossKind::Bpr, LossKind::Alignment),
    (LossKind::BprPos, LossKind::Bpr),
    (LossKind::Au, LossKind::Bpr),
    (LossKind::Alignment, LossKind::Bpr),
];

pub fn loss_cell_label(pretrain: LossKind, finetune: LossKind) -> String {
    let short = |k: LossKind| match k {
        LossKind::Alignment => "Align.",
        LossKind::Bpr => "BPR",
        LossKind::BprPos => "BPRpos",
        LossKind::Au => "AU",
    };
    format!("({}, {})", short(pretrain), short(finetune))
}

/// Pretrain, finetune and evaluate under one configuration.
pub fn run_cell(dataset: &InteractionDataset, config: &TrainConfig) -> Result<RankingMetrics> {
    let table = pretrain(dataset, config)?;
    let table = finetune(table, dataset, config)?;
    evaluate(&table, dataset, &config.eval_ks)
}

/// TA-variant grid and loss-combination grid, every cell under the same seed.
pub fn run_ablation(dataset: &InteractionDataset, config: &TrainConfig) -> Result<EvalReport> {
    config.validate()?;
    let variant_cells: Vec<(String, TrainConfig)> = TaVariant::ALL
        .iter()
        .map(|&v| {
            (
                v.label().to_string(),
                TrainConfig {
                    ta_variant: v,
                    ..config.clone()
                },
            )
        })
        .collect();
    let loss_cells: Vec<(String, TrainConfig)> = LOSS_GRID
        .iter()
        .map(|&(p, f)| {
            (
                loss_cell_label(p, f),
                TrainConfig {
                    pretrain_loss: p,
                    finetune_loss: f,
                    ..config.clone()
                },
            )
        })
        .collect();
    let mut report = EvalReport::new(config);
    for (title, cells) in [("ta_variants", variant_cells), ("loss_combinations", loss_cells)] {
        let results: Vec<Result<RankingMetrics>> = cells.par_iter().map(|(_, cfg)| run_cell(dataset, cfg)).collect();
        let mut rows = Vec::with_capacity(cells.len());
        for ((label, _), metrics) in cells.into_iter().zip(results) {
            rows.push(ReportRow { label, metrics: metrics? });
        }
        report.tables.push(ReportTable {
            title: title.to_string(),
            cold_start_ratio: None,
            rows,
        });
    }
    Ok(report)
}
