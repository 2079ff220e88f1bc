use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::model::{EmbeddingTable, Model, ModelConfig, Params, TaConfig, TaVariant};
use crate::objective::Objective;

use super::config::TrainConfig;
use super::dataset::InteractionDataset;
use super::sampling::EpochPlan;

const PRETRAIN_STREAM: u64 = 0x7072_6574_7261_696e;
const FINETUNE_STREAM: u64 = 0x6669_6e65_7475_6e65;

/// Extremes over every attention vector produced during training.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttentionStats {
    pub vectors: usize,
    pub max_sum_error: f64,
    pub min_weight: f64,
}

impl Default for AttentionStats {
    fn default() -> Self {
        Self {
            vectors: 0,
            max_sum_error: 0.0,
            min_weight: f64::INFINITY,
        }
    }
}

impl AttentionStats {
    fn record<'a>(&mut self, alphas: impl Iterator<Item = &'a [f64]>) {
        for alpha in alphas {
            self.vectors += 1;
            let sum: f64 = alpha.iter().sum();
            self.max_sum_error = self.max_sum_error.max((sum - 1.0).abs());
            for &a in alpha {
                self.min_weight = self.min_weight.min(a);
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub attention: AttentionStats,
}

/// Joint multitask pretraining from a freshly initialized table.
pub fn pretrain(dataset: &InteractionDataset, config: &TrainConfig) -> Result<EmbeddingTable> {
    pretrain_with_log(dataset, config).map(|(table, _)| table)
}

pub fn pretrain_with_log(dataset: &InteractionDataset, config: &TrainConfig) -> Result<(EmbeddingTable, TrainLog)> {
    config.validate()?;
    let table = EmbeddingTable::init(dataset.num_users, dataset.num_items, config.dim, config.seed)?;
    pretrain_from(table, dataset, config)
}

/// Joint multitask pretraining starting from `table`.
pub fn pretrain_from(
    table: EmbeddingTable,
    dataset: &InteractionDataset,
    config: &TrainConfig,
) -> Result<(EmbeddingTable, TrainLog)> {
    config.validate()?;
    let (user_graph, item_graph) = dataset.rec_graphs()?;
    let model = Model::new(&user_graph, &item_graph, &dataset.auxiliary_tasks, config.model_config())?;
    check_table(&table, dataset, config)?;
    let params = model.init_params(table, config.seed)?;
    let objective = config.pretrain_objective()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ PRETRAIN_STREAM);
    let (params, log) = run(&model, &objective, params, dataset, config, config.epochs_pretrain, &mut rng)?;
    Ok((params.table, log))
}

/// Finetunes the embeddings through one plain convolution layer on the
/// recommendation hypergraphs, with a fresh optimizer.
pub fn finetune(pretrained: EmbeddingTable, dataset: &InteractionDataset, config: &TrainConfig) -> Result<EmbeddingTable> {
    finetune_with_log(pretrained, dataset, config).map(|(table, _)| table)
}

pub fn finetune_with_log(
    pretrained: EmbeddingTable,
    dataset: &InteractionDataset,
    config: &TrainConfig,
) -> Result<(EmbeddingTable, TrainLog)> {
    config.validate()?;
    check_table(&pretrained, dataset, config)?;
    let (user_graph, item_graph) = dataset.rec_graphs()?;
    let model = Model::new(&user_graph, &item_graph, &[], finetune_model_config())?;
    let params = model.init_params(pretrained, config.seed)?;
    let objective = config.finetune_objective()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ FINETUNE_STREAM);
    let (params, log) = run(&model, &objective, params, dataset, config, config.epochs_finetune, &mut rng)?;
    Ok((params.table, log))
}

/// Finetuning baseline without pretraining: same initialization and budget.
pub fn finetune_from_scratch(dataset: &InteractionDataset, config: &TrainConfig) -> Result<EmbeddingTable> {
    config.validate()?;
    let table = EmbeddingTable::init(dataset.num_users, dataset.num_items, config.dim, config.seed)?;
    finetune(table, dataset, config)
}

fn finetune_model_config() -> ModelConfig {
    ModelConfig {
        ta: TaConfig {
            gamma: 0.0,
            num_layers: 1,
            variant: TaVariant::NoTa,
        },
        aux_layers: 1,
        unified_attributes: true,
    }
}

fn check_table(table: &EmbeddingTable, dataset: &InteractionDataset, config: &TrainConfig) -> Result<()> {
    if table.dim() != config.dim {
        return Err(Error::DimensionMismatch {
            context: "embedding dimension",
            expected: config.dim,
            actual: table.dim(),
        });
    }
    if table.num_users() != dataset.num_users || table.num_items() != dataset.num_items {
        return Err(Error::DimensionMismatch {
            context: "embedding table rows",
            expected: dataset.num_users + dataset.num_items,
            actual: table.num_users() + table.num_items(),
        });
    }
    Ok(())
}

fn run(
    model: &Model<'_>,
    objective: &Objective,
    mut params: Params,
    dataset: &InteractionDataset,
    config: &TrainConfig,
    epochs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Params, TrainLog)> {
    let mut log = TrainLog::default();
    if epochs == 0 {
        return Ok((params, log));
    }
    if dataset.train_edges.is_empty() {
        return Err(Error::InvalidInput("no training interactions".into()));
    }
    let train_items = dataset.train_items_by_user();
    let memberships: Vec<Vec<(usize, usize)>> = model.aux.iter().map(|t| t.graph.memberships()).collect();
    let mut adam = AdamState::new(config.adam(), &params);
    let rec_negatives = objective.rec_loss.uses_negatives();
    for epoch in 0..epochs {
        let plan = EpochPlan::new(rng, &dataset.train_edges, &memberships, config.batch_size);
        let mut total = 0.0;
        for b in 0..plan.num_batches {
            let batch = plan.batch(b, rng, model, &train_items, config.negatives_per_positive, rec_negatives);
            let (breakdown, tape, acts) = objective.loss_and_grad(model, &params, &batch)?;
            let loss = breakdown.total();
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: b });
            }
            log.attention.record(acts.attention_weights());
            adam.step(&tape, &mut params)?;
            total += loss;
        }
        let mean = total / plan.num_batches as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        log.epoch_losses.push(mean);
    }
    Ok((params, log))
}
