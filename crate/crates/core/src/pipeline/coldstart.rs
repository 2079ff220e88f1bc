use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::config::TrainConfig;
use super::dataset::InteractionDataset;
use super::eval::{evaluate_embeddings, inference_embeddings, RankingMetrics};
use super::report::{EvalReport, ReportRow, ReportTable};
use super::train::{finetune, pretrain};

const COLD_STREAM: u64 = 0x636f_6c64;

/// Sorted set of `round(ratio * num_users)` cold-start users, at least one.
pub fn select_cold_users(num_users: usize, ratio: f64, seed: u64) -> Result<Vec<usize>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!("cold-start ratio must lie in (0, 1), got {ratio}")));
    }
    let count = ((num_users as f64 * ratio).round() as usize).max(1);
    if count >= num_users {
        return Err(Error::InvalidInput(format!(
            "cold-start ratio {ratio} leaves no warm users out of {num_users}"
        )));
    }
    let mut users: Vec<usize> = (0..num_users).collect();
    users.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ COLD_STREAM));
    users.truncate(count);
    users.sort_unstable();
    Ok(users)
}

/// Trains without the cold users' interactions (their auxiliary memberships
/// stay), then feeds the removed edges back in only for inference.
pub fn cold_start_metrics(
    dataset: &InteractionDataset,
    config: &TrainConfig,
    cold_users: &[usize],
    with_auxiliary: bool,
) -> Result<RankingMetrics> {
    let is_cold = {
        let mut flags = vec![false; dataset.num_users];
        for &u in cold_users {
            flags[u] = true;
        }
        flags
    };
    let warm_train: Vec<(usize, usize)> = dataset.train_edges.iter().copied().filter(|&(u, _)| !is_cold[u]).collect();
    if warm_train.is_empty() {
        return Err(Error::InvalidInput("no warm training interactions remain".into()));
    }
    let warm = InteractionDataset {
        train_edges: warm_train,
        auxiliary_tasks: if with_auxiliary {
            dataset.auxiliary_tasks.clone()
        } else {
            Vec::new()
        },
        ..dataset.clone()
    };
    let table = pretrain(&warm, config)?;
    let table = finetune(table, &warm, config)?;
    let (fu, fi) = inference_embeddings(&table, &dataset.train_edges)?;
    evaluate_embeddings(
        &fu,
        &fi,
        &dataset.train_items_by_user(),
        &dataset.test_items_by_user(),
        &config.eval_ks,
        Some(cold_users),
    )
}

/// Cold-start comparison of training with and without auxiliary tasks.
pub fn cold_start_eval(dataset: &InteractionDataset, config: &TrainConfig, ratio: f64) -> Result<EvalReport> {
    config.validate()?;
    let cold = select_cold_users(dataset.num_users, ratio, config.seed)?;
    let (full, no_aux) = rayon::join(
        || cold_start_metrics(dataset, config, &cold, true),
        || cold_start_metrics(dataset, config, &cold, false),
    );
    let mut report = EvalReport::new(config);
    report.tables.push(ReportTable {
        title: format!("cold_start_{:.0}pct", ratio * 100.0),
        cold_start_ratio: Some(ratio),
        rows: vec![
            ReportRow {
                label: "full".into(),
                metrics: full?,
            },
            ReportRow {
                label: "no_auxiliary".into(),
                metrics: no_aux?,
            },
        ],
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_is_seeded_and_sized() {
        let a = select_cold_users(50, 0.2, 7).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a, select_cold_users(50, 0.2, 7).unwrap());
        assert_ne!(a, select_cold_users(50, 0.2, 8).unwrap());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn selection_rejects_degenerate_ratios() {
        assert!(select_cold_users(10, 0.0, 0).is_err());
        assert!(select_cold_users(10, 1.0, 0).is_err());
        assert!(select_cold_users(2, 0.9, 0).is_err());
    }
}
