use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{dot, EmbeddingMatrix};
use crate::model::EmbeddingTable;

use super::dataset::{items_by_user, rec_graphs, InteractionDataset};

/// Mean Recall@K and NDCG@K over evaluated users, one entry per K.
#[derive(Clone, Debug, PartialEq)]
pub struct RankingMetrics {
    pub ks: Vec<usize>,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub users_evaluated: usize,
}

impl RankingMetrics {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|p| self.recall[p])
    }

    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|p| self.ndcg[p])
    }
}

/// Top-`k` unmasked items by descending score, ties broken by ascending index.
/// `masked` must be sorted.
pub fn rank_items(scores: &[f64], masked: &[usize], k: usize) -> Vec<usize> {
    let mut candidates: Vec<usize> = (0..scores.len()).filter(|i| masked.binary_search(i).is_err()).collect();
    let order = |a: &usize, b: &usize| -> Ordering { scores[*b].total_cmp(&scores[*a]).then(a.cmp(b)) };
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k, order);
        candidates.truncate(k);
    }
    candidates.sort_by(order);
    candidates
}

/// `|top-k ∩ test| / |test|`. `test` must be sorted and non-empty.
pub fn recall_at_k(ranked: &[usize], test: &[usize], k: usize) -> f64 {
    let hits = ranked.iter().take(k).filter(|i| test.binary_search(i).is_ok()).count();
    hits as f64 / test.len() as f64
}

/// Binary-relevance NDCG with the ideal DCG over `min(k, |test|)` positions.
pub fn ndcg_at_k(ranked: &[usize], test: &[usize], k: usize) -> f64 {
    let discount = |rank: usize| 1.0 / ((rank + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| test.binary_search(i).is_ok())
        .map(|(r, _)| discount(r))
        .sum();
    let idcg: f64 = (0..k.min(test.len())).map(discount).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Inference embeddings: one plain convolution on the recommendation graphs.
pub fn inference_embeddings(
    table: &EmbeddingTable,
    train_edges: &[(usize, usize)],
) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    let (ug, ig) = rec_graphs(table.num_users(), table.num_items(), train_edges)?;
    Ok((ug.convolve(&table.user_emb)?, ig.convolve(&table.item_emb)?))
}

/// Ranks all items for each user in `users` (or every user with a test item)
/// and averages the metrics. Per-user work runs in parallel; the reduction
/// is sequential in user order.
pub fn evaluate_embeddings(
    user_rows: &EmbeddingMatrix,
    item_rows: &EmbeddingMatrix,
    train_by_user: &[Vec<usize>],
    test_by_user: &[Vec<usize>],
    ks: &[usize],
    users: Option<&[usize]>,
) -> Result<RankingMetrics> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidConfig("evaluation needs at least one K >= 1".into()));
    }
    let candidates: Vec<usize> = match users {
        Some(u) => u.to_vec(),
        None => (0..user_rows.rows()).collect(),
    };
    let evaluated: Vec<usize> = candidates.into_iter().filter(|&u| !test_by_user[u].is_empty()).collect();
    if evaluated.is_empty() {
        return Err(Error::InvalidInput("no user has a test interaction".into()));
    }
    let max_k = *ks.iter().max().expect("non-empty");
    let per_user: Vec<(Vec<f64>, Vec<f64>)> = evaluated
        .par_iter()
        .map(|&u| {
            let urow = user_rows.row(u);
            let scores: Vec<f64> = item_rows.iter_rows().map(|irow| dot(urow, irow)).collect();
            let ranked = rank_items(&scores, &train_by_user[u], max_k);
            let test = &test_by_user[u];
            (
                ks.iter().map(|&k| recall_at_k(&ranked, test, k)).collect(),
                ks.iter().map(|&k| ndcg_at_k(&ranked, test, k)).collect(),
            )
        })
        .collect();
    let n = evaluated.len() as f64;
    let mut recall = vec![0.0; ks.len()];
    let mut ndcg = vec![0.0; ks.len()];
    for (r, g) in &per_user {
        for p in 0..ks.len() {
            recall[p] += r[p];
            ndcg[p] += g[p];
        }
    }
    Ok(RankingMetrics {
        ks: ks.to_vec(),
        recall: recall.into_iter().map(|x| x / n).collect(),
        ndcg: ndcg.into_iter().map(|x| x / n).collect(),
        users_evaluated: evaluated.len(),
    })
}

pub fn evaluate(table: &EmbeddingTable, dataset: &InteractionDataset, ks: &[usize]) -> Result<RankingMetrics> {
    let (fu, fi) = inference_embeddings(table, &dataset.train_edges)?;
    evaluate_embeddings(
        &fu,
        &fi,
        &dataset.train_items_by_user(),
        &dataset.test_items_by_user(),
        ks,
        None,
    )
}

/// Expected Recall@K of a uniformly random ranking of each user's
/// non-training items, averaged over users with test items.
pub fn random_recall_baseline(dataset: &InteractionDataset, k: usize) -> f64 {
    let train = dataset.train_items_by_user();
    let test = items_by_user(dataset.num_users, &dataset.test_edges);
    let values: Vec<f64> = (0..dataset.num_users)
        .filter(|&u| !test[u].is_empty())
        .map(|u| {
            let candidates = dataset.num_items - train[u].len();
            k.min(candidates) as f64 / candidates as f64
        })
        .collect();
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

/// `|test_u| / |I|` averaged over users with test items.
pub fn test_density_baseline(dataset: &InteractionDataset) -> f64 {
    let test = items_by_user(dataset.num_users, &dataset.test_edges);
    let values: Vec<f64> = test
        .iter()
        .filter(|t| !t.is_empty())
        .map(|t| t.len() as f64 / dataset.num_items as f64)
        .collect();
    values.iter().sum::<f64>() / values.len().max(1) as f64
}
