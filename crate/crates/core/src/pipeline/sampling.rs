//! Minibatch construction and uniform negative sampling.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::Model;
use crate::objective::{AuxBatch, Batch, RecBatch};

/// Draws uniformly from `0..universe` minus the sorted `excluded` set.
/// Returns `None` when every candidate is excluded.
pub fn sample_excluding(rng: &mut ChaCha8Rng, universe: usize, excluded: &[usize]) -> Option<usize> {
    debug_assert!(excluded.windows(2).all(|w| w[0] < w[1]));
    let allowed = universe.saturating_sub(excluded.len());
    if allowed == 0 {
        return None;
    }
    if excluded.len() * 2 <= universe {
        loop {
            let c = rng.random_range(0..universe);
            if excluded.binary_search(&c).is_err() {
                return Some(c);
            }
        }
    }
    // dense exclusion: index directly into the complement
    let mut k = rng.random_range(0..allowed);
    let mut prev = 0;
    for &x in excluded {
        let gap = x - prev;
        if k < gap {
            return Some(prev + k);
        }
        k -= gap;
        prev = x + 1;
    }
    Some(prev + k)
}

/// Shuffled examples for one training stage, split into the same number of
/// batches for every task.
pub struct EpochPlan {
    pub rec_pairs: Vec<(usize, usize)>,
    /// Per auxiliary task: `(node, hyperedge)` memberships.
    pub aux_memberships: Vec<Vec<(usize, usize)>>,
    pub num_batches: usize,
}

impl EpochPlan {
    pub fn new(
        rng: &mut ChaCha8Rng,
        rec_pairs: &[(usize, usize)],
        aux_memberships: &[Vec<(usize, usize)>],
        batch_size: usize,
    ) -> Self {
        let mut pairs = rec_pairs.to_vec();
        pairs.shuffle(rng);
        let aux: Vec<_> = aux_memberships
            .iter()
            .map(|m| {
                let mut m = m.clone();
                m.shuffle(rng);
                m
            })
            .collect();
        Self {
            num_batches: pairs.len().div_ceil(batch_size).max(1),
            rec_pairs: pairs,
            aux_memberships: aux,
        }
    }

    fn chunk<T>(items: &[T], b: usize, n: usize) -> &[T] {
        &items[b * items.len() / n..(b + 1) * items.len() / n]
    }

    /// Assembles batch `b`, sampling negatives for every positive.
    pub fn batch(
        &self,
        b: usize,
        rng: &mut ChaCha8Rng,
        model: &Model<'_>,
        train_items: &[Vec<usize>],
        negatives: usize,
        rec_negatives: bool,
    ) -> Batch {
        let pairs = Self::chunk(&self.rec_pairs, b, self.num_batches).to_vec();
        let num_items = model.num_items();
        let rec_negs = pairs
            .iter()
            .map(|&(u, _)| {
                if !rec_negatives {
                    return Vec::new();
                }
                (0..negatives)
                    .filter_map(|_| sample_excluding(rng, num_items, &train_items[u]))
                    .collect()
            })
            .collect();
        let aux = model
            .aux
            .iter()
            .enumerate()
            .map(|(t, task)| {
                let chunk = Self::chunk(&self.aux_memberships[t], b, self.num_batches);
                if model.is_encoded(t) {
                    let mut triples = Vec::with_capacity(chunk.len() * negatives);
                    for &(v, pos) in chunk {
                        for _ in 0..negatives {
                            let excluded = task.graph.edges_of(v);
                            if let Some(neg) = sample_excluding(rng, task.graph.num_hyperedges(), excluded) {
                                triples.push((v, pos, neg));
                            }
                        }
                    }
                    AuxBatch::Ranking(triples)
                } else {
                    AuxBatch::Classification(chunk.to_vec())
                }
            })
            .collect();
        Batch {
            rec: RecBatch {
                pairs,
                negatives: rec_negs,
            },
            aux,
        }
    }
}
