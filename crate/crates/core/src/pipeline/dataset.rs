use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::tasks::{build_recommendation_hypergraphs, TaskHypergraph, TaskKind};

/// Counts in the shape of the usual dataset-statistics table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub user_item_edges: usize,
    pub auxiliary_tasks: usize,
    /// Total `(node, value)` attribute records after deduplication.
    pub node_attributes: usize,
    /// Total relation hyperedges across relation tasks.
    pub homogeneous_edges: usize,
    pub skipped_relations: usize,
}

impl DatasetStats {
    pub fn compute(num_users: usize, num_items: usize, edges: usize, tasks: &[TaskHypergraph]) -> Self {
        let mut stats = DatasetStats {
            users: num_users,
            items: num_items,
            user_item_edges: edges,
            auxiliary_tasks: tasks.len(),
            ..Default::default()
        };
        for t in tasks {
            match t.kind {
                TaskKind::AttributePrediction => stats.node_attributes += t.graph.nnz(),
                TaskKind::RelationPrediction => stats.homogeneous_edges += t.graph.num_hyperedges(),
                TaskKind::Recommendation => {}
            }
        }
        stats
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("# users", self.users),
            ("# items", self.items),
            ("# user-item edges", self.user_item_edges),
            ("# auxiliary tasks", self.auxiliary_tasks),
            ("# node attributes", self.node_attributes),
            ("# homogeneous edges", self.homogeneous_edges),
        ];
        for (label, value) in rows {
            writeln!(f, "{label:<22}{value:>12}")?;
        }
        if self.skipped_relations > 0 {
            writeln!(f, "{:<22}{:>12}", "# skipped relations", self.skipped_relations)?;
        }
        Ok(())
    }
}

/// All interactions plus auxiliary tasks, before the train/test split.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub num_users: usize,
    pub num_items: usize,
    /// Deduplicated and sorted.
    pub edges: Vec<(usize, usize)>,
    pub auxiliary_tasks: Vec<TaskHypergraph>,
    pub stats: DatasetStats,
}

impl RawDataset {
    pub fn new(
        num_users: usize,
        num_items: usize,
        mut edges: Vec<(usize, usize)>,
        auxiliary_tasks: Vec<TaskHypergraph>,
    ) -> Result<Self> {
        edges.sort_unstable();
        edges.dedup();
        if let Some(&(u, i)) = edges.iter().find(|&&(u, i)| u >= num_users || i >= num_items) {
            return Err(Error::InvalidInput(format!(
                "interaction ({u}, {i}) out of range for {num_users} users x {num_items} items"
            )));
        }
        let stats = DatasetStats::compute(num_users, num_items, edges.len(), &auxiliary_tasks);
        Ok(Self {
            num_users,
            num_items,
            edges,
            auxiliary_tasks,
            stats,
        })
    }

    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<InteractionDataset> {
        let (train_edges, test_edges) = split_interactions(&self.edges, train_fraction, seed)?;
        Ok(InteractionDataset {
            num_users: self.num_users,
            num_items: self.num_items,
            train_edges,
            test_edges,
            auxiliary_tasks: self.auxiliary_tasks.clone(),
        })
    }
}

/// Interactions split into train and test, plus auxiliary tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionDataset {
    pub num_users: usize,
    pub num_items: usize,
    pub train_edges: Vec<(usize, usize)>,
    pub test_edges: Vec<(usize, usize)>,
    pub auxiliary_tasks: Vec<TaskHypergraph>,
}

impl InteractionDataset {
    /// User-side and item-side recommendation hypergraphs over the training edges.
    pub fn rec_graphs(&self) -> Result<(Hypergraph, Hypergraph)> {
        rec_graphs(self.num_users, self.num_items, &self.train_edges)
    }

    pub fn train_items_by_user(&self) -> Vec<Vec<usize>> {
        items_by_user(self.num_users, &self.train_edges)
    }

    pub fn test_items_by_user(&self) -> Vec<Vec<usize>> {
        items_by_user(self.num_users, &self.test_edges)
    }

    pub fn with_tasks(&self, tasks: Vec<TaskHypergraph>) -> Self {
        Self {
            auxiliary_tasks: tasks,
            ..self.clone()
        }
    }
}

pub fn rec_graphs(num_users: usize, num_items: usize, edges: &[(usize, usize)]) -> Result<(Hypergraph, Hypergraph)> {
    let (u, i) = build_recommendation_hypergraphs(num_users, num_items, edges)?;
    Ok((u.graph, i.graph))
}

/// Sorted item lists per user.
pub fn items_by_user(num_users: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); num_users];
    for &(u, i) in edges {
        out[u].push(i);
    }
    for items in &mut out {
        items.sort_unstable();
        items.dedup();
    }
    out
}

/// Uniform random per-edge split, deterministic under `seed`.
///
/// Users whose every edge landed in test get their lowest-indexed test edge
/// moved back into train. Both outputs are sorted.
pub fn split_interactions(
    edges: &[(usize, usize)],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut canonical = edges.to_vec();
    canonical.sort_unstable();
    canonical.dedup();
    if canonical.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 distinct interactions to split, got {}",
            canonical.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    canonical.shuffle(&mut rng);
    let n_train = ((canonical.len() as f64 * train_fraction).round() as usize).clamp(1, canonical.len() - 1);
    let mut test = canonical.split_off(n_train);
    let mut train = canonical;
    train.sort_unstable();
    test.sort_unstable();

    let mut has_train = std::collections::HashSet::new();
    for &(u, _) in &train {
        has_train.insert(u);
    }
    let mut kept = Vec::with_capacity(test.len());
    for (u, i) in test {
        if has_train.insert(u) {
            // first (lowest item) test edge of a user without training data
            train.push((u, i));
        } else {
            kept.push((u, i));
        }
    }
    train.sort_unstable();
    Ok((train, kept))
}
