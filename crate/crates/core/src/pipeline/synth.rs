//! Planted block-model fixture.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tasks::{build_attribute_hypergraph, build_relation_hypergraph, AttributeTable, NodeSide};

use super::dataset::{InteractionDataset, RawDataset};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub num_blocks: usize,
    /// Probability that a sampled interaction is redirected out of block.
    pub noise: f64,
    /// Probability that a user interacts with each item of its block.
    pub density: f64,
    pub seed: u64,
    /// Also emit a user-side attribute task holding each user's block.
    pub user_groups: bool,
}

impl SyntheticConfig {
    pub fn new(num_users: usize, num_items: usize, num_blocks: usize, noise: f64, seed: u64) -> Self {
        Self {
            num_users,
            num_items,
            num_blocks,
            noise,
            density: 0.6,
            seed,
            user_groups: false,
        }
    }
}

/// Generated fixture plus the raw records its tasks were built from.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub raw: RawDataset,
    pub item_blocks: Vec<(usize, String)>,
    pub item_relations: Vec<(usize, Vec<usize>)>,
    pub user_blocks: Option<Vec<(usize, String)>>,
}

fn block_label(b: usize, blocks: usize) -> String {
    let width = (blocks.saturating_sub(1)).to_string().len();
    format!("block{b:0width$}")
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    let &SyntheticConfig {
        num_users,
        num_items,
        num_blocks,
        noise,
        density,
        seed,
        user_groups,
    } = cfg;
    if num_blocks == 0 || num_users % num_blocks != 0 || num_items % num_blocks != 0 {
        return Err(Error::InvalidConfig(format!(
            "{num_blocks} blocks must divide {num_users} users and {num_items} items"
        )));
    }
    let users_per = num_users / num_blocks;
    let items_per = num_items / num_blocks;
    if users_per == 0 || items_per < 2 {
        return Err(Error::InvalidConfig("each block needs at least one user and two items".into()));
    }
    if num_blocks < 2 && noise > 0.0 {
        return Err(Error::InvalidConfig("noise needs at least two blocks".into()));
    }
    for (name, p) in [("noise", noise), ("density", density)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let item_block = |i: usize| i / items_per;

    let mut edges = Vec::new();
    for u in 0..num_users {
        let b = u / users_per;
        let block_items = b * items_per..(b + 1) * items_per;
        let before = edges.len();
        for i in block_items.clone() {
            if rng.random::<f64>() >= density {
                continue;
            }
            if rng.random::<f64>() < noise {
                let out = rng.random_range(0..num_items - items_per);
                let j = if out >= block_items.start { out + items_per } else { out };
                edges.push((u, j));
            } else {
                edges.push((u, i));
            }
        }
        if edges.len() == before {
            edges.push((u, rng.random_range(block_items)));
        }
    }

    let item_blocks: Vec<(usize, String)> = (0..num_items)
        .map(|i| (i, block_label(item_block(i), num_blocks)))
        .collect();
    let item_relations: Vec<(usize, Vec<usize>)> = (0..num_items)
        .map(|i| {
            let start = item_block(i) * items_per;
            let mut partner = start + rng.random_range(0..items_per - 1);
            if partner >= i {
                partner += 1;
            }
            (i, vec![partner])
        })
        .collect();
    let user_blocks = user_groups.then(|| {
        (0..num_users)
            .map(|u| (u, block_label(u / users_per, num_blocks)))
            .collect::<Vec<_>>()
    });

    let mut tasks = vec![
        build_attribute_hypergraph(
            "item_block",
            NodeSide::Items,
            num_items,
            &AttributeTable::categorical(item_blocks.iter().cloned()),
            2,
        )?,
        build_relation_hypergraph("item_pair", NodeSide::Items, num_items, &item_relations)?.task,
    ];
    if let Some(groups) = &user_blocks {
        tasks.push(build_attribute_hypergraph(
            "user_group",
            NodeSide::Users,
            num_users,
            &AttributeTable::categorical(groups.iter().cloned()),
            2,
        )?);
    }
    Ok(SyntheticData {
        raw: RawDataset::new(num_users, num_items, edges, tasks)?,
        item_blocks,
        item_relations,
        user_blocks,
    })
}

/// Planted fixture split 80/20 under the same seed.
pub fn generate_synthetic_dataset(
    num_users: usize,
    num_items: usize,
    num_blocks: usize,
    noise: f64,
    seed: u64,
) -> Result<InteractionDataset> {
    let data = generate_synthetic(&SyntheticConfig::new(num_users, num_items, num_blocks, noise, seed))?;
    data.raw.split(0.8, seed)
}
