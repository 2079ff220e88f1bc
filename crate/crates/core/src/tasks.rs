//! Conversion of raw records into task hypergraphs.
//!
//! Every pretext task becomes a hypergraph over one homogeneous entity set:
//!
//! * recommendation: each item is a hyperedge over the users who interacted
//!   with it (and, mirrored, each user is a hyperedge over their items);
//! * relation prediction: each relation record is a hyperedge joining the
//!   anchor and its related nodes;
//! * attribute prediction: each attribute value (or quantization bin for
//!   continuous values) is a hyperedge over the nodes holding it.
//!
//! Task hypergraphs always index the full user or item set; entities that do
//! not take part in a task are isolated nodes.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Recommendation,
    RelationPrediction,
    AttributePrediction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSide {
    Users,
    Items,
}

impl NodeSide {
    pub fn opposite(self) -> Self {
        match self {
            NodeSide::Users => NodeSide::Items,
            NodeSide::Items => NodeSide::Users,
        }
    }
}

impl fmt::Display for NodeSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeSide::Users => "users",
            NodeSide::Items => "items",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskHypergraph {
    pub task_id: String,
    pub kind: TaskKind,
    pub side: NodeSide,
    pub graph: Hypergraph,
    pub hyperedge_labels: Option<Vec<String>>,
}

impl TaskHypergraph {
    pub fn num_hyperedges(&self) -> usize {
        self.graph.num_hyperedges()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AttributeValue {
    Categorical(String),
    Continuous(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Categorical,
    Continuous,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributeTable {
    pub value_kind: ValueKind,
    pub records: Vec<(usize, AttributeValue)>,
}

impl AttributeTable {
    pub fn categorical<S: Into<String>>(records: impl IntoIterator<Item = (usize, S)>) -> Self {
        Self {
            value_kind: ValueKind::Categorical,
            records: records
                .into_iter()
                .map(|(n, v)| (n, AttributeValue::Categorical(v.into())))
                .collect(),
        }
    }

    pub fn continuous(records: impl IntoIterator<Item = (usize, f64)>) -> Self {
        Self {
            value_kind: ValueKind::Continuous,
            records: records
                .into_iter()
                .map(|(n, v)| (n, AttributeValue::Continuous(v)))
                .collect(),
        }
    }
}

/// Builds the paired user-side and item-side recommendation hypergraphs.
///
/// In the user-side graph hyperedge `j` holds the users who interacted with
/// item `j`; the item-side graph is its exact transpose.
pub fn build_recommendation_hypergraphs(
    num_users: usize,
    num_items: usize,
    interactions: &[(usize, usize)],
) -> Result<(TaskHypergraph, TaskHypergraph)> {
    if interactions.is_empty() {
        return Err(Error::InvalidInput(
            "recommendation task requires at least one interaction".into(),
        ));
    }
    let users = Hypergraph::from_memberships(num_users, num_items, interactions)?;
    let items = users.transpose();
    Ok((
        TaskHypergraph {
            task_id: "rec".into(),
            kind: TaskKind::Recommendation,
            side: NodeSide::Users,
            graph: users,
            hyperedge_labels: None,
        },
        TaskHypergraph {
            task_id: "rec".into(),
            kind: TaskKind::Recommendation,
            side: NodeSide::Items,
            graph: items,
            hyperedge_labels: None,
        },
    ))
}

/// Result of relation-hypergraph construction; `skipped` counts records whose
/// related set was empty.
#[derive(Clone, Debug)]
pub struct RelationBuild {
    pub task: TaskHypergraph,
    pub skipped: usize,
}

/// One hyperedge per relation record joining the anchor and its related nodes.
///
/// Records are put in canonical order (anchor, then sorted related set) before
/// hyperedges are numbered, so input order does not matter.
pub fn build_relation_hypergraph(
    task_id: &str,
    side: NodeSide,
    num_nodes: usize,
    relations: &[(usize, Vec<usize>)],
) -> Result<RelationBuild> {
    let mut skipped = 0;
    let mut records: Vec<(usize, Vec<usize>)> = Vec::with_capacity(relations.len());
    for (anchor, related) in relations {
        if related.is_empty() {
            skipped += 1;
            continue;
        }
        let mut members = related.clone();
        members.sort_unstable();
        members.dedup();
        records.push((*anchor, members));
    }
    records.sort();
    if skipped > 0 {
        log::warn!("task `{task_id}`: skipped {skipped} relation record(s) with no related nodes");
    }
    let mut memberships = Vec::new();
    let mut labels = Vec::with_capacity(records.len());
    for (e, (anchor, members)) in records.iter().enumerate() {
        memberships.push((*anchor, e));
        memberships.extend(members.iter().map(|&n| (n, e)));
        labels.push(format!("rel:{anchor}"));
    }
    let graph = Hypergraph::from_memberships(num_nodes, records.len(), &memberships)?;
    Ok(RelationBuild {
        task: TaskHypergraph {
            task_id: task_id.into(),
            kind: TaskKind::RelationPrediction,
            side,
            graph,
            hyperedge_labels: Some(labels),
        },
        skipped,
    })
}

/// One hyperedge per distinct attribute value (or quantization bin).
///
/// Categorical hyperedges are ordered by sorted label; bins by bin index.
pub fn build_attribute_hypergraph(
    task_id: &str,
    side: NodeSide,
    num_nodes: usize,
    attrs: &AttributeTable,
    bins: usize,
) -> Result<TaskHypergraph> {
    let keyed: Vec<(usize, String)> = match attrs.value_kind {
        ValueKind::Categorical => attrs
            .records
            .iter()
            .map(|(n, v)| match v {
                AttributeValue::Categorical(s) => Ok((*n, s.clone())),
                AttributeValue::Continuous(x) => Ok((*n, x.to_string())),
            })
            .collect::<Result<_>>()?,
        ValueKind::Continuous => {
            let values: Vec<f64> = attrs
                .records
                .iter()
                .map(|(_, v)| match v {
                    AttributeValue::Continuous(x) => Ok(*x),
                    AttributeValue::Categorical(s) => s.parse::<f64>().map_err(|_| {
                        Error::InvalidInput(format!(
                            "task `{task_id}`: `{s}` is not a continuous value"
                        ))
                    }),
                })
                .collect::<Result<_>>()?;
            let binned = quantize_continuous(&values, bins)?;
            // zero-padded so that lexical order equals bin order
            let width = bins.to_string().len();
            attrs
                .records
                .iter()
                .zip(binned)
                .map(|((n, _), b)| (*n, format!("bin{b:0width$}")))
                .collect()
        }
    };

    let mut label_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, label) in &keyed {
        label_index.insert(label.as_str(), 0);
    }
    let labels: Vec<String> = label_index.keys().map(|s| s.to_string()).collect();
    for (i, idx) in label_index.values_mut().enumerate() {
        *idx = i;
    }
    let memberships: Vec<(usize, usize)> = keyed
        .iter()
        .map(|(n, label)| (*n, label_index[label.as_str()]))
        .collect();
    let graph = Hypergraph::from_memberships(num_nodes, labels.len(), &memberships)?;
    Ok(TaskHypergraph {
        task_id: task_id.into(),
        kind: TaskKind::AttributePrediction,
        side,
        graph,
        hyperedge_labels: Some(labels),
    })
}

/// Uniform-width binning over `[min, max]`; the maximum lands in the last bin
/// and a constant input maps everything to bin 0.
pub fn quantize_continuous(values: &[f64], bins: usize) -> Result<Vec<usize>> {
    if bins < 2 {
        return Err(Error::InvalidInput(format!(
            "quantization needs at least 2 bins, got {bins}"
        )));
    }
    if let Some(index) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::NonFiniteValue {
            context: "continuous attribute values".into(),
            index,
        });
    }
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::InvalidInput(
            "quantization needs at least one finite value".into(),
        ));
    }
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    Ok(values
        .iter()
        .map(|&v| {
            if width == 0.0 || v <= min {
                0
            } else if v >= max {
                bins - 1
            } else {
                (((v - min) / width).floor() as usize).min(bins - 1)
            }
        })
        .collect())
}
