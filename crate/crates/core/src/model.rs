//! Forward pass: embedding table, auxiliary task encoders, and the
//! transitional attention (TA) layer.
//!
//! The only trainable parameters of the full model are the user and item
//! embedding tables. Two ablation variants add extra blocks (the concat
//! mixer and the non-unified attribute classifiers); they live in
//! [`Params`] next to the table.
//!
//! The TA layer for the user side works on the user-side recommendation
//! hypergraph, whose hyperedges are items:
//!
//! ```text
//! e_j   = mean(x_u for u in users(j))                  hyperedge init
//! s_jt  = e_j . z_t[j] / sqrt(d)                        per auxiliary task t
//! a_j   = tanh(sum_t softmax_t(s_j)_t * z_t[j])
//! q_j   = e_j + gamma * a_j
//! x'_u  = mean(q_j for j in items(u))                  node update
//! ```
//!
//! where `z_t` are item embeddings produced by the item-side auxiliary
//! encoders. The item side is symmetric and attends over user-side tasks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::matrix::{dot, EmbeddingMatrix};
use crate::tasks::{NodeSide, TaskHypergraph, TaskKind};

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub user_emb: EmbeddingMatrix,
    pub item_emb: EmbeddingMatrix,
}

impl EmbeddingTable {
    /// Entries drawn i.i.d. from `N(0, 1/dim)`; bit-identical for a fixed seed.
    pub fn init(num_users: usize, num_items: usize, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            user_emb: random_matrix(&mut rng, num_users, dim, 1.0 / (dim as f64).sqrt()),
            item_emb: random_matrix(&mut rng, num_items, dim, 1.0 / (dim as f64).sqrt()),
        })
    }

    pub fn dim(&self) -> usize {
        self.user_emb.dim()
    }

    pub fn num_users(&self) -> usize {
        self.user_emb.rows()
    }

    pub fn num_items(&self) -> usize {
        self.item_emb.rows()
    }

    pub fn side(&self, side: NodeSide) -> &EmbeddingMatrix {
        match side {
            NodeSide::Users => &self.user_emb,
            NodeSide::Items => &self.item_emb,
        }
    }

    pub fn side_mut(&mut self, side: NodeSide) -> &mut EmbeddingMatrix {
        match side {
            NodeSide::Users => &mut self.user_emb,
            NodeSide::Items => &mut self.item_emb,
        }
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, dim: usize, std: f64) -> EmbeddingMatrix {
    let normal = Normal::new(0.0, std).expect("positive standard deviation");
    let values = (0..rows * dim).map(|_| normal.sample(rng)).collect();
    EmbeddingMatrix::from_vec(rows, dim, values).expect("sized above")
}

/// How auxiliary signals are fused into recommendation hyperedges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaVariant {
    /// Softmax attention over auxiliary tasks.
    Full,
    /// No fusion: plain hypergraph convolution.
    NoTa,
    /// Unweighted mean of the auxiliary embeddings.
    Sum,
    /// Linear map of the concatenated auxiliary embeddings.
    Concat,
}

impl TaVariant {
    pub const ALL: [TaVariant; 4] = [
        TaVariant::NoTa,
        TaVariant::Sum,
        TaVariant::Concat,
        TaVariant::Full,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TaVariant::Full => "full",
            TaVariant::NoTa => "no_ta",
            TaVariant::Sum => "sum",
            TaVariant::Concat => "concat",
        }
    }
}

impl std::str::FromStr for TaVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "full" => Ok(TaVariant::Full),
            "no_ta" | "nota" => Ok(TaVariant::NoTa),
            "sum" => Ok(TaVariant::Sum),
            "concat" => Ok(TaVariant::Concat),
            other => Err(format!("unknown TA variant `{other}` (expected full, no_ta, sum, concat)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaConfig {
    pub gamma: f64,
    pub num_layers: usize,
    pub variant: TaVariant,
}

impl Default for TaConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            num_layers: 1,
            variant: TaVariant::Full,
        }
    }
}

impl TaConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        if self.num_layers == 0 {
            return Err(Error::InvalidConfig("TA layer count must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub ta: TaConfig,
    pub aux_layers: usize,
    /// When false, attribute tasks are predicted by a linear+softmax head on
    /// the recommendation embeddings instead of as hyperedges.
    pub unified_attributes: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            ta: TaConfig::default(),
            aux_layers: 1,
            unified_attributes: true,
        }
    }
}

/// Output of an auxiliary encoder: per layer, the hyperedge embeddings and
/// the resulting node embeddings.
#[derive(Clone, Debug)]
pub struct AuxEncoding {
    pub layers: Vec<(EmbeddingMatrix, EmbeddingMatrix)>,
}

impl AuxEncoding {
    pub fn node_emb(&self) -> &EmbeddingMatrix {
        &self.layers.last().expect("at least one layer").1
    }

    pub fn edge_emb(&self) -> &EmbeddingMatrix {
        &self.layers.last().expect("at least one layer").0
    }
}

/// Runs `layers` convolutions of `task` starting from the table block of its side.
pub fn encode_auxiliary_task(
    task: &TaskHypergraph,
    table: &EmbeddingTable,
    layers: usize,
) -> Result<AuxEncoding> {
    if layers == 0 {
        return Err(Error::InvalidConfig("auxiliary encoder needs >= 1 layer".into()));
    }
    let mut out = Vec::with_capacity(layers);
    let mut input = table.side(task.side);
    for _ in 0..layers {
        let edges = task.graph.aggregate_nodes_to_hyperedges(input)?;
        let nodes = task.graph.aggregate_hyperedges_to_nodes(&edges)?;
        out.push((edges, nodes));
        input = &out.last().expect("just pushed").1;
    }
    Ok(AuxEncoding { layers: out })
}

/// Hyperedge initialization: mean of the connected node embeddings.
pub fn ta_hyperedge_init(rec_graph: &Hypergraph, input: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    rec_graph.aggregate_nodes_to_hyperedges(input)
}

/// Attention of one hyperedge over its entity's task-specific embeddings.
///
/// Returns the activated mix `tanh(sum_t alpha_t z_t)` and the weights `alpha`.
pub fn ta_attention(edge_row: &[f64], task_rows: &[&[f64]], dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if task_rows.is_empty() {
        return Err(Error::InvalidInput(
            "transitional attention needs at least one auxiliary task".into(),
        ));
    }
    for row in std::iter::once(edge_row).chain(task_rows.iter().copied()) {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "attention input",
                expected: dim,
                actual: row.len(),
            });
        }
    }
    let scale = (dim as f64).sqrt();
    let logits: Vec<f64> = task_rows.iter().map(|z| dot(edge_row, z) / scale).collect();
    let alpha = softmax(&logits);
    let mut mixed = vec![0.0; dim];
    for (w, z) in alpha.iter().zip(task_rows) {
        for (m, v) in mixed.iter_mut().zip(z.iter()) {
            *m += w * v;
        }
    }
    Ok((mixed.into_iter().map(f64::tanh).collect(), alpha))
}

/// Fused hyperedge `e + gamma * a`.
pub fn ta_fuse(edge_row: &[f64], a: &[f64], gamma: f64) -> Vec<f64> {
    edge_row.iter().zip(a).map(|(e, x)| e + gamma * x).collect()
}

/// Node update: mean of the fused embeddings of incident hyperedges.
pub fn ta_node_update(rec_graph: &Hypergraph, fused: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    rec_graph.aggregate_hyperedges_to_nodes(fused)
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Intermediates of one TA layer, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct TaLayerTrace {
    pub edge: EmbeddingMatrix,
    /// `|E| x T` attention weights (full variant only).
    pub alpha: Option<EmbeddingMatrix>,
    /// Pre-activation mix, `|E| x d` (all fusing variants).
    pub mixed: Option<EmbeddingMatrix>,
    /// `tanh(mixed)`.
    pub activation: Option<EmbeddingMatrix>,
    pub fused: EmbeddingMatrix,
    pub output: EmbeddingMatrix,
}

#[derive(Clone, Debug)]
pub struct TaTrace {
    pub layers: Vec<TaLayerTrace>,
}

impl TaTrace {
    pub fn output(&self) -> &EmbeddingMatrix {
        &self.layers.last().expect("at least one TA layer").output
    }

    /// Whether this side actually fuses auxiliary signals.
    pub fn is_transitional(&self) -> bool {
        self.layers.first().is_some_and(|l| l.mixed.is_some())
    }
}

/// Whether a TA side with `num_sources` auxiliary embeddings fuses anything.
pub fn fuses(cfg: &TaConfig, num_sources: usize) -> bool {
    num_sources > 0 && cfg.variant != TaVariant::NoTa
}

/// Stacked TA layers in matrix form.
///
/// `sources[t]` holds the task-`t` embeddings of the entities acting as
/// hyperedges (`rows == rec_graph.num_hyperedges()`). `mixer` is required for
/// the concat variant and has shape `d x (T * d)`. With no sources or the
/// no-TA variant the layer reduces to plain convolution.
pub fn ta_forward(
    input: &EmbeddingMatrix,
    rec_graph: &Hypergraph,
    sources: &[&EmbeddingMatrix],
    cfg: &TaConfig,
    mixer: Option<&EmbeddingMatrix>,
) -> Result<TaTrace> {
    cfg.validate()?;
    let dim = input.dim();
    let n_edges = rec_graph.num_hyperedges();
    for z in sources {
        if z.rows() != n_edges || z.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "TA source embeddings",
                expected: n_edges,
                actual: z.rows(),
            });
        }
    }
    let transitional = fuses(cfg, sources.len());
    if transitional && cfg.variant == TaVariant::Concat {
        let w = mixer.ok_or_else(|| Error::InvalidInput("concat variant requires a mixer".into()))?;
        if w.rows() != dim || w.dim() != dim * sources.len() {
            return Err(Error::DimensionMismatch {
                context: "concat mixer",
                expected: dim * sources.len(),
                actual: w.dim(),
            });
        }
    }

    let mut layers: Vec<TaLayerTrace> = Vec::with_capacity(cfg.num_layers);
    for _ in 0..cfg.num_layers {
        let x = layers.last().map_or(input, |l| &l.output);
        let edge = ta_hyperedge_init(rec_graph, x)?;
        let (alpha, mixed) = if transitional {
            match cfg.variant {
                TaVariant::Full => {
                    let alpha = attention_weights(&edge, sources);
                    let mixed = weighted_source_sum(&alpha, sources, dim);
                    (Some(alpha), Some(mixed))
                }
                TaVariant::Sum => (None, Some(mean_sources(sources, n_edges, dim))),
                TaVariant::Concat => (
                    None,
                    Some(concat_mix(mixer.expect("checked above"), sources, n_edges, dim)),
                ),
                TaVariant::NoTa => unreachable!("no-TA never fuses"),
            }
        } else {
            (None, None)
        };
        let activation = mixed.as_ref().map(|m| {
            let mut a = m.clone();
            a.as_mut_slice().iter_mut().for_each(|v| *v = v.tanh());
            a
        });
        let fused = match &activation {
            Some(a) => edge.axpy(cfg.gamma, a),
            None => edge.clone(),
        };
        let output = ta_node_update(rec_graph, &fused)?;
        layers.push(TaLayerTrace {
            edge,
            alpha,
            mixed,
            activation,
            fused,
            output,
        });
    }
    Ok(TaTrace { layers })
}

/// Row-wise softmax of `S[j, t] = e_j . z_t[j] / sqrt(d)`.
fn attention_weights(edge: &EmbeddingMatrix, sources: &[&EmbeddingMatrix]) -> EmbeddingMatrix {
    let scale = (edge.dim() as f64).sqrt();
    let mut logits = EmbeddingMatrix::zeros(edge.rows(), sources.len());
    for (t, z) in sources.iter().enumerate() {
        for (j, e) in edge.iter_rows().enumerate() {
            logits.set(j, t, dot(e, z.row(j)) / scale);
        }
    }
    for j in 0..logits.rows() {
        let row = logits.row_mut(j);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    logits
}

/// `M = sum_t diag(alpha[:, t]) Z_t`.
fn weighted_source_sum(alpha: &EmbeddingMatrix, sources: &[&EmbeddingMatrix], dim: usize) -> EmbeddingMatrix {
    let mut mixed = EmbeddingMatrix::zeros(alpha.rows(), dim);
    for (t, z) in sources.iter().enumerate() {
        for j in 0..alpha.rows() {
            let w = alpha.get(j, t);
            for (m, v) in mixed.row_mut(j).iter_mut().zip(z.row(j)) {
                *m += w * v;
            }
        }
    }
    mixed
}

fn mean_sources(sources: &[&EmbeddingMatrix], rows: usize, dim: usize) -> EmbeddingMatrix {
    let mut mixed = EmbeddingMatrix::zeros(rows, dim);
    for z in sources {
        mixed.add_assign(z);
    }
    mixed.scale(1.0 / sources.len() as f64);
    mixed
}

fn concat_mix(w: &EmbeddingMatrix, sources: &[&EmbeddingMatrix], rows: usize, dim: usize) -> EmbeddingMatrix {
    let mut mixed = EmbeddingMatrix::zeros(rows, dim);
    for j in 0..rows {
        let out = mixed.row_mut(j);
        for (r, o) in out.iter_mut().enumerate() {
            let wr = w.row(r);
            *o = sources
                .iter()
                .enumerate()
                .map(|(t, z)| dot(&wr[t * dim..(t + 1) * dim], z.row(j)))
                .sum();
        }
    }
    mixed
}

/// Ranking score of a user-item pair: inner product of their final rows.
pub fn score_user_item(user_rows: &EmbeddingMatrix, item_rows: &EmbeddingMatrix, u: usize, i: usize) -> f64 {
    dot(user_rows.row(u), item_rows.row(i))
}

/// Auxiliary prediction score: node embedding dotted with hyperedge embedding.
pub fn score_node_hyperedge(node_row: &[f64], edge_row: &[f64]) -> f64 {
    dot(node_row, edge_row)
}

/// Trainable parameter blocks: the embedding table plus variant-specific extras.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub table: EmbeddingTable,
    /// Concat-variant mixer for the user-side TA (`d x T_items*d`).
    pub user_mixer: Option<EmbeddingMatrix>,
    /// Concat-variant mixer for the item-side TA (`d x T_users*d`).
    pub item_mixer: Option<EmbeddingMatrix>,
    /// Linear classifiers for non-unified attribute tasks, indexed like the
    /// model's auxiliary tasks (`|A_t| x d`).
    pub attribute_heads: Vec<Option<EmbeddingMatrix>>,
}

impl Params {
    pub fn blocks(&self) -> Vec<(String, &EmbeddingMatrix)> {
        let mut out = vec![
            ("user_emb".to_string(), &self.table.user_emb),
            ("item_emb".to_string(), &self.table.item_emb),
        ];
        if let Some(w) = &self.user_mixer {
            out.push(("user_mixer".into(), w));
        }
        if let Some(w) = &self.item_mixer {
            out.push(("item_mixer".into(), w));
        }
        for (t, h) in self.attribute_heads.iter().enumerate() {
            if let Some(w) = h {
                out.push((format!("attribute_head[{t}]"), w));
            }
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut EmbeddingMatrix)> {
        let mut out = vec![
            ("user_emb".to_string(), &mut self.table.user_emb),
            ("item_emb".to_string(), &mut self.table.item_emb),
        ];
        if let Some(w) = &mut self.user_mixer {
            out.push(("user_mixer".into(), w));
        }
        if let Some(w) = &mut self.item_mixer {
            out.push(("item_mixer".into(), w));
        }
        for (t, h) in self.attribute_heads.iter_mut().enumerate() {
            if let Some(w) = h {
                out.push((format!("attribute_head[{t}]"), w));
            }
        }
        out
    }

    /// Same block layout, all zeros.
    pub fn zeros_like(&self) -> Params {
        let z = |m: &EmbeddingMatrix| EmbeddingMatrix::zeros(m.rows(), m.dim());
        Params {
            table: EmbeddingTable {
                user_emb: z(&self.table.user_emb),
                item_emb: z(&self.table.item_emb),
            },
            user_mixer: self.user_mixer.as_ref().map(z),
            item_mixer: self.item_mixer.as_ref().map(z),
            attribute_heads: self.attribute_heads.iter().map(|h| h.as_ref().map(z)).collect(),
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.blocks().iter().map(|(_, m)| m.squared_norm()).sum()
    }
}

/// The fixed computation graph: recommendation hypergraphs, auxiliary tasks,
/// and layer configuration.
#[derive(Clone, Debug)]
pub struct Model<'a> {
    pub user_graph: &'a Hypergraph,
    pub item_graph: &'a Hypergraph,
    pub aux: &'a [TaskHypergraph],
    pub config: ModelConfig,
    encoded: Vec<bool>,
    user_sources: Vec<usize>,
    item_sources: Vec<usize>,
}

impl<'a> Model<'a> {
    /// `user_graph` is users x items (hyperedge = item); `item_graph` is its transpose.
    pub fn new(
        user_graph: &'a Hypergraph,
        item_graph: &'a Hypergraph,
        aux: &'a [TaskHypergraph],
        config: ModelConfig,
    ) -> Result<Self> {
        config.ta.validate()?;
        if config.aux_layers == 0 {
            return Err(Error::InvalidConfig("auxiliary encoder layers must be >= 1".into()));
        }
        let num_users = user_graph.num_nodes();
        let num_items = user_graph.num_hyperedges();
        if item_graph.num_nodes() != num_items || item_graph.num_hyperedges() != num_users {
            return Err(Error::InvalidInput(
                "item-side recommendation graph is not the transpose of the user-side graph".into(),
            ));
        }
        for task in aux {
            if task.kind == TaskKind::Recommendation {
                return Err(Error::InvalidInput(format!(
                    "task `{}`: recommendation tasks cannot be auxiliary",
                    task.task_id
                )));
            }
            let expected = match task.side {
                NodeSide::Users => num_users,
                NodeSide::Items => num_items,
            };
            if task.graph.num_nodes() != expected {
                return Err(Error::DimensionMismatch {
                    context: "auxiliary task node count",
                    expected,
                    actual: task.graph.num_nodes(),
                });
            }
        }
        let encoded: Vec<bool> = aux
            .iter()
            .map(|t| config.unified_attributes || t.kind != TaskKind::AttributePrediction)
            .collect();
        let sources = |side: NodeSide| -> Vec<usize> {
            aux.iter()
                .enumerate()
                .filter(|(t, task)| encoded[*t] && task.side == side)
                .map(|(t, _)| t)
                .collect()
        };
        Ok(Self {
            user_graph,
            item_graph,
            aux,
            config,
            user_sources: sources(NodeSide::Items),
            item_sources: sources(NodeSide::Users),
            encoded,
        })
    }

    pub fn num_users(&self) -> usize {
        self.user_graph.num_nodes()
    }

    pub fn num_items(&self) -> usize {
        self.item_graph.num_nodes()
    }

    /// Whether auxiliary task `t` runs through a hypergraph encoder (as
    /// opposed to a classifier head).
    pub fn is_encoded(&self, t: usize) -> bool {
        self.encoded[t]
    }

    /// Auxiliary tasks feeding the TA layer of `side` (tasks on the opposite side).
    pub fn sources(&self, side: NodeSide) -> &[usize] {
        match side {
            NodeSide::Users => &self.user_sources,
            NodeSide::Items => &self.item_sources,
        }
    }

    pub fn side_graph(&self, side: NodeSide) -> &'a Hypergraph {
        match side {
            NodeSide::Users => self.user_graph,
            NodeSide::Items => self.item_graph,
        }
    }

    /// Fresh parameters: the given table plus any variant-specific blocks.
    pub fn init_params(&self, table: EmbeddingTable, seed: u64) -> Result<Params> {
        let dim = table.dim();
        if table.num_users() != self.num_users() || table.num_items() != self.num_items() {
            return Err(Error::DimensionMismatch {
                context: "embedding table rows",
                expected: self.num_users() + self.num_items(),
                actual: table.num_users() + table.num_items(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d69_7865_7273);
        let concat = self.config.ta.variant == TaVariant::Concat;
        let mixer = |n_sources: usize, rng: &mut ChaCha8Rng| {
            (concat && n_sources > 0).then(|| {
                random_matrix(rng, dim, n_sources * dim, 1.0 / ((n_sources * dim) as f64).sqrt())
            })
        };
        let user_mixer = mixer(self.user_sources.len(), &mut rng);
        let item_mixer = mixer(self.item_sources.len(), &mut rng);
        let attribute_heads = self
            .aux
            .iter()
            .enumerate()
            .map(|(t, task)| {
                (!self.encoded[t])
                    .then(|| random_matrix(&mut rng, task.num_hyperedges(), dim, 1.0 / (dim as f64).sqrt()))
            })
            .collect();
        Ok(Params {
            table,
            user_mixer,
            item_mixer,
            attribute_heads,
        })
    }

    pub fn forward(&self, params: &Params) -> Result<Activations> {
        let table = &params.table;
        let aux = self
            .aux
            .iter()
            .enumerate()
            .map(|(t, task)| {
                self.encoded[t]
                    .then(|| encode_auxiliary_task(task, table, self.config.aux_layers))
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        let side_sources = |side: NodeSide| -> Vec<&EmbeddingMatrix> {
            self.sources(side)
                .iter()
                .map(|&t| aux[t].as_ref().expect("sources are encoded").node_emb())
                .collect()
        };
        let user = ta_forward(
            &table.user_emb,
            self.user_graph,
            &side_sources(NodeSide::Users),
            &self.config.ta,
            params.user_mixer.as_ref(),
        )?;
        let item = ta_forward(
            &table.item_emb,
            self.item_graph,
            &side_sources(NodeSide::Items),
            &self.config.ta,
            params.item_mixer.as_ref(),
        )?;
        Ok(Activations { aux, user, item })
    }
}

/// Everything the forward pass computed.
#[derive(Clone, Debug)]
pub struct Activations {
    pub aux: Vec<Option<AuxEncoding>>,
    pub user: TaTrace,
    pub item: TaTrace,
}

impl Activations {
    pub fn user_out(&self) -> &EmbeddingMatrix {
        self.user.output()
    }

    pub fn item_out(&self) -> &EmbeddingMatrix {
        self.item.output()
    }

    pub fn side(&self, side: NodeSide) -> &TaTrace {
        match side {
            NodeSide::Users => &self.user,
            NodeSide::Items => &self.item,
        }
    }

    /// All recorded attention vectors, one per hyperedge per layer per side.
    pub fn attention_weights(&self) -> impl Iterator<Item = &[f64]> {
        self.user
            .layers
            .iter()
            .chain(&self.item.layers)
            .filter_map(|l| l.alpha.as_ref())
            .flat_map(|a| a.iter_rows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = EmbeddingTable::init(5, 7, 4, 11).unwrap();
        let b = EmbeddingTable::init(5, 7, 4, 11).unwrap();
        let c = EmbeddingTable::init(5, 7, 4, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(EmbeddingTable::init(1, 1, 0, 0).is_err());
    }

    #[test]
    fn init_scale_follows_dimension() {
        // E|x| = sigma * sqrt(2/pi) for x ~ N(0, sigma^2), sigma = 1/sqrt(d)
        for dim in [4usize, 64] {
            let t = EmbeddingTable::init(200, 200, dim, 3).unwrap();
            let all: Vec<f64> = t
                .user_emb
                .as_slice()
                .iter()
                .chain(t.item_emb.as_slice())
                .copied()
                .collect();
            assert!(all.len() >= 1600);
            let mean_abs = all.iter().map(|v| v.abs()).sum::<f64>() / all.len() as f64;
            let expected = (2.0 / std::f64::consts::PI).sqrt() / (dim as f64).sqrt();
            assert!((mean_abs / expected - 1.0).abs() < 0.05, "{mean_abs} vs {expected}");
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            assert!(mean.abs() < 4.0 / (all.len() as f64).sqrt() / (dim as f64).sqrt() * 2.0);
        }
    }

    fn task(side: NodeSide, n: usize, e: usize, members: &[(usize, usize)]) -> TaskHypergraph {
        TaskHypergraph {
            task_id: "t".into(),
            kind: TaskKind::RelationPrediction,
            side,
            graph: Hypergraph::from_memberships(n, e, members).unwrap(),
            hyperedge_labels: None,
        }
    }

    #[test]
    fn aux_encoder_examples() {
        let table = EmbeddingTable {
            user_emb: m(&[&[1.0, 2.0]]),
            item_emb: m(&[&[0.0, 0.0]]),
        };
        let enc = encode_auxiliary_task(&task(NodeSide::Users, 1, 1, &[(0, 0)]), &table, 1).unwrap();
        assert_eq!(enc.node_emb().row(0), &[1.0, 2.0]);
        assert_eq!(enc.edge_emb().row(0), &[1.0, 2.0]);

        let table = EmbeddingTable {
            user_emb: m(&[&[0.0]]),
            item_emb: m(&[&[1.0, 0.0], &[0.0, 1.0]]),
        };
        let t = task(NodeSide::Items, 2, 1, &[(0, 0), (1, 0)]);
        let enc = encode_auxiliary_task(&t, &table, 1).unwrap();
        assert_eq!(enc.node_emb().row(0), &[0.5, 0.5]);
        assert_eq!(enc.node_emb().row(1), &[0.5, 0.5]);
        assert_eq!(enc.edge_emb().row(0), &[0.5, 0.5]);
    }

    #[test]
    fn aux_encoder_two_layers_is_two_convolutions() {
        let table = EmbeddingTable::init(1, 6, 3, 9).unwrap();
        let t = task(NodeSide::Items, 6, 3, &[(0, 0), (1, 0), (1, 1), (2, 1), (3, 2), (4, 2), (0, 2)]);
        let enc = encode_auxiliary_task(&t, &table, 2).unwrap();
        let twice = t.graph.convolve(&t.graph.convolve(&table.item_emb).unwrap()).unwrap();
        assert_eq!(enc.node_emb(), &twice);
    }

    #[test]
    fn hyperedge_init_examples() {
        let h = Hypergraph::from_memberships(1, 1, &[(0, 0)]).unwrap();
        assert_eq!(ta_hyperedge_init(&h, &m(&[&[1.0, 2.0]])).unwrap().row(0), &[1.0, 2.0]);
        let h = Hypergraph::from_memberships(3, 2, &[(0, 0), (1, 0), (2, 0)]).unwrap();
        let e = ta_hyperedge_init(&h, &m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]])).unwrap();
        assert!((e.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((e.get(0, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn attention_examples() {
        let (_, alpha) = ta_attention(&[0.3, 0.1], &[&[1.0, 2.0], &[1.0, 2.0]], 2).unwrap();
        assert_eq!(alpha, vec![0.5, 0.5]);

        let (a, alpha) = ta_attention(&[0.3, 0.1], &[&[0.7, -0.2]], 2).unwrap();
        assert_eq!(alpha, vec![1.0]);
        assert_eq!(a, vec![0.7f64.tanh(), (-0.2f64).tanh()]);

        let (_, alpha) = ta_attention(&[1.0], &[&[1.0], &[-1.0]], 1).unwrap();
        let e = std::f64::consts::E;
        assert!((alpha[0] - e / (e + 1.0 / e)).abs() < 1e-15);
        assert!((alpha[1] - (1.0 / e) / (e + 1.0 / e)).abs() < 1e-15);
        assert!((alpha[0] - 0.8808).abs() < 1e-4);

        assert!(ta_attention(&[1.0], &[], 1).is_err());
    }

    #[test]
    fn attention_is_stable_for_huge_logits() {
        let (a, alpha) = ta_attention(&[1e6, 1e6], &[&[1e6, 1e6], &[-1e6, 0.0]], 2).unwrap();
        assert!(alpha.iter().all(|x| x.is_finite()));
        assert!(a.iter().all(|x| x.is_finite()));
        assert_eq!(alpha[0], 1.0);
    }

    #[test]
    fn fuse_examples() {
        assert_eq!(ta_fuse(&[1.0, -2.0], &[0.4, 0.4], 0.0), vec![1.0, -2.0]);
        assert_eq!(ta_fuse(&[1.0, 1.0], &[1.0, -1.0], 0.5), vec![1.5, 0.5]);
        assert_eq!(ta_fuse(&[0.2, 0.3], &[0.0, 0.0], 7.0), vec![0.2, 0.3]);
    }

    #[test]
    fn node_update_examples() {
        let h = Hypergraph::from_memberships(2, 2, &[(0, 0), (0, 1)]).unwrap();
        let out = ta_node_update(&h, &m(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(out.row(0), &[0.5, 0.5]);
        assert_eq!(out.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn ta_with_zero_gamma_is_convolution() {
        let h = Hypergraph::from_memberships(3, 2, &[(0, 0), (1, 0), (1, 1), (2, 1)]).unwrap();
        let x = m(&[&[1.0, 0.5], &[-0.3, 0.2], &[0.9, -1.0]]);
        let z = m(&[&[0.4, 0.4], &[-2.0, 1.0]]);
        let cfg = TaConfig {
            gamma: 0.0,
            ..TaConfig::default()
        };
        let trace = ta_forward(&x, &h, &[&z], &cfg, None).unwrap();
        assert_eq!(trace.output(), &h.convolve(&x).unwrap());
    }

    #[test]
    fn ta_single_pair_unrolled() {
        // one user, one item, one auxiliary task with item row z
        let h = Hypergraph::from_memberships(1, 1, &[(0, 0)]).unwrap();
        let x = m(&[&[0.3, -0.8]]);
        let z = m(&[&[1.5, 0.25]]);
        let gamma = 0.7;
        let cfg = TaConfig {
            gamma,
            ..TaConfig::default()
        };
        let trace = ta_forward(&x, &h, &[&z], &cfg, None).unwrap();
        let expected = [0.3 + gamma * 1.5f64.tanh(), -0.8 + gamma * 0.25f64.tanh()];
        assert_eq!(trace.output().row(0), &expected);
        assert_eq!(trace.layers[0].alpha.as_ref().unwrap().row(0), &[1.0]);
    }

    #[test]
    fn ta_sum_variant_uses_unweighted_mean() {
        let h = Hypergraph::from_memberships(1, 1, &[(0, 0)]).unwrap();
        let x = m(&[&[0.3, -0.8]]);
        let z1 = m(&[&[1.0, 0.0]]);
        let z2 = m(&[&[0.0, 2.0]]);
        let cfg = TaConfig {
            gamma: 1.0,
            num_layers: 1,
            variant: TaVariant::Sum,
        };
        let trace = ta_forward(&x, &h, &[&z1, &z2], &cfg, None).unwrap();
        assert_eq!(trace.output().row(0), &[0.3 + 0.5f64.tanh(), -0.8 + 1.0f64.tanh()]);
    }

    #[test]
    fn ta_concat_requires_mixer() {
        let h = Hypergraph::from_memberships(1, 1, &[(0, 0)]).unwrap();
        let x = m(&[&[0.3]]);
        let z = m(&[&[1.0]]);
        let cfg = TaConfig {
            gamma: 1.0,
            num_layers: 1,
            variant: TaVariant::Concat,
        };
        assert!(ta_forward(&x, &h, &[&z], &cfg, None).is_err());
        let w = m(&[&[2.0]]);
        let trace = ta_forward(&x, &h, &[&z], &cfg, Some(&w)).unwrap();
        assert_eq!(trace.output().row(0), &[0.3 + 2.0f64.tanh()]);
    }

    #[test]
    fn ta_without_sources_is_convolution() {
        let h = Hypergraph::from_memberships(2, 2, &[(0, 0), (1, 0), (1, 1)]).unwrap();
        let x = m(&[&[1.0], &[3.0]]);
        let trace = ta_forward(&x, &h, &[], &TaConfig::default(), None).unwrap();
        assert!(!trace.is_transitional());
        assert_eq!(trace.output(), &h.convolve(&x).unwrap());
    }

    #[test]
    fn score_examples() {
        let u = m(&[&[1.0, 0.0], &[1.0, 1.0]]);
        let i = m(&[&[0.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(score_user_item(&u, &i, 0, 0), 0.0);
        assert_eq!(score_user_item(&u, &i, 1, 1), 2.0);
        assert_eq!(score_user_item(&u, &i, 1, 0), score_user_item(&i, &u, 0, 1));
        assert_eq!(score_node_hyperedge(&[0.6, 0.8], &[0.6, 0.8]), 1.0);
        assert_eq!(score_node_hyperedge(&[2.0, 0.0], &[0.0, 3.0]), 0.0);
        assert_eq!(score_node_hyperedge(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
    }

    #[test]
    fn model_rejects_bad_configs() {
        let h = Hypergraph::from_memberships(2, 2, &[(0, 0)]).unwrap();
        let t = h.transpose();
        let mut cfg = ModelConfig::default();
        cfg.ta.num_layers = 0;
        assert!(Model::new(&h, &t, &[], cfg).is_err());
        let mut cfg = ModelConfig::default();
        cfg.ta.gamma = f64::NAN;
        assert!(Model::new(&h, &t, &[], cfg).is_err());
        let wrong = Hypergraph::from_memberships(3, 2, &[]).unwrap();
        assert!(Model::new(&h, &wrong, &[], ModelConfig::default()).is_err());
    }
}
