//! Reverse pass over the fixed forward graph.
//!
//! Gradients arrive on the model outputs (final TA rows of both sides, and
//! node/hyperedge embeddings of each auxiliary encoder) and are pushed back
//! through the TA layers and auxiliary encoders onto the parameter blocks.

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::matrix::{axpy_into, dot, EmbeddingMatrix};
use crate::model::{Activations, AuxEncoding, Model, Params, TaConfig, TaTrace, TaVariant};
use crate::tasks::NodeSide;

/// Gradients with respect to every parameter block, plus the loss they belong to.
#[derive(Clone, Debug)]
pub struct GradientTape {
    pub grads: Params,
    pub scalar_loss: f64,
}

impl GradientTape {
    pub fn zeros_like(params: &Params) -> Self {
        Self {
            grads: params.zeros_like(),
            scalar_loss: 0.0,
        }
    }

    pub fn grad_user(&self) -> &EmbeddingMatrix {
        &self.grads.table.user_emb
    }

    pub fn grad_item(&self) -> &EmbeddingMatrix {
        &self.grads.table.item_emb
    }

    pub fn is_finite(&self) -> bool {
        self.scalar_loss.is_finite() && self.grads.blocks().iter().all(|(_, m)| m.is_finite())
    }
}

/// Loss gradients with respect to forward outputs.
#[derive(Clone, Debug)]
pub struct OutputGrads {
    pub user_out: EmbeddingMatrix,
    pub item_out: EmbeddingMatrix,
    /// Per auxiliary task, gradient on the final node embeddings.
    pub aux_node: Vec<Option<EmbeddingMatrix>>,
    /// Per auxiliary task, gradient on the final hyperedge embeddings.
    pub aux_edge: Vec<Option<EmbeddingMatrix>>,
}

impl OutputGrads {
    pub fn zeros(acts: &Activations) -> Self {
        let like = |m: &EmbeddingMatrix| EmbeddingMatrix::zeros(m.rows(), m.dim());
        Self {
            user_out: like(acts.user_out()),
            item_out: like(acts.item_out()),
            aux_node: acts
                .aux
                .iter()
                .map(|a| a.as_ref().map(|e| like(e.node_emb())))
                .collect(),
            aux_edge: acts
                .aux
                .iter()
                .map(|a| a.as_ref().map(|e| like(e.edge_emb())))
                .collect(),
        }
    }
}

/// Gradients leaving one TA side.
pub struct TaGrads {
    pub input: EmbeddingMatrix,
    pub sources: Vec<EmbeddingMatrix>,
    pub mixer: Option<EmbeddingMatrix>,
}

/// Adjoint of [`crate::model::ta_forward`].
pub fn ta_backward(
    graph: &Hypergraph,
    trace: &TaTrace,
    sources: &[&EmbeddingMatrix],
    cfg: &TaConfig,
    mixer: Option<&EmbeddingMatrix>,
    d_output: &EmbeddingMatrix,
) -> Result<TaGrads> {
    let dim = d_output.dim();
    let inv_sqrt_d = 1.0 / (dim as f64).sqrt();
    let mut d_sources: Vec<EmbeddingMatrix> = sources
        .iter()
        .map(|z| EmbeddingMatrix::zeros(z.rows(), z.dim()))
        .collect();
    let mut d_mixer = mixer.map(|w| EmbeddingMatrix::zeros(w.rows(), w.dim()));
    let mut d_out = d_output.clone();

    for layer in trace.layers.iter().rev() {
        // gradient on the fused hyperedges, which also flows straight into e
        let d_fused = graph.hyperedges_to_nodes_adjoint(&d_out)?;
        let mut d_edge = d_fused.clone();
        if let Some(act) = &layer.activation {
            let n_edges = d_fused.rows();
            let mut d_mixed = EmbeddingMatrix::zeros(n_edges, dim);
            for j in 0..n_edges {
                for ((dm, a), dq) in d_mixed
                    .row_mut(j)
                    .iter_mut()
                    .zip(act.row(j))
                    .zip(d_fused.row(j))
                {
                    *dm = cfg.gamma * dq * (1.0 - a * a);
                }
            }
            match cfg.variant {
                TaVariant::Full => {
                    let alpha = layer.alpha.as_ref().ok_or_else(|| {
                        Error::InvalidInput("attention weights missing from forward trace".into())
                    })?;
                    let t_count = sources.len();
                    let mut g = vec![0.0; t_count];
                    for j in 0..n_edges {
                        let dm = d_mixed.row(j);
                        let a = alpha.row(j);
                        for (t, z) in sources.iter().enumerate() {
                            g[t] = dot(dm, z.row(j));
                        }
                        let g_bar: f64 = a.iter().zip(&g).map(|(x, y)| x * y).sum();
                        let e_row = layer.edge.row(j).to_vec();
                        for (t, z) in sources.iter().enumerate() {
                            let ds = a[t] * (g[t] - g_bar) * inv_sqrt_d;
                            let dz = d_sources[t].row_mut(j);
                            axpy_into(dz, a[t], dm);
                            axpy_into(dz, ds, &e_row);
                            axpy_into(d_edge.row_mut(j), ds, z.row(j));
                        }
                    }
                }
                TaVariant::Sum => {
                    let w = 1.0 / sources.len() as f64;
                    for dz in &mut d_sources {
                        for j in 0..n_edges {
                            axpy_into(dz.row_mut(j), w, d_mixed.row(j));
                        }
                    }
                }
                TaVariant::Concat => {
                    let w = mixer.ok_or_else(|| {
                        Error::InvalidInput("concat variant requires a mixer".into())
                    })?;
                    let dw = d_mixer.as_mut().expect("mixer present");
                    for j in 0..n_edges {
                        let dm = d_mixed.row(j);
                        for (r, &g) in dm.iter().enumerate() {
                            if g == 0.0 {
                                continue;
                            }
                            let w_row = w.row(r);
                            let dw_row = dw.row_mut(r);
                            for (t, z) in sources.iter().enumerate() {
                                let block = t * dim..(t + 1) * dim;
                                axpy_into(&mut dw_row[block.clone()], g, z.row(j));
                                axpy_into(d_sources[t].row_mut(j), g, &w_row[block]);
                            }
                        }
                    }
                }
                TaVariant::NoTa => {}
            }
        }
        d_out = graph.nodes_to_hyperedges_adjoint(&d_edge)?;
    }
    Ok(TaGrads {
        input: d_out,
        sources: d_sources,
        mixer: d_mixer,
    })
}

/// Adjoint of [`crate::model::encode_auxiliary_task`]; returns the gradient
/// on the encoder input.
pub fn aux_backward(
    graph: &Hypergraph,
    encoding: &AuxEncoding,
    d_node: &EmbeddingMatrix,
    d_edge: &EmbeddingMatrix,
) -> Result<EmbeddingMatrix> {
    let last = encoding.layers.len() - 1;
    let mut d_nodes = d_node.clone();
    for k in (0..encoding.layers.len()).rev() {
        let mut d_e = graph.hyperedges_to_nodes_adjoint(&d_nodes)?;
        if k == last {
            d_e.add_assign(d_edge);
        }
        d_nodes = graph.nodes_to_hyperedges_adjoint(&d_e)?;
    }
    Ok(d_nodes)
}

/// Pushes output gradients back onto the parameter blocks, accumulating into `tape`.
pub fn backward(
    model: &Model<'_>,
    params: &Params,
    acts: &Activations,
    out: OutputGrads,
    tape: &mut GradientTape,
) -> Result<()> {
    let OutputGrads {
        user_out,
        item_out,
        mut aux_node,
        aux_edge,
    } = out;

    for (side, d_out) in [(NodeSide::Users, user_out), (NodeSide::Items, item_out)] {
        let src_ids = model.sources(side);
        let sources: Vec<&EmbeddingMatrix> = src_ids
            .iter()
            .map(|&t| {
                acts.aux[t]
                    .as_ref()
                    .map(AuxEncoding::node_emb)
                    .ok_or_else(|| Error::InvalidInput(format!("auxiliary task {t} was not encoded")))
            })
            .collect::<Result<_>>()?;
        let mixer = match side {
            NodeSide::Users => params.user_mixer.as_ref(),
            NodeSide::Items => params.item_mixer.as_ref(),
        };
        let grads = ta_backward(
            model.side_graph(side),
            acts.side(side),
            &sources,
            &model.config.ta,
            mixer,
            &d_out,
        )?;
        tape.grads.table.side_mut(side).add_assign(&grads.input);
        for (&t, dz) in src_ids.iter().zip(&grads.sources) {
            aux_node[t]
                .as_mut()
                .expect("encoded task has a node gradient slot")
                .add_assign(dz);
        }
        if let Some(dw) = grads.mixer {
            let slot = match side {
                NodeSide::Users => tape.grads.user_mixer.as_mut(),
                NodeSide::Items => tape.grads.item_mixer.as_mut(),
            };
            slot.expect("mixer gradient slot").add_assign(&dw);
        }
    }

    for (t, task) in model.aux.iter().enumerate() {
        let (Some(encoding), Some(d_node), Some(d_edge)) = (&acts.aux[t], &aux_node[t], &aux_edge[t]) else {
            continue;
        };
        let d_input = aux_backward(&task.graph, encoding, d_node, d_edge)?;
        tape.grads.table.side_mut(task.side).add_assign(&d_input);
    }
    Ok(())
}
