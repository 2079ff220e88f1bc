//! Sparse binary hypergraphs and mean-aggregation convolution.
//!
//! A [`Hypergraph`] stores its incidence matrix twice: a compressed row view
//! (node -> incident hyperedges) and a compressed column view (hyperedge ->
//! member nodes). Both are built once and never mutated, so a hypergraph can
//! be shared freely across threads.
//!
//! Convolution is the two-step mean aggregation
//!
//! ```text
//! E_edge = deg_edge^-1 H^T E_node
//! E_node' = deg_node^-1 H E_edge
//! ```
//!
//! with no learned weights. Entities of degree zero aggregate to the zero
//! vector. Every output row is summed over its neighbours in ascending index
//! order, so parallel evaluation is bit-identical to sequential evaluation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;

/// Row count below which aggregation runs on the calling thread.
const PARALLEL_ROWS: usize = 512;

/// Compressed adjacency: `offsets[r]..offsets[r + 1]` indexes `indices`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Compressed {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl Compressed {
    fn build(num_rows: usize, pairs: &[(usize, usize)]) -> Self {
        let mut offsets = vec![0usize; num_rows + 1];
        for &(r, _) in pairs {
            offsets[r + 1] += 1;
        }
        for r in 0..num_rows {
            offsets[r + 1] += offsets[r];
        }
        let mut cursor = offsets.clone();
        let mut indices = vec![0usize; pairs.len()];
        for &(r, c) in pairs {
            indices[cursor[r]] = c;
            cursor[r] += 1;
        }
        for r in 0..num_rows {
            indices[offsets[r]..offsets[r + 1]].sort_unstable();
        }
        Self { offsets, indices }
    }

    #[inline]
    fn neighbours(&self, r: usize) -> &[usize] {
        &self.indices[self.offsets[r]..self.offsets[r + 1]]
    }

    #[inline]
    fn degree(&self, r: usize) -> usize {
        self.offsets[r + 1] - self.offsets[r]
    }
}

/// Binary incidence structure with rows = nodes and columns = hyperedges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypergraph {
    num_nodes: usize,
    num_hyperedges: usize,
    by_node: Compressed,
    by_edge: Compressed,
}

impl Hypergraph {
    /// Builds a hypergraph from `(node, hyperedge)` memberships.
    ///
    /// Duplicate memberships collapse to a single incidence.
    pub fn from_memberships(
        num_nodes: usize,
        num_hyperedges: usize,
        memberships: &[(usize, usize)],
    ) -> Result<Self> {
        let mut pairs = Vec::with_capacity(memberships.len());
        for &(node, hyperedge) in memberships {
            if node >= num_nodes || hyperedge >= num_hyperedges {
                return Err(Error::MembershipOutOfRange {
                    node,
                    hyperedge,
                    num_nodes,
                    num_hyperedges,
                });
            }
            pairs.push((node, hyperedge));
        }
        pairs.sort_unstable();
        pairs.dedup();
        let by_node = Compressed::build(num_nodes, &pairs);
        let transposed: Vec<(usize, usize)> = pairs.iter().map(|&(v, e)| (e, v)).collect();
        let by_edge = Compressed::build(num_hyperedges, &transposed);
        Ok(Self {
            num_nodes,
            num_hyperedges,
            by_node,
            by_edge,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_hyperedges(&self) -> usize {
        self.num_hyperedges
    }

    /// Number of nonzero incidences.
    pub fn nnz(&self) -> usize {
        self.by_node.indices.len()
    }

    pub fn node_degree(&self, node: usize) -> usize {
        self.by_node.degree(node)
    }

    pub fn hyperedge_degree(&self, hyperedge: usize) -> usize {
        self.by_edge.degree(hyperedge)
    }

    pub fn node_degrees(&self) -> Vec<usize> {
        (0..self.num_nodes).map(|v| self.node_degree(v)).collect()
    }

    pub fn hyperedge_degrees(&self) -> Vec<usize> {
        (0..self.num_hyperedges)
            .map(|e| self.hyperedge_degree(e))
            .collect()
    }

    /// Hyperedges incident to `node`, ascending.
    pub fn edges_of(&self, node: usize) -> &[usize] {
        self.by_node.neighbours(node)
    }

    /// Nodes belonging to `hyperedge`, ascending.
    pub fn nodes_of(&self, hyperedge: usize) -> &[usize] {
        self.by_edge.neighbours(hyperedge)
    }

    pub fn contains(&self, node: usize, hyperedge: usize) -> bool {
        self.edges_of(node).binary_search(&hyperedge).is_ok()
    }

    /// All incidences as `(node, hyperedge)`, sorted by node then hyperedge.
    pub fn memberships(&self) -> Vec<(usize, usize)> {
        (0..self.num_nodes)
            .flat_map(|v| self.edges_of(v).iter().map(move |&e| (v, e)))
            .collect()
    }

    /// The same incidence with the roles of nodes and hyperedges swapped.
    pub fn transpose(&self) -> Hypergraph {
        Hypergraph {
            num_nodes: self.num_hyperedges,
            num_hyperedges: self.num_nodes,
            by_node: self.by_edge.clone(),
            by_edge: self.by_node.clone(),
        }
    }

    /// Dense 0/1 incidence matrix, mainly for tests and debugging.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.num_hyperedges]; self.num_nodes];
        for (v, e) in self.memberships() {
            dense[v][e] = 1.0;
        }
        dense
    }

    /// Row `e` of the output is the mean of the embeddings of the nodes in `e`.
    pub fn aggregate_nodes_to_hyperedges(
        &self,
        node_emb: &EmbeddingMatrix,
    ) -> Result<EmbeddingMatrix> {
        check_rows("node embeddings", self.num_nodes, node_emb)?;
        Ok(mean_gather(&self.by_edge, self.num_hyperedges, node_emb))
    }

    /// Row `v` of the output is the mean of the embeddings of the hyperedges of `v`.
    pub fn aggregate_hyperedges_to_nodes(
        &self,
        edge_emb: &EmbeddingMatrix,
    ) -> Result<EmbeddingMatrix> {
        check_rows("hyperedge embeddings", self.num_hyperedges, edge_emb)?;
        Ok(mean_gather(&self.by_node, self.num_nodes, edge_emb))
    }

    /// One convolution layer: nodes -> hyperedges -> nodes.
    pub fn convolve(&self, node_emb: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        let edges = self.aggregate_nodes_to_hyperedges(node_emb)?;
        self.aggregate_hyperedges_to_nodes(&edges)
    }

    /// Adjoint of [`Self::aggregate_nodes_to_hyperedges`]: maps a gradient on
    /// hyperedge rows back onto node rows.
    pub fn nodes_to_hyperedges_adjoint(
        &self,
        edge_grad: &EmbeddingMatrix,
    ) -> Result<EmbeddingMatrix> {
        check_rows("hyperedge gradient", self.num_hyperedges, edge_grad)?;
        let scale: Vec<f64> = (0..self.num_hyperedges)
            .map(|e| inverse_degree(self.hyperedge_degree(e)))
            .collect();
        Ok(scaled_gather(&self.by_node, self.num_nodes, edge_grad, &scale))
    }

    /// Adjoint of [`Self::aggregate_hyperedges_to_nodes`].
    pub fn hyperedges_to_nodes_adjoint(
        &self,
        node_grad: &EmbeddingMatrix,
    ) -> Result<EmbeddingMatrix> {
        check_rows("node gradient", self.num_nodes, node_grad)?;
        let scale: Vec<f64> = (0..self.num_nodes)
            .map(|v| inverse_degree(self.node_degree(v)))
            .collect();
        Ok(scaled_gather(&self.by_edge, self.num_hyperedges, node_grad, &scale))
    }
}

fn check_rows(context: &'static str, expected: usize, m: &EmbeddingMatrix) -> Result<()> {
    if m.rows() != expected {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual: m.rows(),
        });
    }
    Ok(())
}

#[inline]
fn inverse_degree(degree: usize) -> f64 {
    if degree == 0 {
        0.0
    } else {
        1.0 / degree as f64
    }
}

fn for_each_row(out: &mut EmbeddingMatrix, f: impl Fn(usize, &mut [f64]) + Sync) {
    let dim = out.dim();
    if dim == 0 {
        return;
    }
    let rows = out.rows();
    let slice = out.as_mut_slice();
    if rows >= PARALLEL_ROWS {
        slice
            .par_chunks_mut(dim)
            .enumerate()
            .for_each(|(r, row)| f(r, row));
    } else {
        slice
            .chunks_mut(dim)
            .enumerate()
            .for_each(|(r, row)| f(r, row));
    }
}

/// `out[r] = mean(src[c] for c in adjacency(r))`; empty rows stay zero.
fn mean_gather(adj: &Compressed, rows: usize, src: &EmbeddingMatrix) -> EmbeddingMatrix {
    let mut out = EmbeddingMatrix::zeros(rows, src.dim());
    for_each_row(&mut out, |r, row| {
        let neighbours = adj.neighbours(r);
        if neighbours.is_empty() {
            return;
        }
        for &c in neighbours {
            for (o, v) in row.iter_mut().zip(src.row(c)) {
                *o += v;
            }
        }
        let n = neighbours.len() as f64;
        for o in row.iter_mut() {
            *o /= n;
        }
    });
    out
}

/// `out[r] = sum(scale[c] * src[c] for c in adjacency(r))`.
fn scaled_gather(
    adj: &Compressed,
    rows: usize,
    src: &EmbeddingMatrix,
    scale: &[f64],
) -> EmbeddingMatrix {
    let mut out = EmbeddingMatrix::zeros(rows, src.dim());
    for_each_row(&mut out, |r, row| {
        for &c in adj.neighbours(r) {
            let s = scale[c];
            for (o, v) in row.iter_mut().zip(src.row(c)) {
                *o += s * v;
            }
        }
    });
    out
}
