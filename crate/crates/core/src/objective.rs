//! Joint training objective over one minibatch.
//!
//! ```text
//! L = beta * L_rec + (1 - beta) * sum_t L_t + lambda * |params|^2
//! ```
//!
//! `L_rec` and each `L_t` are averaged over the terms in their batch, so the
//! balance `beta` is independent of batch sizes.

use crate::backward::{backward, GradientTape, OutputGrads};
use crate::error::{Error, Result};
use crate::losses::{au_loss_with_grad, sigmoid, softplus, LossKind};
use crate::matrix::{axpy_into, dot, EmbeddingMatrix};
use crate::model::{softmax, Activations, Model, Params};

/// Positive user-item pairs with their sampled negative items.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecBatch {
    pub pairs: Vec<(usize, usize)>,
    /// `negatives[p]` are the negatives drawn for `pairs[p]`.
    pub negatives: Vec<Vec<usize>>,
}

/// Training examples for one auxiliary task.
#[derive(Clone, Debug, PartialEq)]
pub enum AuxBatch {
    /// `(node, positive hyperedge, negative hyperedge)` ranking triples.
    Ranking(Vec<(usize, usize, usize)>),
    /// `(node, class)` examples for a non-unified attribute classifier.
    Classification(Vec<(usize, usize)>),
}

impl AuxBatch {
    pub fn len(&self) -> usize {
        match self {
            AuxBatch::Ranking(t) => t.len(),
            AuxBatch::Classification(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub rec: RecBatch,
    /// One entry per auxiliary task of the model.
    pub aux: Vec<AuxBatch>,
}

/// Which terms of the joint loss contribute. All enabled by default; tests
/// switch terms off to isolate their gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Terms {
    pub rec: bool,
    pub aux: bool,
    pub reg: bool,
}

impl Default for Terms {
    fn default() -> Self {
        Self {
            rec: true,
            aux: true,
            reg: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub rec_loss: LossKind,
    pub beta: f64,
    pub lambda: f64,
    pub uniformity_weight: f64,
    pub terms: Terms,
}

/// Loss value broken down by term (each already weighted).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub rec: f64,
    pub aux: f64,
    pub reg: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.rec + self.aux + self.reg
    }
}

impl Objective {
    pub fn new(rec_loss: LossKind, beta: f64, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidConfig(format!("beta must lie in [0, 1], got {beta}")));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidConfig(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self {
            rec_loss,
            beta,
            lambda,
            uniformity_weight: 1.0,
            terms: Terms::default(),
        })
    }

    /// Loss only.
    pub fn loss(&self, model: &Model<'_>, params: &Params, batch: &Batch) -> Result<f64> {
        let acts = model.forward(params)?;
        let mut head_grads = params.zeros_like();
        let (breakdown, _) = self.output_terms(model, params, &acts, batch, &mut head_grads)?;
        Ok(breakdown.total())
    }

    /// Loss, gradients for every parameter block, and the forward activations.
    pub fn loss_and_grad(
        &self,
        model: &Model<'_>,
        params: &Params,
        batch: &Batch,
    ) -> Result<(LossBreakdown, GradientTape, Activations)> {
        let acts = model.forward(params)?;
        let mut tape = GradientTape::zeros_like(params);
        let (breakdown, out) = self.output_terms(model, params, &acts, batch, &mut tape.grads)?;
        backward(model, params, &acts, out, &mut tape)?;
        tape.scalar_loss = breakdown.total();
        Ok((breakdown, tape, acts))
    }

    /// Evaluates every loss term on the forward outputs; returns the output
    /// gradients and writes classifier-head and regularization gradients
    /// directly into `param_grads`.
    fn output_terms(
        &self,
        model: &Model<'_>,
        params: &Params,
        acts: &Activations,
        batch: &Batch,
        param_grads: &mut Params,
    ) -> Result<(LossBreakdown, OutputGrads)> {
        if batch.aux.len() != model.aux.len() {
            return Err(Error::DimensionMismatch {
                context: "auxiliary batches",
                expected: model.aux.len(),
                actual: batch.aux.len(),
            });
        }
        let mut out = OutputGrads::zeros(acts);
        let mut breakdown = LossBreakdown::default();

        if self.terms.rec {
            breakdown.rec = self.rec_term(acts, &batch.rec, self.beta, &mut out)?;
        }
        if self.terms.aux {
            let weight = 1.0 - self.beta;
            for (t, aux_batch) in batch.aux.iter().enumerate() {
                if aux_batch.is_empty() {
                    continue;
                }
                let scale = weight / aux_batch.len() as f64;
                breakdown.aux += match aux_batch {
                    AuxBatch::Ranking(triples) => ranking_term(acts, &mut out, t, triples, scale)?,
                    AuxBatch::Classification(examples) => {
                        let task = &model.aux[t];
                        let head = params.attribute_heads[t].as_ref().ok_or_else(|| {
                            Error::InvalidInput(format!("task `{}` has no classifier head", task.task_id))
                        })?;
                        let d_head = param_grads.attribute_heads[t].as_mut().expect("head gradient slot");
                        let (rows, d_rows) = match task.side {
                            crate::tasks::NodeSide::Users => (acts.user_out(), &mut out.user_out),
                            crate::tasks::NodeSide::Items => (acts.item_out(), &mut out.item_out),
                        };
                        classification_term(head, rows, examples, scale, d_head, d_rows)
                    }
                };
            }
        }
        if self.terms.reg && self.lambda > 0.0 {
            breakdown.reg = self.lambda * params.squared_norm();
            for ((_, g), (_, p)) in param_grads.blocks_mut().into_iter().zip(params.blocks()) {
                axpy_into(g.as_mut_slice(), 2.0 * self.lambda, p.as_slice());
            }
        }
        Ok((breakdown, out))
    }

    fn rec_term(&self, acts: &Activations, rec: &RecBatch, weight: f64, out: &mut OutputGrads) -> Result<f64> {
        let fu = acts.user_out();
        let fi = acts.item_out();
        let du = &mut out.user_out;
        let di = &mut out.item_out;
        if rec.pairs.is_empty() {
            return Ok(0.0);
        }
        let value = match self.rec_loss {
            LossKind::Alignment => {
                let scale = weight / rec.pairs.len() as f64;
                let mut sum = 0.0;
                for &(u, i) in &rec.pairs {
                    let diff: Vec<f64> = fu.row(u).iter().zip(fi.row(i)).map(|(a, b)| a - b).collect();
                    sum += dot(&diff, &diff);
                    axpy_into(du.row_mut(u), 2.0 * scale, &diff);
                    axpy_into(di.row_mut(i), -2.0 * scale, &diff);
                }
                sum * scale
            }
            LossKind::Bpr => {
                if rec.negatives.len() != rec.pairs.len() {
                    return Err(Error::DimensionMismatch {
                        context: "BPR negatives",
                        expected: rec.pairs.len(),
                        actual: rec.negatives.len(),
                    });
                }
                let count: usize = rec.negatives.iter().map(Vec::len).sum();
                if count == 0 {
                    return Ok(0.0);
                }
                let scale = weight / count as f64;
                let mut sum = 0.0;
                for (&(u, i), negs) in rec.pairs.iter().zip(&rec.negatives) {
                    for &j in negs {
                        let diff: Vec<f64> = fi.row(i).iter().zip(fi.row(j)).map(|(a, b)| a - b).collect();
                        let x = dot(fu.row(u), &diff);
                        sum += softplus(-x);
                        let g = -sigmoid(-x) * scale;
                        axpy_into(du.row_mut(u), g, &diff);
                        axpy_into(di.row_mut(i), g, fu.row(u));
                        axpy_into(di.row_mut(j), -g, fu.row(u));
                    }
                }
                sum * scale
            }
            LossKind::BprPos => {
                let scale = weight / rec.pairs.len() as f64;
                let mut sum = 0.0;
                for &(u, i) in &rec.pairs {
                    let x = dot(fu.row(u), fi.row(i));
                    sum += softplus(-x);
                    let g = -sigmoid(-x) * scale;
                    axpy_into(du.row_mut(u), g, fi.row(i));
                    axpy_into(di.row_mut(i), g, fu.row(u));
                }
                sum * scale
            }
            LossKind::Au => {
                let mut users: Vec<usize> = rec.pairs.iter().map(|p| p.0).collect();
                users.sort_unstable();
                users.dedup();
                let mut items: Vec<usize> = rec.pairs.iter().map(|p| p.1).collect();
                items.sort_unstable();
                items.dedup();
                let (value, gu, gi) =
                    au_loss_with_grad(fu, fi, &rec.pairs, &users, &items, self.uniformity_weight);
                axpy_into(du.as_mut_slice(), weight, gu.as_slice());
                axpy_into(di.as_mut_slice(), weight, gi.as_slice());
                weight * value
            }
        };
        Ok(value)
    }
}

fn ranking_term(
    acts: &Activations,
    out: &mut OutputGrads,
    t: usize,
    triples: &[(usize, usize, usize)],
    scale: f64,
) -> Result<f64> {
    let enc = acts.aux[t]
        .as_ref()
        .ok_or_else(|| Error::InvalidInput(format!("auxiliary task {t} is not encoded")))?;
    let nodes = enc.node_emb();
    let edges = enc.edge_emb();
    let d_nodes = out.aux_node[t].as_mut().expect("encoded task slot");
    let d_edges = out.aux_edge[t].as_mut().expect("encoded task slot");
    let mut sum = 0.0;
    for &(v, pos, neg) in triples {
        let diff: Vec<f64> = edges.row(pos).iter().zip(edges.row(neg)).map(|(a, b)| a - b).collect();
        let x = dot(nodes.row(v), &diff);
        sum += softplus(-x);
        let g = -sigmoid(-x) * scale;
        axpy_into(d_nodes.row_mut(v), g, &diff);
        axpy_into(d_edges.row_mut(pos), g, nodes.row(v));
        axpy_into(d_edges.row_mut(neg), -g, nodes.row(v));
    }
    Ok(sum * scale)
}

/// Softmax cross-entropy of a linear classifier over `rows`.
fn classification_term(
    head: &EmbeddingMatrix,
    rows: &EmbeddingMatrix,
    examples: &[(usize, usize)],
    scale: f64,
    d_head: &mut EmbeddingMatrix,
    d_rows: &mut EmbeddingMatrix,
) -> f64 {
    let mut sum = 0.0;
    for &(v, class) in examples {
        let x = rows.row(v);
        let logits: Vec<f64> = head.iter_rows().map(|w| dot(w, x)).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        sum += log_norm - logits[class];
        let p = softmax(&logits);
        for (k, pk) in p.iter().enumerate() {
            let g = (pk - if k == class { 1.0 } else { 0.0 }) * scale;
            axpy_into(d_head.row_mut(k), g, x);
            axpy_into(d_rows.row_mut(v), g, head.row(k));
        }
    }
    sum * scale
}
