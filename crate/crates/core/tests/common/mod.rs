//! Shared random-instance generators and independent oracles.
#![allow(dead_code)]

use hyperpretrain::losses::LossKind;
use hyperpretrain::matrix::EmbeddingMatrix;
use hyperpretrain::model::{EmbeddingTable, Model, ModelConfig, Params, TaConfig, TaVariant};
use hyperpretrain::objective::{AuxBatch, Batch, Objective, RecBatch};
use hyperpretrain::tasks::{build_recommendation_hypergraphs, NodeSide, TaskHypergraph, TaskKind};
use hyperpretrain::Hypergraph;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, dim: usize, scale: f64) -> EmbeddingMatrix {
    let normal = Normal::new(0.0, scale).unwrap();
    EmbeddingMatrix::from_vec(rows, dim, (0..rows * dim).map(|_| normal.sample(rng)).collect()).unwrap()
}

/// Random memberships of a `num_nodes x num_edges` incidence with density `p`.
pub fn random_memberships(rng: &mut ChaCha8Rng, num_nodes: usize, num_edges: usize, p: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for v in 0..num_nodes {
        for e in 0..num_edges {
            if rng.random::<f64>() < p {
                out.push((v, e));
            }
        }
    }
    out
}

/// Dense `Dv^-1 H De^-1 H^T X` built from the raw membership list.
pub fn dense_convolve(
    num_nodes: usize,
    num_edges: usize,
    memberships: &[(usize, usize)],
    x: &EmbeddingMatrix,
) -> EmbeddingMatrix {
    let mut h = vec![vec![0.0f64; num_edges]; num_nodes];
    for &(v, e) in memberships {
        h[v][e] = 1.0;
    }
    let dv: Vec<f64> = h.iter().map(|r| r.iter().sum()).collect();
    let de: Vec<f64> = (0..num_edges).map(|e| h.iter().map(|r| r[e]).sum()).collect();
    let inv = |d: f64| if d == 0.0 { 0.0 } else { 1.0 / d };
    let d = x.dim();
    // Y = De^-1 H^T X
    let mut y = vec![vec![0.0; d]; num_edges];
    for e in 0..num_edges {
        for v in 0..num_nodes {
            for k in 0..d {
                y[e][k] += h[v][e] * x.get(v, k);
            }
        }
        for k in 0..d {
            y[e][k] *= inv(de[e]);
        }
    }
    let mut out = EmbeddingMatrix::zeros(num_nodes, d);
    for v in 0..num_nodes {
        for k in 0..d {
            let s: f64 = (0..num_edges).map(|e| h[v][e] * y[e][k]).sum();
            out.set(v, k, inv(dv[v]) * s);
        }
    }
    out
}

/// Per-hyperedge loop form of one side's transitional attention stack:
/// hyperedge mean, scaled dot-product scores, softmax, weighted sum, tanh,
/// fusion with intensity `gamma`, and node mean — one hyperedge at a time.
pub fn ta_loop_oracle(
    members_of_edge: &[Vec<usize>],
    edges_of_node: &[Vec<usize>],
    input: &EmbeddingMatrix,
    sources: &[&EmbeddingMatrix],
    gamma: f64,
    layers: usize,
) -> EmbeddingMatrix {
    let d = input.dim();
    let mut x: Vec<Vec<f64>> = input.iter_rows().map(|r| r.to_vec()).collect();
    for _ in 0..layers {
        let mut q = Vec::with_capacity(members_of_edge.len());
        for (j, members) in members_of_edge.iter().enumerate() {
            let mut e = vec![0.0; d];
            for &v in members {
                for k in 0..d {
                    e[k] += x[v][k];
                }
            }
            if !members.is_empty() {
                for k in 0..d {
                    e[k] /= members.len() as f64;
                }
            }
            if sources.is_empty() {
                q.push(e);
                continue;
            }
            let scores: Vec<f64> = sources
                .iter()
                .map(|z| (0..d).map(|k| e[k] * z.get(j, k)).sum::<f64>() / (d as f64).sqrt())
                .collect();
            let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
            let total: f64 = exps.iter().sum();
            let mut fused = e.clone();
            for k in 0..d {
                let m: f64 = sources.iter().zip(&exps).map(|(z, w)| w / total * z.get(j, k)).sum();
                fused[k] += gamma * m.tanh();
            }
            q.push(fused);
        }
        for (v, edges) in edges_of_node.iter().enumerate() {
            let mut out = vec![0.0; d];
            for &j in edges {
                for k in 0..d {
                    out[k] += q[j][k];
                }
            }
            if !edges.is_empty() {
                for k in 0..d {
                    out[k] /= edges.len() as f64;
                }
            }
            x[v] = out;
        }
    }
    EmbeddingMatrix::from_rows(&x).unwrap()
}

/// A small random recommendation problem with auxiliary tasks.
pub struct Instance {
    pub num_users: usize,
    pub num_items: usize,
    pub dim: usize,
    pub edges: Vec<(usize, usize)>,
    pub user_graph: Hypergraph,
    pub item_graph: Hypergraph,
    pub aux: Vec<TaskHypergraph>,
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_nodes: usize, max_tasks: usize, max_dim: usize) -> Instance {
    let num_users = rng.random_range(2..=max_nodes);
    let num_items = rng.random_range(2..=max_nodes);
    let dim = rng.random_range(1..=max_dim);
    let density = rng.random_range(0.2..0.6);
    let mut edges = random_memberships(rng, num_users, num_items, density);
    if edges.is_empty() {
        edges.push((0, 0));
    }
    let (u, i) = build_recommendation_hypergraphs(num_users, num_items, &edges).unwrap();
    let num_tasks = rng.random_range(0..=max_tasks);
    let aux = (0..num_tasks)
        .map(|t| {
            let side = if rng.random::<bool>() { NodeSide::Users } else { NodeSide::Items };
            let kind = if rng.random::<bool>() {
                TaskKind::AttributePrediction
            } else {
                TaskKind::RelationPrediction
            };
            let nodes = match side {
                NodeSide::Users => num_users,
                NodeSide::Items => num_items,
            };
            let hyperedges = rng.random_range(2..=5);
            let mut members = random_memberships(rng, nodes, hyperedges, 0.4);
            if members.is_empty() {
                members.push((0, 0));
            }
            TaskHypergraph {
                task_id: format!("t{t}"),
                kind,
                side,
                graph: Hypergraph::from_memberships(nodes, hyperedges, &members).unwrap(),
                hyperedge_labels: None,
            }
        })
        .collect();
    Instance {
        num_users,
        num_items,
        dim,
        edges,
        user_graph: u.graph,
        item_graph: i.graph,
        aux,
    }
}

pub fn random_model_config(rng: &mut ChaCha8Rng) -> ModelConfig {
    ModelConfig {
        ta: TaConfig {
            gamma: rng.random_range(0.0..2.0),
            num_layers: rng.random_range(1..=2),
            variant: TaVariant::ALL[rng.random_range(0..4)],
        },
        aux_layers: rng.random_range(1..=2),
        unified_attributes: rng.random::<bool>(),
    }
}

pub fn random_params(rng: &mut ChaCha8Rng, model: &Model<'_>, dim: usize) -> Params {
    let table = EmbeddingTable {
        user_emb: random_matrix(rng, model.num_users(), dim, 0.7),
        item_emb: random_matrix(rng, model.num_items(), dim, 0.7),
    };
    model.init_params(table, rng.random()).unwrap()
}

pub fn random_batch(rng: &mut ChaCha8Rng, inst: &Instance, model: &Model<'_>) -> Batch {
    let n_pairs = rng.random_range(1..=6);
    let pairs: Vec<(usize, usize)> = (0..n_pairs).map(|_| inst.edges[rng.random_range(0..inst.edges.len())]).collect();
    let negatives = pairs
        .iter()
        .map(|_| (0..rng.random_range(1..=2)).map(|_| rng.random_range(0..inst.num_items)).collect())
        .collect();
    let aux = inst
        .aux
        .iter()
        .enumerate()
        .map(|(t, task)| {
            let n = rng.random_range(1..=4);
            let nodes = task.graph.num_nodes();
            let edges = task.graph.num_hyperedges();
            if model.is_encoded(t) {
                AuxBatch::Ranking(
                    (0..n)
                        .map(|_| {
                            (
                                rng.random_range(0..nodes),
                                rng.random_range(0..edges),
                                rng.random_range(0..edges),
                            )
                        })
                        .collect(),
                )
            } else {
                AuxBatch::Classification(
                    (0..n)
                        .map(|_| (rng.random_range(0..nodes), rng.random_range(0..edges)))
                        .collect(),
                )
            }
        })
        .collect();
    Batch {
        rec: RecBatch { pairs, negatives },
        aux,
    }
}

pub fn random_objective(rng: &mut ChaCha8Rng, loss: LossKind) -> Objective {
    let mut o = Objective::new(loss, rng.random_range(0.0..=1.0), rng.random_range(0.0..0.1)).unwrap();
    o.uniformity_weight = rng.random_range(0.1..2.0);
    o
}

/// Worst mismatch between the analytic gradient and central differences.
#[derive(Debug, Default)]
pub struct GradCheck {
    pub entries: usize,
    pub failures: Vec<String>,
    pub worst_relative: f64,
}

pub fn gradient_check(model: &Model<'_>, params: &Params, objective: &Objective, batch: &Batch, h: f64) -> GradCheck {
    let (_, tape, _) = objective.loss_and_grad(model, params, batch).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = tape
        .grads
        .blocks()
        .into_iter()
        .map(|(name, m)| (name, m.as_slice().to_vec()))
        .collect();
    let mut report = GradCheck::default();
    for (b, (name, grad)) in analytic.iter().enumerate() {
        for (k, &a) in grad.iter().enumerate() {
            let eval = |delta: f64| {
                let mut p = params.clone();
                p.blocks_mut()[b].1.as_mut_slice()[k] += delta;
                objective.loss(model, &p, batch).unwrap()
            };
            let n = (eval(h) - eval(-h)) / (2.0 * h);
            report.entries += 1;
            let diff = (a - n).abs();
            let scale = a.abs().max(n.abs());
            if diff > 1e-7 {
                report.worst_relative = report.worst_relative.max(diff / scale);
            }
            if diff > 1e-7 && diff > 1e-4 * scale {
                report.failures.push(format!("{name}[{k}]: analytic {a:e}, numeric {n:e}"));
            }
        }
    }
    report
}
