//! Scalar loss functions.
//!
//! All logistic terms use the overflow-free `softplus` form, so BPR losses
//! stay finite for arbitrarily negative margins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, EmbeddingMatrix};
use crate::model::EmbeddingTable;

/// Recommendation-loss choice for a training stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Alignment,
    Bpr,
    BprPos,
    Au,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Alignment, LossKind::Bpr, LossKind::BprPos, LossKind::Au];

    pub fn label(self) -> &'static str {
        match self {
            LossKind::Alignment => "align",
            LossKind::Bpr => "bpr",
            LossKind::BprPos => "bpr_pos",
            LossKind::Au => "au",
        }
    }

    /// Whether the loss consumes sampled negative items.
    pub fn uses_negatives(self) -> bool {
        self == LossKind::Bpr
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "align" | "alignment" => Ok(LossKind::Alignment),
            "bpr" => Ok(LossKind::Bpr),
            "bpr_pos" | "bprpos" | "bpr-pos" => Ok(LossKind::BprPos),
            "au" => Ok(LossKind::Au),
            other => Err(format!("unknown loss `{other}` (expected align, bpr, bpr_pos, au)")),
        }
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function without overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn non_empty<T>(batch: &[T], what: &str) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidInput(format!("{what} needs a non-empty batch")));
    }
    Ok(())
}

/// Sum of squared distances between paired user and item rows.
pub fn alignment_loss(pairs: &[(&[f64], &[f64])]) -> Result<f64> {
    non_empty(pairs, "alignment loss")?;
    Ok(pairs
        .iter()
        .map(|(u, i)| u.iter().zip(i.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum())
}

/// `sum -ln sigmoid(pos - neg)` over `(pos, neg)` score pairs.
pub fn bpr_loss(scores: &[(f64, f64)]) -> Result<f64> {
    non_empty(scores, "BPR loss")?;
    Ok(scores.iter().map(|(p, n)| softplus(n - p)).sum())
}

/// `sum -ln sigmoid(pos)`: BPR restricted to positive pairs.
pub fn bpr_pos_loss(scores: &[f64]) -> Result<f64> {
    non_empty(scores, "BPR-pos loss")?;
    Ok(scores.iter().map(|p| softplus(-p)).sum())
}

/// Alignment-and-uniformity loss over L2-normalized rows.
///
/// `pairs` index `users`/`items`; uniformity is computed over every row of
/// each matrix.
pub fn au_loss(
    pairs: &[(usize, usize)],
    users: &EmbeddingMatrix,
    items: &EmbeddingMatrix,
    uniformity_weight: f64,
) -> Result<f64> {
    non_empty(pairs, "AU loss")?;
    let user_set: Vec<usize> = (0..users.rows()).collect();
    let item_set: Vec<usize> = (0..items.rows()).collect();
    Ok(au_loss_with_grad(users, items, pairs, &user_set, &item_set, uniformity_weight).0)
}

const NORM_FLOOR: f64 = 1e-12;

fn normalized(row: &[f64]) -> (Vec<f64>, f64) {
    let norm = dot(row, row).sqrt().max(NORM_FLOOR);
    (row.iter().map(|v| v / norm).collect(), norm)
}

/// Gradient of `f(x / |x|)` given `g = df/dx_hat`.
fn normalize_adjoint(x_hat: &[f64], norm: f64, g: &[f64]) -> Vec<f64> {
    if norm <= NORM_FLOOR {
        return g.iter().map(|v| v / norm).collect();
    }
    let proj = dot(x_hat, g);
    g.iter().zip(x_hat).map(|(gi, xi)| (gi - xi * proj) / norm).collect()
}

/// `log mean_{a<b} exp(-2 |x_a - x_b|^2)` and its gradient w.r.t. the
/// normalized rows. Sets with fewer than two rows contribute 0.
fn uniformity(rows: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
    let m = rows.len();
    let mut grads = vec![vec![0.0; rows.first().map_or(0, Vec::len)]; m];
    if m < 2 {
        return (0.0, grads);
    }
    let mut exps = Vec::with_capacity(m * (m - 1) / 2);
    for a in 0..m {
        for b in a + 1..m {
            let d: f64 = rows[a].iter().zip(&rows[b]).map(|(x, y)| (x - y) * (x - y)).sum();
            exps.push(-2.0 * d);
        }
    }
    let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = exps.iter().map(|e| (e - max).exp()).sum();
    let value = max + total.ln() - (exps.len() as f64).ln();
    let mut k = 0;
    for a in 0..m {
        for b in a + 1..m {
            let w = (exps[k] - max).exp() / total;
            k += 1;
            for c in 0..rows[a].len() {
                let g = -4.0 * w * (rows[a][c] - rows[b][c]);
                grads[a][c] += g;
                grads[b][c] -= g;
            }
        }
    }
    (value, grads)
}

/// AU loss and its gradients with respect to the raw (unnormalized) rows.
///
/// Alignment is the mean over `pairs`; uniformity is computed over
/// `user_set` and `item_set` separately and averaged.
pub fn au_loss_with_grad(
    users: &EmbeddingMatrix,
    items: &EmbeddingMatrix,
    pairs: &[(usize, usize)],
    user_set: &[usize],
    item_set: &[usize],
    uniformity_weight: f64,
) -> (f64, EmbeddingMatrix, EmbeddingMatrix) {
    let mut d_users = EmbeddingMatrix::zeros(users.rows(), users.dim());
    let mut d_items = EmbeddingMatrix::zeros(items.rows(), items.dim());

    let mut align = 0.0;
    let scale = 1.0 / pairs.len().max(1) as f64;
    for &(u, i) in pairs {
        let (uh, un) = normalized(users.row(u));
        let (ih, inorm) = normalized(items.row(i));
        let diff: Vec<f64> = uh.iter().zip(&ih).map(|(a, b)| a - b).collect();
        align += dot(&diff, &diff) * scale;
        let g: Vec<f64> = diff.iter().map(|v| 2.0 * scale * v).collect();
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        for (o, v) in d_users.row_mut(u).iter_mut().zip(normalize_adjoint(&uh, un, &g)) {
            *o += v;
        }
        for (o, v) in d_items.row_mut(i).iter_mut().zip(normalize_adjoint(&ih, inorm, &neg)) {
            *o += v;
        }
    }

    let mut uniform = 0.0;
    for (set, src, grad) in [(user_set, users, &mut d_users), (item_set, items, &mut d_items)] {
        let normed: Vec<(Vec<f64>, f64)> = set.iter().map(|&r| normalized(src.row(r))).collect();
        let hats: Vec<Vec<f64>> = normed.iter().map(|(h, _)| h.clone()).collect();
        let (value, g_hat) = uniformity(&hats);
        uniform += 0.5 * value;
        let w = 0.5 * uniformity_weight;
        for ((&r, (h, n)), g) in set.iter().zip(&normed).zip(g_hat) {
            let scaled: Vec<f64> = g.iter().map(|v| w * v).collect();
            for (o, v) in grad.row_mut(r).iter_mut().zip(normalize_adjoint(h, *n, &scaled)) {
                *o += v;
            }
        }
    }
    (align + uniformity_weight * uniform, d_users, d_items)
}

/// Weighted joint objective: `beta * rec + (1 - beta) * sum(aux) + lambda * |Theta|^2`.
pub fn joint_loss(rec: f64, aux: &[f64], beta: f64, lambda: f64, table: &EmbeddingTable) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidConfig(format!("beta must lie in [0, 1], got {beta}")));
    }
    let reg = table.user_emb.squared_norm() + table.item_emb.squared_norm();
    Ok(beta * rec + (1.0 - beta) * aux.iter().sum::<f64>() + lambda * reg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alignment_examples() {
        assert_eq!(alignment_loss(&[(&[0.3, 0.4], &[0.3, 0.4])]).unwrap(), 0.0);
        assert_eq!(alignment_loss(&[(&[1.0, 0.0], &[0.0, 1.0])]).unwrap(), 2.0);
        let base = alignment_loss(&[(&[1.0, 2.0], &[-0.5, 0.25]), (&[0.1, 0.2], &[0.3, 0.0])]).unwrap();
        let doubled = alignment_loss(&[(&[2.0, 4.0], &[-1.0, 0.5]), (&[0.2, 0.4], &[0.6, 0.0])]).unwrap();
        assert!((doubled - 4.0 * base).abs() < 1e-12);
        assert!(alignment_loss(&[]).is_err());
    }

    #[test]
    fn bpr_examples() {
        assert!((bpr_loss(&[(0.7, 0.7)]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let margin = 3f64.ln();
        assert!((bpr_loss(&[(margin, 0.0)]).unwrap() - (4.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!(((4.0f64 / 3.0).ln() - 0.287682).abs() < 1e-6);
        let mut prev = f64::INFINITY;
        for m in [-5.0, -1.0, 0.0, 1.0, 10.0, 100.0] {
            let l = bpr_loss(&[(m, 0.0)]).unwrap();
            assert!(l < prev);
            prev = l;
        }
        assert!(bpr_loss(&[(1e6, 0.0)]).unwrap() < 1e-300);
        assert!(bpr_loss(&[]).is_err());
    }

    #[test]
    fn bpr_is_finite_for_huge_negative_margin() {
        let l = bpr_loss(&[(-1000.0, 0.0)]).unwrap();
        assert!(l.is_finite());
        assert!((l - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn bpr_pos_examples() {
        assert!((bpr_pos_loss(&[0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((bpr_pos_loss(&[3f64.ln()]).unwrap() - (4.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!(bpr_pos_loss(&[800.0]).unwrap() < 1e-300);
        assert!(bpr_pos_loss(&[]).is_err());
    }

    fn m(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn au_examples() {
        let u = m(&[&[0.6, 0.8], &[0.6, 0.8]]);
        let i = m(&[&[0.6, 0.8], &[0.6, 0.8]]);
        assert!(au_loss(&[(0, 0), (1, 1)], &u, &i, 1.0).unwrap().abs() < 1e-15);

        let u = m(&[&[1.0, 0.0]]);
        let i = m(&[&[0.0, 1.0]]);
        // single-row sets have zero uniformity, so only alignment remains
        assert!((au_loss(&[(0, 0)], &u, &i, 1.0).unwrap() - 2.0).abs() < 1e-15);

        let u = m(&[&[1.0, 2.0], &[-0.3, 0.5], &[2.0, 0.1]]);
        let i = m(&[&[0.2, -1.0], &[0.7, 0.7]]);
        let mut u3 = u.clone();
        u3.scale(3.0);
        let mut i5 = i.clone();
        i5.scale(0.5);
        let a = au_loss(&[(0, 1), (2, 0)], &u, &i, 1.0).unwrap();
        let b = au_loss(&[(0, 1), (2, 0)], &u3, &i5, 1.0).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(au_loss(&[], &u, &i, 1.0).is_err());
    }

    #[test]
    fn au_uniformity_of_antipodal_pair() {
        // two opposite unit vectors: distance^2 = 4, log exp(-8) = -8
        let u = m(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        let i = m(&[&[1.0, 0.0]]);
        let loss = au_loss(&[(0, 0)], &u, &i, 1.0).unwrap();
        assert!((loss - (0.0 + 0.5 * -8.0)).abs() < 1e-12);
    }

    #[test]
    fn joint_examples() {
        let zero = EmbeddingTable {
            user_emb: EmbeddingMatrix::zeros(2, 2),
            item_emb: EmbeddingMatrix::zeros(2, 2),
        };
        assert_eq!(joint_loss(1.5, &[7.0], 1.0, 0.0, &zero).unwrap(), 1.5);
        assert_eq!(joint_loss(2.0, &[1.0, 3.0], 0.5, 0.0, &zero).unwrap(), 3.0);
        assert_eq!(joint_loss(2.0, &[1.0, 3.0], 0.5, 0.3, &zero).unwrap(), 3.0);
        let ones = EmbeddingTable {
            user_emb: EmbeddingMatrix::filled(1, 2, 1.0),
            item_emb: EmbeddingMatrix::filled(1, 2, 1.0),
        };
        assert_eq!(joint_loss(0.0, &[], 1.0, 0.5, &ones).unwrap(), 2.0);
        assert!(joint_loss(0.0, &[], 1.5, 0.0, &zero).is_err());
        assert!(joint_loss(0.0, &[], -0.1, 0.0, &zero).is_err());
    }

    #[test]
    fn stable_helpers() {
        assert!(softplus(1000.0).is_finite());
        assert_eq!(softplus(-1000.0), 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-16);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }

    #[test]
    fn loss_kind_parses() {
        assert_eq!("Align".parse::<LossKind>().unwrap(), LossKind::Alignment);
        assert_eq!("bpr_pos".parse::<LossKind>().unwrap(), LossKind::BprPos);
        assert!("mse".parse::<LossKind>().is_err());
    }
}
