//! Dense row-major `f64` matrix used for every embedding block.

use crate::error::{Error, Result};

/// Dense row-major matrix with one row per entity (user, item, or hyperedge).
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            values: vec![0.0; rows * dim],
        }
    }

    pub fn from_vec(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * dim {
            return Err(Error::DimensionMismatch {
                context: "matrix construction",
                expected: rows * dim,
                actual: values.len(),
            });
        }
        Ok(Self { rows, dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "matrix rows",
                    expected: dim,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            dim,
            values,
        })
    }

    pub fn filled(rows: usize, dim: usize, value: f64) -> Self {
        Self {
            rows,
            dim,
            values: vec![value; rows * dim],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.dim..(r + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.dim..(r + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let dim = self.dim.max(1);
        self.values.chunks_exact(dim).take(self.rows)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.dim + c] = v;
    }

    pub fn add_assign(&mut self, other: &EmbeddingMatrix) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// `self + factor * other`, returned as a new matrix.
    pub fn axpy(&self, factor: f64, other: &EmbeddingMatrix) -> EmbeddingMatrix {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + factor * b)
            .collect();
        EmbeddingMatrix {
            rows: self.rows,
            dim: self.dim,
            values,
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &EmbeddingMatrix) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Frobenius-norm relative error `|self - reference| / |reference|`.
    ///
    /// Falls back to the absolute error when the reference is all zeros.
    pub fn relative_error(&self, reference: &EmbeddingMatrix) -> f64 {
        let diff: f64 = self
            .values
            .iter()
            .zip(&reference.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm = reference.squared_norm().sqrt();
        if norm == 0.0 {
            diff
        } else {
            diff / norm
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy_into(out: &mut [f64], factor: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += factor * v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(EmbeddingMatrix::from_vec(2, 3, vec![0.0; 5]).is_err());
        let m = EmbeddingMatrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn relative_error_of_zero_reference_is_absolute() {
        let z = EmbeddingMatrix::zeros(1, 2);
        let m = EmbeddingMatrix::from_vec(1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(m.relative_error(&z), 5.0);
    }

    #[test]
    fn iter_rows_handles_empty_dim() {
        let m = EmbeddingMatrix::zeros(3, 0);
        assert_eq!(m.iter_rows().count(), 0);
    }
}
