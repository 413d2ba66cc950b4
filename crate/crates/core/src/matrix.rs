//! Dense column-major matrix.
//!
//! Columns are contiguous, so a weight matrix stores every outgoing
//! connection of one source neuron side by side. Forward passes become a
//! sum of scaled columns, which lets sparse inputs skip whole columns.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from a generator called as `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major nested rows. All rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return None;
        }
        Some(Self::from_fn(n_rows, n_cols, |i, j| rows[i][j]))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).collect())
            .collect()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = out.col_mut(j);
            for k in 0..self.cols {
                let s = other.get(k, j);
                if s != 0.0 {
                    for (d, &a) in dst.iter_mut().zip(self.col(k)) {
                        *d += s * a;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "mul_vec shape mismatch");
        let mut y = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            axpy(xj, self.col(j), &mut y);
        }
        y
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Drops row `i`, shifting later rows up.
    pub fn remove_row(&mut self, i: usize) {
        assert!(i < self.rows);
        let old_rows = self.rows;
        let mut data = Vec::with_capacity((old_rows - 1) * self.cols);
        for j in 0..self.cols {
            let col = &self.data[j * old_rows..(j + 1) * old_rows];
            data.extend_from_slice(&col[..i]);
            data.extend_from_slice(&col[i + 1..]);
        }
        self.rows -= 1;
        self.data = data;
    }

    /// Drops column `j`, shifting later columns left.
    pub fn remove_col(&mut self, j: usize) {
        assert!(j < self.cols);
        self.data.drain(j * self.rows..(j + 1) * self.rows);
        self.cols -= 1;
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols);
        let old_rows = self.rows;
        let mut data = Vec::with_capacity((old_rows + 1) * self.cols);
        for (j, &v) in row.iter().enumerate() {
            data.extend_from_slice(&self.data[j * old_rows..(j + 1) * old_rows]);
            data.push(v);
        }
        self.rows += 1;
        self.data = data;
    }

    pub fn push_col(&mut self, col: &[f64]) {
        assert_eq!(col.len(), self.rows);
        self.data.extend_from_slice(col);
        self.cols += 1;
    }
}

impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(&rows).ok_or_else(|| serde::de::Error::custom("ragged matrix rows"))
    }
}

/// `y += a * x`
#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
