use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Dense row-major matrix indexed `[task type][data center]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> RateMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == m), "ragged rows");
        Self {
            rows: n,
            cols: m,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, d: usize) -> T {
        self.data[i * self.cols + d]
    }

    #[inline]
    pub fn set(&mut self, i: usize, d: usize, v: T) {
        self.data[i * self.cols + d] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, d: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, d)).collect()
    }

    pub fn row_sum(&self, i: usize) -> T {
        self.row(i).iter().copied().sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> RateMatrix<U> {
        RateMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}
