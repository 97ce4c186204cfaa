//! Dense lower-triangular matrices stored row-major.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    n: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    pub fn zeros(n: usize) -> Self {
        LowerTriangular { n, data: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[i * self.n + j]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(j <= i, "entry ({i}, {j}) is above the diagonal");
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..i * self.n + i + 1]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// Solves `self · x = b` by forward substitution.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::ShapeMismatch(format!("rhs length {} for a {}x{} system", b.len(), self.n, self.n)));
        }
        let mut x = vec![0.0; self.n];
        for i in 0..self.n {
            let row = self.row(i);
            let d = row[i];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::TransformSingular { index: i, value: d });
            }
            let acc: f64 = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] = (b[i] - acc) / d;
        }
        Ok(x)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(m: DMatrix<f64>) -> Result<LowerTriangular> {
    m.cholesky().map(|c| LowerTriangular::from_dmatrix(&c.l())).ok_or(Error::Cholesky)
}
