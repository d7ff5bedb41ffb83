//! Small dense linear algebra: Cholesky factorization and solves for the
//! symmetric positive definite systems the estimators produce.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Array2<f64>,
}

impl Cholesky {
    /// Factor `a = L L^T`. Fails on non-positive pivots, which is how the
    /// callers detect rank deficiency.
    pub fn new(a: ArrayView2<'_, f64>) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "cholesky needs a square matrix");
        let mut lower = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= lower[(j, k)] * lower[(j, k)];
            }
            if !(diag.is_finite() && diag > 0.0) {
                return Err(Error::SingularGram);
            }
            let diag = diag.sqrt();
            lower[(j, j)] = diag;
            for i in (j + 1)..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= lower[(i, k)] * lower[(j, k)];
                }
                lower[(i, j)] = v / diag;
            }
        }
        Ok(Self { lower })
    }

    pub fn solve_vec(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.lower.nrows();
        assert_eq!(b.len(), n);
        // forward: L y = b
        let mut y = b.to_owned();
        for i in 0..n {
            for k in 0..i {
                let t = self.lower[(i, k)] * y[k];
                y[i] -= t;
            }
            y[i] /= self.lower[(i, i)];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let t = self.lower[(k, i)] * y[k];
                y[i] -= t;
            }
            y[i] /= self.lower[(i, i)];
        }
        y
    }

    /// Solve `A X = B` column by column.
    pub fn solve_mat(&self, b: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros(b.raw_dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve_vec(col));
        }
        out
    }
}

/// `a^T a` without forming intermediates twice.
pub fn gram(a: ArrayView2<'_, f64>) -> Array2<f64> {
    a.t().dot(&a)
}

pub fn add_ridge(a: &mut Array2<f64>, lambda: f64) {
    let n = a.nrows().min(a.ncols());
    for i in 0..n {
        a[(i, i)] += lambda;
    }
}
