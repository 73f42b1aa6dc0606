//! Dense symmetric-positive-definite helpers used by the posterior module.

use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::math;
use crate::vector::Vec64;

pub fn to_dvector(v: &Vec64) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

pub fn from_dvector(v: &DVector<f64>) -> Vec64 {
    Vec64::from_vec_unchecked(v.iter().copied().collect())
}

/// Cholesky factorization of an SPD matrix with the module's jitter policy:
/// on failure, retry once with `1e-10 * trace / dim` added to the diagonal,
/// then report a numerical error.
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    dim: usize,
}

impl SpdFactor {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || dim != matrix.ncols() {
            return Err(Error::invalid("SPD factor needs a square matrix"));
        }
        let trace = matrix.trace();
        match Cholesky::new(matrix.clone()) {
            Some(chol) => Ok(SpdFactor { chol, dim }),
            None => {
                let jitter = 1e-10 * trace / dim as f64;
                let mut jittered = matrix;
                for i in 0..dim {
                    jittered[(i, i)] += jitter;
                }
                match Cholesky::new(jittered) {
                    Some(chol) => Ok(SpdFactor { chol, dim }),
                    None => Err(Error::Numerical(alloc::format!(
                        "Cholesky failed for {dim}x{dim} matrix even after jitter {jitter:e}"
                    ))),
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `M x = b`.
    pub fn solve_vec(&self, b: &Vec64) -> Result<Vec64> {
        if b.len() != self.dim {
            return Err(Error::dims(self.dim, b.len()));
        }
        Ok(from_dvector(&self.chol.solve(&to_dvector(b))))
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// log det M, from the factor diagonal.
    pub fn logdet(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| math::ln(*d))
            .sum::<f64>()
    }

    /// `x' M^{-1} x` for the quadratic form in Gaussian log-densities.
    pub fn inv_quadratic(&self, x: &Vec64) -> Result<f64> {
        let sol = self.solve_vec(x)?;
        Ok(x.dot(&sol))
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.clone().inverse()
    }

    /// `L u` for standard-normal `u`: a sample of `N(0, M)`.
    pub fn correlate(&self, u: &[f64]) -> Vec<f64> {
        let l = self.chol.l_dirty();
        let mut out = alloc::vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += l[(i, j)] * u[j];
            }
            out[i] = acc;
        }
        out
    }
}

/// Symmetrizes in place; guards against drift when forming `A Aᵀ` products.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spd3() -> DMatrix<f64> {
        // A'A + I for a fixed A.
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, 0.0, 1.0, -1.0, 2.0, 0.3, 0.7]);
        &a.transpose() * &a + DMatrix::identity(3, 3)
    }

    #[test]
    fn solve_and_logdet_match_direct_computation() {
        let m = spd3();
        let f = SpdFactor::new(m.clone()).unwrap();
        let b = Vec64::new(alloc::vec![1.0, -2.0, 0.5]).unwrap();
        let x = f.solve_vec(&b).unwrap();
        let back = &m * to_dvector(&x);
        for i in 0..3 {
            assert_relative_eq!(back[i], b[i], max_relative = 1e-12);
        }
        let det = m.determinant();
        assert_relative_eq!(f.logdet(), det.ln(), max_relative = 1e-12);
        let inv = f.inverse();
        let ident = &m * &inv;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ident[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jitter_rescues_near_singular_but_not_indefinite() {
        // Positive semidefinite rank-1 matrix: jitter makes it definite.
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = 1.0;
        assert!(SpdFactor::new(m).is_ok());

        // Indefinite matrix: fails even after jitter.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(SpdFactor::new(m), Err(Error::Numerical(_))));
    }

    #[test]
    fn correlate_reproduces_covariance() {
        let m = spd3();
        let f = SpdFactor::new(m.clone()).unwrap();
        // L L' = M  =>  correlate(e_i) sweeps columns of L.
        let mut ll = DMatrix::zeros(3, 3);
        for j in 0..3 {
            let mut e = [0.0; 3];
            e[j] = 1.0;
            let col = f.correlate(&e);
            for i in 0..3 {
                ll[(i, j)] = col[i];
            }
        }
        let prod = &ll * ll.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(prod[(i, j)], m[(i, j)], max_relative = 1e-12);
            }
        }
    }
}
