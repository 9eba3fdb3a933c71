//! Dense Cholesky factorization and the triangular solves built on it.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Lower-triangular factor `L` with `L L^T = A`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factorizes a symmetric matrix, reading only its lower triangle.
    ///
    /// Fails with the index of the first non-positive pivot.
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            // Left-looking: column j of A minus contributions of columns 0..j.
            let tail = &mut col[j..];
            for (i, v) in tail.iter_mut().enumerate() {
                *v = a[(j + i, j)];
            }
            for k in 0..j {
                let ljk = l[(j, k)];
                if ljk == 0.0 {
                    continue;
                }
                let src = &l.as_slice()[k * n + j..(k + 1) * n];
                for (v, s) in tail.iter_mut().zip(src) {
                    *v -= ljk * s;
                }
            }
            let d = tail[0];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let d = d.sqrt();
            let dst = &mut l.as_mut_slice()[j * n + j..(j + 1) * n];
            dst[0] = d;
            for (out, v) in dst[1..].iter_mut().zip(&tail[1..]) {
                *out = v / d;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `A x = b` by a forward then a backward substitution.
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    /// Solves every column of `b` independently; column `j` of the result is
    /// bit-identical to `solve_vec` on column `j` alone.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        let n = self.dim();
        if n > 0 {
            for col in x.as_mut_slice().chunks_mut(n) {
                self.solve_in_place(col);
            }
        }
        x
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        let l = self.l.as_slice();
        // L y = b, column oriented.
        for j in 0..n {
            let yj = x[j] / l[j * n + j];
            x[j] = yj;
            if yj != 0.0 {
                let colj = &l[j * n + j + 1..(j + 1) * n];
                for (xi, lij) in x[j + 1..].iter_mut().zip(colj) {
                    *xi -= lij * yj;
                }
            }
        }
        // L^T x = y: row j of L^T is column j of L.
        for j in (0..n).rev() {
            let colj = &l[j * n + j + 1..(j + 1) * n];
            let s: f64 = colj.iter().zip(&x[j + 1..]).map(|(a, b)| a * b).sum();
            x[j] = (x[j] - s) / l[j * n + j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
        &b * b.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn reconstructs_matrix() {
        let a = spd(17);
        let c = Cholesky::factor(&a).unwrap();
        let r = c.l() * c.l().transpose();
        assert!((r - &a).amax() < 1e-12);
        for i in 0..17 {
            for j in (i + 1)..17 {
                assert_eq!(c.l()[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn solves_match_lu() {
        let a = spd(12);
        let b = DVector::from_fn(12, |i, _| i as f64 - 3.0);
        let x = Cholesky::factor(&a).unwrap().solve_vec(&b);
        let y = a.clone().lu().solve(&b).unwrap();
        assert!((x - y).amax() < 1e-10);
    }

    #[test]
    fn reports_failing_pivot() {
        let mut a = DMatrix::identity(4, 4);
        a[(2, 2)] = -1.0;
        match Cholesky::factor(&a) {
            Err(Error::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 2),
            other => panic!("unexpected {other:?}"),
        }
        // Rank-deficient: all-ones matrix fails at pivot 1.
        let ones = DMatrix::from_element(3, 3, 1.0);
        assert!(matches!(
            Cholesky::factor(&ones),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        ));
    }

    #[test]
    fn multi_column_solve_is_columnwise() {
        let a = spd(9);
        let c = Cholesky::factor(&a).unwrap();
        let b = DMatrix::from_fn(9, 4, |i, j| (i as f64).sin() + j as f64);
        let x = c.solve_mat(&b);
        for j in 0..4 {
            let xj = c.solve_vec(&b.column(j).into_owned());
            assert_eq!(x.column(j).into_owned(), xj);
        }
    }
}
