//! Small dense linear algebra: determinants and symmetric eigenvalues.
//!
//! Matrices here are at most a few dozen rows, so everything is row-major
//! `Vec<f64>` without any blocking.

use crate::{Error, Result};

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::contract("matrix rows must be square"));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Principal submatrix over the given (sorted, distinct) indices.
    pub fn principal(&self, keep: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(keep.len());
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(mut m: Matrix) -> f64 {
    let n = m.n;
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m.get(a, col).abs().total_cmp(&m.get(b, col).abs()))
            .unwrap_or(col);
        let p = m.get(pivot, col);
        if p == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m.get(col, j);
                m.set(col, j, m.get(pivot, j));
                m.set(pivot, j, tmp);
            }
            det = -det;
        }
        det *= p;
        for row in col + 1..n {
            let factor = m.get(row, col) / p;
            if factor != 0.0 {
                for j in col..n {
                    let v = m.get(row, j) - factor * m.get(col, j);
                    m.set(row, j, v);
                }
            }
        }
    }
    det
}

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi
/// rotations until the off-diagonal Frobenius norm drops below `tol`.
pub fn symmetric_eigenvalues(m: &Matrix, tol: f64) -> Result<Vec<f64>> {
    if !m.is_symmetric(1e-12) {
        return Err(Error::contract("eigen solver requires a symmetric matrix"));
    }
    let n = m.n;
    let mut a = m.clone();
    let off = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a.get(i, j) * a.get(i, j);
                }
            }
        }
        s.sqrt()
    };
    for _sweep in 0..100 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let m = Matrix::from_rows(&[
            vec![2.0, -1.0, 0.5],
            vec![0.0, 3.0, 1.0],
            vec![4.0, 1.0, -2.0],
        ])
        .unwrap();
        // Cofactor expansion along the first row, by hand.
        let expected = 2.0 * (3.0 * -2.0 - 1.0 * 1.0) - (-1.0) * (0.0 * -2.0 - 1.0 * 4.0)
            + 0.5 * (0.0 * 1.0 - 3.0 * 4.0);
        assert!((determinant(m) - expected).abs() < 1e-12);
    }

    #[test]
    fn determinant_needs_pivoting() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(determinant(m), -1.0);
    }

    #[test]
    fn jacobi_two_by_two() {
        let m = Matrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        let e = symmetric_eigenvalues(&m, 1e-12).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-12);
        assert!((e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_rejects_asymmetric() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(symmetric_eigenvalues(&m, 1e-12).is_err());
    }
}
