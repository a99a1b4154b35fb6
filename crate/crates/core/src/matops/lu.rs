//! Partial-pivot LU factorisation and Householder least squares.

use super::Matrix;
use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is declared singular.
pub const PIVOT_REL_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct Lu {
    factors: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn decompose(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!(
                "LU needs a square matrix, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let threshold = PIVOT_REL_TOL * m.max_abs();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (pivot_row, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= threshold || pivot == 0.0 {
                return Err(Error::Singular { pivot, column: k });
            }
            if pivot_row != k {
                perm.swap(k, pivot_row);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
            }
            let diag = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / diag;
                lu[(i, k)] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= factor * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { factors: lu, perm })
    }

    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        let n = self.factors.rows();
        if rhs.rows() != n {
            return Err(Error::Shape(format!(
                "rhs has {} rows, system has {n}",
                rhs.rows()
            )));
        }
        let mut x = Matrix::from_fn(n, rhs.cols(), |i, j| rhs[(self.perm[i], j)]);
        for c in 0..rhs.cols() {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.factors[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in (i + 1)..n {
                    s -= self.factors[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.factors[(i, i)];
            }
        }
        Ok(x)
    }

    pub fn determinant(&self) -> f64 {
        let n = self.factors.rows();
        let mut det: f64 = (0..n).map(|i| self.factors[(i, i)]).product();
        // parity of the permutation
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut j = start;
            while !seen[j] {
                seen[j] = true;
                j = self.perm[j];
                len += 1;
            }
            if len % 2 == 0 {
                det = -det;
            }
        }
        det
    }
}

pub fn lu_solve(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    Lu::decompose(m)?.solve(rhs)
}

pub fn inverse(m: &Matrix) -> Result<Matrix> {
    Lu::decompose(m)?.solve(&Matrix::identity(m.rows()))
}

/// Minimum-residual solution of an overdetermined full-column-rank system
/// via Householder QR.
pub fn least_squares(m: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let (rows, cols) = m.shape();
    if rows < cols || rhs.rows() != rows {
        return Err(Error::Shape(format!(
            "least squares needs rows >= cols and matching rhs; got {rows}x{cols}, rhs {}x{}",
            rhs.rows(),
            rhs.cols()
        )));
    }
    let mut a = m.clone();
    let mut b = rhs.clone();
    let scale = m.max_abs();
    for k in 0..cols {
        let norm: f64 = (k..rows).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if norm <= PIVOT_REL_TOL * scale || norm == 0.0 {
            return Err(Error::Singular {
                pivot: norm,
                column: k,
            });
        }
        let alpha = if a[(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..cols {
            let dot: f64 = v.iter().enumerate().map(|(t, vi)| vi * a[(k + t, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for (t, vi) in v.iter().enumerate() {
                a[(k + t, j)] -= f * vi;
            }
        }
        for j in 0..b.cols() {
            let dot: f64 = v.iter().enumerate().map(|(t, vi)| vi * b[(k + t, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for (t, vi) in v.iter().enumerate() {
                b[(k + t, j)] -= f * vi;
            }
        }
    }
    let mut x = Matrix::zeros(cols, b.cols());
    for c in 0..b.cols() {
        for i in (0..cols).rev() {
            let mut s = b[(i, c)];
            for k in (i + 1)..cols {
                s -= a[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / a[(i, i)];
        }
    }
    Ok(x)
}
