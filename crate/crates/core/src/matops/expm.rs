//! Matrix exponential by scaling and squaring around a [6/6] Padé core.

use super::{lu::lu_solve, Matrix};

/// Padé [6/6] numerator coefficients for exp.
const PADE6: [f64; 7] = [
    1.0,
    1.0 / 2.0,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

/// Scaled norm target; the [6/6] truncation error at 0.5 is below 1e-16.
const THETA: f64 = 0.5;

pub fn matrix_exp(m: &Matrix) -> Matrix {
    assert!(m.is_square(), "matrix_exp needs a square matrix");
    let n = m.rows();
    let norm = m.norm_inf();
    if norm == 0.0 {
        return Matrix::identity(n);
    }
    let squarings = if norm > THETA {
        (norm / THETA).log2().ceil() as i32
    } else {
        0
    };
    let x = m.scale(0.5_f64.powi(squarings));

    let mut numer = Matrix::identity(n);
    let mut denom = Matrix::identity(n);
    let mut power = Matrix::identity(n);
    for (k, c) in PADE6.iter().enumerate().skip(1) {
        power = &power * &x;
        let term = power.scale(*c);
        numer = &numer + &term;
        denom = if k % 2 == 0 {
            &denom + &term
        } else {
            &denom - &term
        };
    }
    // D is close to I for ||x|| <= 0.5, always invertible
    let mut e = lu_solve(&denom, &numer).expect("Padé denominator is nonsingular");
    for _ in 0..squarings {
        e = &e * &e;
    }
    e
}
