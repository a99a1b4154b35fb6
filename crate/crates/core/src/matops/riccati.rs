//! Matrix sign function and the continuous algebraic Riccati equation
//!
//! ```text
//! P A + Aᵀ P − γ P B Bᵀ P + Q̂ = 0
//! ```
//!
//! solved through the sign of the Hamiltonian `[[A, −γBBᵀ], [−Q̂, −Aᵀ]]`.
//! With `W = sign(H)` the stabilising solution satisfies
//! `[W₁₂; W₂₂ + I] P = −[W₁₁ + I; W₂₁]`, an overdetermined but consistent
//! system solved in the least-squares sense.

use super::{eigen::sym_eig, lu::inverse, lu::least_squares, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignOptions {
    pub rel_tol: f64,
    pub max_iterations: usize,
}

impl Default for SignOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iterations: 100,
        }
    }
}

/// Newton iteration `Z ← (Z + Z⁻¹)/2`.
pub fn matrix_sign(m: &Matrix) -> Result<Matrix> {
    matrix_sign_with(m, SignOptions::default())
}

pub fn matrix_sign_with(m: &Matrix, opts: SignOptions) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "sign function needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let mut z = m.clone();
    for _ in 0..opts.max_iterations {
        let zinv = inverse(&z).map_err(|e| {
            Error::SignFailure(format!("singular iterate ({e}); eigenvalue on the imaginary axis?"))
        })?;
        let next = (&z + &zinv).scale(0.5);
        if !next.is_finite() {
            return Err(Error::SignFailure("iterate became non-finite".into()));
        }
        let change = next.max_abs_diff(&z);
        let scale = z.max_abs();
        z = next;
        if change < opts.rel_tol * scale {
            return Ok(z);
        }
    }
    Err(Error::SignFailure(format!(
        "no convergence within {} iterations",
        opts.max_iterations
    )))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CareOptions {
    pub sign: SignOptions,
    /// Residual bound is `residual_tol * (1 + ||P||²)`, max-norm.
    pub residual_tol: f64,
    /// Relative tolerance for the PSD check on the returned solution.
    pub definiteness_tol: f64,
}

impl Default for CareOptions {
    fn default() -> Self {
        Self {
            sign: SignOptions::default(),
            residual_tol: 1e-7,
            definiteness_tol: 1e-9,
        }
    }
}

/// `P A + Aᵀ P − γ P B Bᵀ P + Q̂`.
pub fn riccati_residual(p: &Matrix, a: &Matrix, b: &Matrix, q_hat: &Matrix, gamma: f64) -> Matrix {
    let pa = p * a;
    let pb = p * b;
    let pbbp = &pb * &pb.transpose();
    let sum = &(&pa + &pa.transpose()) - &pbbp.scale(gamma);
    &sum + q_hat
}

pub fn care_solve(a: &Matrix, b: &Matrix, q_hat: &Matrix, gamma: f64) -> Result<Matrix> {
    care_solve_with(a, b, q_hat, gamma, CareOptions::default())
}

pub fn care_solve_with(
    a: &Matrix,
    b: &Matrix,
    q_hat: &Matrix,
    gamma: f64,
    opts: CareOptions,
) -> Result<Matrix> {
    let d = a.rows();
    if !a.is_square() || b.rows() != d || q_hat.shape() != (d, d) {
        return Err(Error::Shape(format!(
            "CARE needs A dxd, B dxp, Q dxd; got A {:?}, B {:?}, Q {:?}",
            a.shape(),
            b.shape(),
            q_hat.shape()
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("translation factor must be positive, got {gamma}")));
    }
    q_hat.ensure_symmetric(1e-10)?;

    let g = (b * &b.transpose()).scale(gamma);
    let h = Matrix::block2x2(a, &g.scale(-1.0), &q_hat.scale(-1.0), &a.transpose().scale(-1.0));
    let w = matrix_sign_with(&h, opts.sign)
        .map_err(|e| Error::NotStabilizable(e.to_string()))?;

    let eye = Matrix::identity(d);
    let w11 = w.submatrix(0, 0, d, d);
    let w12 = w.submatrix(0, d, d, d);
    let w21 = w.submatrix(d, 0, d, d);
    let w22 = w.submatrix(d, d, d, d);
    let lhs = Matrix::vstack(&w12, &(&w22 + &eye));
    let rhs = Matrix::vstack(&(&w11 + &eye), &w21).scale(-1.0);
    let p = least_squares(&lhs, &rhs)
        .map_err(|e| Error::NotStabilizable(format!("stable subspace extraction failed: {e}")))?
        .symmetrized();

    let p_norm = p.max_abs();
    let spectrum = sym_eig(&p)?;
    if spectrum.min() < -opts.definiteness_tol * (1.0 + p_norm) {
        return Err(Error::NotStabilizable(format!(
            "Riccati solution is indefinite (min eigenvalue {:.3e})",
            spectrum.min()
        )));
    }
    let resid = riccati_residual(&p, a, b, q_hat, gamma).max_abs();
    if resid > opts.residual_tol * (1.0 + p_norm * p_norm) {
        return Err(Error::NotStabilizable(format!(
            "Riccati residual {resid:.3e} exceeds tolerance"
        )));
    }
    Ok(p)
}
