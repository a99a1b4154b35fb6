//! Dense linear algebra kernel: LU, symmetric eigensolver, matrix exponential,
//! matrix sign function and the CARE solver used for gain synthesis.

mod eigen;
mod expm;
mod lu;
mod matrix;
mod riccati;

pub use eigen::{
    is_negative_semidefinite, is_positive_definite, lambda_max, sym_eig, EigenResult,
    JACOBI_MAX_SWEEPS, JACOBI_REL_TOL, SYMMETRY_REL_TOL,
};
pub use expm::matrix_exp;
pub use lu::{inverse, least_squares, lu_solve, Lu, PIVOT_REL_TOL};
pub use matrix::Matrix;
pub use riccati::{
    care_solve, care_solve_with, matrix_sign, matrix_sign_with, riccati_residual, CareOptions,
    SignOptions,
};
