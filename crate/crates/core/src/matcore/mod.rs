//! Dense complex linear algebra: the matrix type, decompositions, matrix
//! functions, Kronecker products and discrete Fourier sums.

mod assign;
mod decomp;
mod func;
mod json;
mod matrix;

pub use assign::{assignment_cost, min_cost_assignment, min_cost_matching_distance};
pub use decomp::{
    canonical_order, check_nonsingular, determinant, eig, eigenvalues, hermitian_eigen, hermitian_eigenvalues,
    inverse, null_space, rank_from_singular_values, rank_with_tol, singular_values, solve, svd, Eigendecomposition,
    SvdRank, EIG_RESIDUAL_MAX,
};
pub use func::{dft_sequence, idft_sequence, kron, mat_exp, mat_log, twiddles};
pub use matrix::ComplexMatrix;

/// Complex scalar used throughout the crate.
pub type Complex = num_complex::Complex64;

/// Default relative tolerance for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
