//! Grid fields, five-point finite-volume operators, linear solvers and the
//! contact current functional.

pub mod current;
pub mod field;
pub mod io;
pub mod linalg;
pub mod operator;

pub use current::{boundary_current, contact_currents, contact_mask, direct_flux, peak_current_density};
pub use field::{grad_seminorm_sq, inner_l2, norm_h1, norm_l2, BcRole, ScalarField};
pub use operator::{assemble_weighted_laplacian, solve_linear, LinearSolverKind, SparseOperator, Trace};
