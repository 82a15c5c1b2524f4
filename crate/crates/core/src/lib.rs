//! Sparse polynomial expansions of the solution map for the affine-parametric
//! diffusion equation `-(a(y) u')' = f` on `]0,1[` with homogeneous Dirichlet
//! conditions, where `a(y) = abar + sum_j y_j psi_j` and `y_j` ranges over
//! `[-1,1]`.
//!
//! The crate computes Taylor coefficients `t_nu` by a recursion over
//! downward-closed multi-index sets, Legendre coefficients `u_nu` by an
//! adaptive stochastic Galerkin method, and provides decay-rate and weighted
//! summability diagnostics for both.

// negated float comparisons are deliberate NaN guards; the flagged integer
// halvings are index formulas, not ceiling divisions
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::manual_div_ceil)]
#![cfg_attr(test, allow(clippy::needless_range_loop))]

pub mod analysis;
pub mod error;
pub mod fem1d;
pub mod fields;
pub mod galerkin;
pub mod multiindex;
pub mod operators;
pub mod runner;
pub mod taylor;

pub use error::Error;
