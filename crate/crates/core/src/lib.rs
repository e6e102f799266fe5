//! Numerical laboratory for the weighted harmonic map heat flow
//! `∂_t F = ΔF − ⟨dF, dφ⟩` between model Riemannian manifolds.

// index loops mirror the tensor notation; negated comparisons reject NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod equivariant;
pub mod exec;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod monitors;
pub mod pullback;

pub use exec::Execution;
