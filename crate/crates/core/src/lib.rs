//! Free-surface isentropic compressible Navier-Stokes in a flattened
//! half-space chart, with conormal-energy diagnostics.

// index loops mirror the stencil formulas; negated comparisons keep NaN on
// the failing side
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod spectral;
