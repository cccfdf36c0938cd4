//! Hardy-space atoms, bilinear singular integral operators, and weak
//! factorization experiments on uniform grids.
//!
//! The crate discretizes compactly supported functions on a symmetric box,
//! provides `H^p` atoms and a telescoping decomposition of two-bump
//! functions into atoms, applies bilinear kernels by midpoint quadrature,
//! and iterates an approximation scheme that rewrites an atom as a residue
//! of bilinear products plus a geometrically shrinking error.  Commutator
//! pairings against Lipschitz-type symbols close the loop with a lower-bound
//! check dual to the factorization.

pub mod atoms;
pub mod calibration;
pub mod commutator;
pub mod error;
pub mod factor;
pub mod grid;
pub mod kernel;
pub mod operator;

pub use error::{Error, Result};
