//! Exact small-height constructions for quadratic spaces over the algebraic
//! numbers, with certified height bounds.
//!
//! Field elements live in towers of quadratic extensions of the rationals
//! ([`tower`]). On top of that sit exact linear algebra ([`linalg`]), absolute
//! Weil heights with interval enclosures ([`heights`]), lattice-reduced small
//! bases ([`reduction`]), the quadratic-space constructions ([`quadspace`]),
//! reflections and Cartan–Dieudonné factorizations ([`isometry`]) and the
//! catalog of height bounds checked against them ([`certify`]).

#![allow(clippy::needless_range_loop)]

pub mod arith;
pub mod certify;
pub mod error;
pub mod heights;
pub mod interval;
pub mod isometry;
pub mod linalg;
pub mod lll;
pub mod quadspace;
pub mod reduction;
pub mod tower;

pub use error::{Error, Result};
