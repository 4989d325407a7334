use thiserror::Error;

use crate::tower::Elem;

/// Errors raised by the exact constructions.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("cannot adjoin the square root of zero")]
    ZeroRadicand,
    #[error("tower degree {needed} would exceed the cap {cap}")]
    DegreeCapExceeded { cap: usize, needed: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("radicand {radicand} of generator {level} is the square of {witness}")]
    SquareDetected { level: usize, radicand: Box<Elem>, witness: Box<Elem> },
    #[error("operation needs at least one generator")]
    RationalContext,
    #[error("precision cap of {0} bits reached")]
    PrecisionCapExceeded(u32),
    #[error("ambient dimensions differ: {0} vs {1}")]
    AmbientMismatch(usize, usize),
    #[error("columns are linearly dependent")]
    RankDeficient,
    #[error("zero vector")]
    ZeroVector,
    #[error("zero object")]
    ZeroObject,
    #[error("zero subspace")]
    ZeroSubspace,
    #[error("form vanishes identically")]
    ZeroForm,
    #[error("quadratic space is not regular")]
    NotRegular,
    #[error("subspace dimension too small")]
    DimensionTooSmall,
    #[error("binary form vanishes identically on a regular space")]
    ContradictsRegularity,
    #[error("vector is anisotropic")]
    AnisotropicInput,
    #[error("vector lies in the radical")]
    RadicalVector,
    #[error("reflection needs an anisotropic vector")]
    AnisotropicRequired,
    #[error("matrix is not an isometry of the space")]
    NotAnIsometry,
    #[error("isometries act on different spaces")]
    DomainMismatch,
    #[error("form vanishes on the subspace, no anisotropic vector exists")]
    NoAnisotropicVector,
    #[error("unknown bound id {0}")]
    UnknownBoundId(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("literal orthogonal-basis branch met an isotropic vector outside the radical")]
    LiteralBranchGap,
}

pub type Result<T> = std::result::Result<T, Error>;
