//! Error type shared by all numerical modules.

use std::fmt;

/// Errors raised by grid construction, quadrature, and the factorization
/// pipeline.  Every variant names the violated precondition so that callers
/// (and the CLI) can report it without guessing.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid parameters do not describe a valid uniform lattice.
    InvalidGrid(String),
    /// Two grid functions that must share a lattice do not.
    GridMismatch {
        what: &'static str,
    },
    /// A ball does not satisfy the grid's geometric requirements
    /// (containment in the box, or radius at least two spacings).
    InvalidBall(String),
    /// A discrete ball contains no lattice points.
    EmptyBall {
        radius: f64,
    },
    /// The grid box is too small to hold a construction.
    GridTooSmall(String),
    /// An exponent system violates its defining identities or ranges.
    InvalidExponents(String),
    /// A function fails the atom invariants at construction time.
    InvalidAtom(String),
    /// A function fails the two-bump envelope, mean, or geometry checks.
    InvalidTwoBump(String),
    /// A separated-ball configuration is degenerate (overlapping balls or
    /// separation outside the admissible range).
    DegenerateConfig(String),
    /// The partial-adjoint denominator of the atom approximation is too
    /// close to zero for the construction to be trusted.
    SmallDenominator {
        value: f64,
        threshold: f64,
    },
    /// A resample was requested between lattices that are not aligned.
    MisalignedResample(String),
    /// A parameter is outside its documented domain.
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::GridMismatch { what } => {
                write!(f, "grid mismatch: {what} must live on the same lattice")
            }
            Error::InvalidBall(msg) => write!(f, "invalid ball: {msg}"),
            Error::EmptyBall { radius } => {
                write!(f, "discrete ball of radius {radius} contains no lattice points")
            }
            Error::GridTooSmall(msg) => write!(f, "grid box too small: {msg}"),
            Error::InvalidExponents(msg) => write!(f, "invalid exponent system: {msg}"),
            Error::InvalidAtom(msg) => write!(f, "invalid atom: {msg}"),
            Error::InvalidTwoBump(msg) => write!(f, "invalid two-bump function: {msg}"),
            Error::DegenerateConfig(msg) => write!(f, "degenerate configuration: {msg}"),
            Error::SmallDenominator { value, threshold } => write!(
                f,
                "partial-adjoint denominator {value:e} is below the trust threshold {threshold:e}"
            ),
            Error::MisalignedResample(msg) => write!(f, "misaligned resample: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
