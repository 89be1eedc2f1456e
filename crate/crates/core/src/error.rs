use thiserror::Error;

use crate::measure::Atom;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("atom label {0} appears more than once")]
    DuplicateAtom(Atom),
    #[error("weight of atom {atom} must be positive and finite, got {weight}")]
    NonpositiveWeight { atom: Atom, weight: f64 },
    #[error("length mismatch: {what} (expected {expected}, got {got})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("atom {0} does not belong to the measure space")]
    ForeignAtom(Atom),
    #[error("sections or forms live on different fiber layouts")]
    LayoutMismatch,
    #[error("fiber vector for atom {atom} has length {got}, fiber dimension is {expected}")]
    DimensionMismatch {
        atom: Atom,
        expected: usize,
        got: usize,
    },
    #[error("fiber matrix for atom {atom} is not Hermitian (deviation {deviation:.3e})")]
    NonHermitianForm { atom: Atom, deviation: f64 },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("tail sets are not nested: tail {0} is not contained in tail {1}")]
    NonNestedTails(usize, usize),
    #[error("index sets overlap at atom {0}")]
    OverlappingSets(Atom),
    #[error("precondition violated on sample {index}: {detail}")]
    PreconditionViolated { index: usize, detail: String },
    #[error("eigensolver did not converge for atom {0}")]
    EigenFailure(Atom),
    #[error("form is not semibounded by -{declared}: smallest fiber eigenvalue is {found}")]
    NotSemibounded { declared: f64, found: f64 },
    #[error("invalid range: {0}")]
    BadRange(String),
    #[error("Cayley table is not closed: entry {0}")]
    NotClosed(String),
    #[error("Cayley table has no two-sided identity at element 0")]
    NoIdentity,
    #[error("element {0} has no inverse")]
    NoInverse(usize),
    #[error("associativity fails for ({0}, {1}, {2})")]
    NotAssociative(usize, usize, usize),
    #[error("group order {0} exceeds the supported maximum of 64")]
    GroupTooLarge(usize),
    #[error("isotypic decomposition unstable after {0} reseeds")]
    DecompositionUnstable(usize),
    #[error("coefficients are not Hermitian: c(g^-1) != conj(c(g)) at element {0}")]
    NotHermitianCoefficients(usize),
    #[error("operator does not commute with the left regular representation (residual {0:.3e})")]
    NotInvariant(f64),
    #[error("parse error: {0}")]
    Parse(String),
}
