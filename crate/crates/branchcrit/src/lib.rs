//! Exact arithmetic for a modular branching criterion and its witnessing
//! lowering operators.
//!
//! Given a dominant weight `λ` for `GL_n`, a prime `p` and parameters
//! `(i, n, d)` with `d < p`, this crate decides whether the irreducible
//! module `L_n(λ)` in characteristic `p` contains a nonzero
//! `GL_{n−1}`-high weight vector of weight `λ − d·α(i,n)`, constructs the
//! lowering operator that witnesses a positive answer, and cross-checks
//! everything against a brute-force module built from an exact Gram matrix.
//!
//! # Module map
//! - [`msets`] — sorted integer multisets with interval counts and cuts
//! - [`planegeo`] — cones, snakes and decreasing injections in ℤ²
//! - [`criterion`] — the combinatorial decision procedure itself
//! - [`polyring`] — sparse exact arithmetic in ℤ[H₁..Hₙ, u's]
//! - [`hyperalg`] — PBW-shaped elements, raising action, straightening
//! - [`lowering`] — elementary expressions, formal products, evaluation
//! - [`modoracle`] — Gram-matrix construction of the irreducible module
//!
//! All arithmetic is exact: arbitrary-precision integers everywhere,
//! reduction mod `p` only at the final specialization step.

pub mod criterion;
pub mod hyperalg;
pub mod lowering;
pub mod modoracle;
pub mod msets;
pub mod planegeo;
pub mod polyring;

/// A weight for `GL_n`: the list `(λ₁, …, λₙ)`, 1-indexed in the maths,
/// 0-indexed in the vector.
pub type Weight = Vec<i64>;

/// A point of ℤ², written `(column, row)`.
pub type Point = (i64, i64);

/// Everything that can go wrong across the crate. Most variants signal a
/// violated precondition or a mathematical impossibility that callers are
/// expected to surface, not swallow.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// A multiset replacement was asked to remove an entry that is absent.
    #[error("multiset has no entry equal to {entry}")]
    AbsentEntry { entry: i64 },
    /// A point's column lies outside the board `[1..n]`.
    #[error("column {col} lies outside [1..{n}]")]
    ColumnOutOfRange { col: i64, n: i64 },
    /// The instance `(λ, p, i, n, d)` violates a basic requirement.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    /// The rectangle-transfer hypothesis does not hold for the given data.
    #[error("rectangle hypothesis violated: {0}")]
    BadRectangle(String),
    /// A stripe avoidance map was requested for a stripe containing a
    /// comparable pair, where it is not defined.
    #[error("stripe contains the comparable pair {a:?}, {b:?}")]
    ComparablePairInStripe { a: Point, b: Point },
    /// An antichain-only operation received a set with a comparable pair.
    #[error("not an antichain: {a:?} and {b:?} are comparable")]
    NotAntichain { a: Point, b: Point },
    /// A falling factorial was requested with a negative exponent. This
    /// signals an internal inequality violation, not a user error.
    #[error("negative falling-factorial exponent {k}")]
    NegativeExponent { k: i64 },
    /// Substitution indices out of order: `base ≤ l < m` is required.
    #[error("bad substitution indices l={l}, m={m}, base={base}")]
    BadIndices { l: usize, m: usize, base: usize },
    /// Exact polynomial division failed.
    #[error("polynomial is not divisible by the given divisor")]
    NotDivisible,
    /// Evaluation hit a variable with no assigned value.
    #[error("variable {0} has no assigned value")]
    UnassignedVariable(String),
    /// A division that the theory promises to be exact left a remainder.
    #[error("non-integral result: {0}")]
    NonIntegralResult(String),
    /// Operator data violates one of its structural conditions.
    #[error("invalid operator data: {0}")]
    InvalidSpec(String),
    /// A denominator factor survived evaluation of a formal product.
    #[error("denominator factor survived evaluation: {0}")]
    DenominatorSurvived(String),
    /// A formal product missing required factors cannot be evaluated.
    #[error("formal product is not full: {0}")]
    NotFull(String),
    /// The branching criterion fails; the antichain blocks every injection.
    #[error("criterion fails; blocking antichain {antichain:?}")]
    CriterionFails { antichain: Vec<Point> },
    /// A vector mixes basis elements of distinct weights.
    #[error("vector mixes distinct weights")]
    MixedWeights,
    /// An identity that the theory guarantees did not hold numerically.
    #[error("identity check failed: {0}")]
    IdentityFailed(String),
    /// The construction requires `d < p`.
    #[error("d = {d} is not smaller than p = {p}")]
    DGreaterEqualP { d: i64, p: i64 },
    /// The weight is not weakly decreasing.
    #[error("weight is not dominant: {0:?}")]
    NotDominant(Vec<i64>),
}

pub type Result<T> = std::result::Result<T, Error>;
