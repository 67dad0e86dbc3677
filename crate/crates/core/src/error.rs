//! Crate-wide error type. Every fallible operation returns one of these
//! variants so callers (notably the CLI) can report the failure by name.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Bernoulli numbers with odd index above 1 vanish; asking for them is
    /// almost always an off-by-one in a weight formula, so it is an error.
    #[error("Bernoulli index {0} is odd and greater than 1")]
    OddBernoulliIndex(u32),

    /// The modulus of a prime field must be an odd prime.
    #[error("{0} is not an odd prime")]
    InvalidModulus(u64),

    /// Reduction mod p of a rational whose denominator p divides.
    #[error("non-integral at p={p}{}", fmt_location(.location))]
    NonIntegralAtP { p: u64, location: String },

    /// Two series in different coefficient domains were combined.
    #[error("coefficient domains differ: {left} vs {right}")]
    DomainMismatch { left: String, right: String },

    /// Two series of different genus were combined.
    #[error("genus mismatch: {left} vs {right}")]
    GenusMismatch { left: usize, right: usize },

    /// Adding homogeneous series of different weights.
    #[error("weight mismatch: {left} vs {right}")]
    WeightMismatch { left: String, right: String },

    /// A comparison or solve was requested beyond the stored truncation.
    #[error("insufficient precision: need trace bound {needed}, have {available}")]
    InsufficientPrecision { needed: i64, available: i64 },

    /// Malformed input file; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    /// Two slice keys mapped to the same (r, D) index with different
    /// coefficients, or a key had fractional invariants.
    #[error("slice does not theta-decompose: {0}")]
    NotThetaDecomposable(String),

    /// Theta constants with odd characteristic vanish identically.
    #[error("odd theta characteristic")]
    OddCharacteristic,

    /// p-divisibility of a form is only meaningful when p does not divide
    /// twice the storage scale.
    #[error("p={p} divides 2d={two_d}; p-divisibility undefined at this scale")]
    ScaleModulusClash { p: u64, two_d: i64 },

    /// No weight split k = r(p-1) + p*k' with r in [0, p-1] and k' >= 0.
    #[error("weight {k} admits no split r(p-1) + p*k' at p={p}")]
    WeightInfeasible { k: i64, p: u64 },

    /// A p-th root was requested of a series that is not totally p-singular.
    #[error("series is not totally p-singular at p={0}")]
    NotPSingular(u64),

    /// The exact linear solve found no consistent coefficient vector.
    #[error("no solution: {0}")]
    NoSolution(String),

    /// Hecke T(l) at genus 1 is defined here only for l different from the
    /// field characteristic.
    #[error("Hecke T(l) with l={l} equal to the characteristic is not supported")]
    HeckeAtCharacteristic { l: u64 },

    /// A matrix failed the half-integral form invariants (symmetry, even
    /// diagonal, positive semidefiniteness, or an unsupported scale).
    #[error("invalid form: {0}")]
    InvalidForm(String),

    /// A matrix claimed unimodular has determinant other than +-1.
    #[error("matrix is not unimodular (det {0})")]
    NotUnimodular(i64),

    /// An operator was applied to input of the wrong shape.
    #[error("unsupported input: {0}")]
    Unsupported(String),
}

impl Error {
    /// Stable variant name, used by the CLI when reporting failures.
    pub fn name(&self) -> &'static str {
        match self {
            Error::OddBernoulliIndex(_) => "OddBernoulliIndex",
            Error::InvalidModulus(_) => "InvalidModulus",
            Error::NonIntegralAtP { .. } => "NonIntegralAtP",
            Error::DomainMismatch { .. } => "DomainMismatch",
            Error::GenusMismatch { .. } => "GenusMismatch",
            Error::WeightMismatch { .. } => "WeightMismatch",
            Error::InsufficientPrecision { .. } => "InsufficientPrecision",
            Error::ParseError { .. } => "ParseError",
            Error::NotThetaDecomposable(_) => "NotThetaDecomposable",
            Error::OddCharacteristic => "OddCharacteristic",
            Error::ScaleModulusClash { .. } => "ScaleModulusClash",
            Error::WeightInfeasible { .. } => "WeightInfeasible",
            Error::NotPSingular(_) => "NotPSingular",
            Error::NoSolution(_) => "NoSolution",
            Error::HeckeAtCharacteristic { .. } => "HeckeAtCharacteristic",
            Error::InvalidForm(_) => "InvalidForm",
            Error::NotUnimodular(_) => "NotUnimodular",
            Error::Unsupported(_) => "Unsupported",
        }
    }
}

fn fmt_location(location: &str) -> String {
    if location.is_empty() {
        String::new()
    } else {
        format!(" (at {location})")
    }
}
