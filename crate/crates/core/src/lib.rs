//! Exact arithmetic for q-expansions of Siegel modular forms in
//! characteristic p.
//!
//! Everything here is exact: coefficients are arbitrary-precision rationals
//! or elements of a prime field F_p, and series are truncated sparse maps
//! indexed by positive semidefinite half-integral matrices. No floating
//! point is used anywhere.
//!
//! The crate is organised bottom-up:
//!
//! * [`coeff`] - rationals, prime fields, Bernoulli numbers, reduction mod p
//! * [`quadform`] - half-integral symmetric matrices, unimodular action,
//!   Gauss reduction, enumeration up to a trace bound
//! * [`qseries`] - sparse truncated q-expansions (scalar and matrix valued),
//!   Fourier-Jacobi slices, theta components, the `SMFP v1` file format
//! * [`operators`] - U, V, Siegel Phi, genus-1 Hecke T(l), Cartier,
//!   theta (multiply-by-index) operators, Fourier-Jacobi extraction
//! * [`generators`] - Eisenstein series, delta, the constant weight-(p-1)
//!   series, genus-2 theta constants and the forms built from them
//! * [`structure`] - p-singularity tests, p-th roots, expression in
//!   generators, irreducibility search, small exact constraint solvers
//! * [`verify`] - named check suites producing deterministic reports

pub mod coeff;
pub mod error;
pub mod generators;
pub mod operators;
pub mod qseries;
pub mod quadform;
pub mod structure;
pub mod verify;

pub use coeff::{Coeff, CoeffDomain, FpElement};
pub use error::{Error, Result};
pub use qseries::{JacobiSlice, MatrixQSeries, QSeries, ThetaComponents, Weight};
pub use quadform::{HalfIntegralForm, UnimodularMatrix};
