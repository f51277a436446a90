//! Moment-method machinery for the covariance of high traces of Wigner
//! matrices at the spectral edge.
//!
//! * [`series`]: exact generating-function coefficients (`m_s`, `φ`,
//!   `(1-τ)^{-p}`).
//! * [`wick`]: brute-force GUE expectations by Wick pairing, the ground truth
//!   for everything exact.
//! * [`majorant`]: majorant recursions and closed-form bound checks.
//! * [`paths`]: path-pair enumeration for arbitrary symmetric entry laws.
//! * [`montecarlo`]: sampling, dense Hermitian eigensolves and covariance
//!   estimation in the edge regime.

pub mod eigen;
pub mod error;
pub mod law;
pub mod majorant;
pub mod montecarlo;
pub mod paths;
pub mod series;
pub mod stats;
pub mod wick;

pub use error::{Error, Result};
pub use series::{rat, Rational};
