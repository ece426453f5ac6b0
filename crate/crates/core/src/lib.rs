//! IRS-assisted THz massive-MIMO link simulation.
//!
//! The crate models a narrowband downlink in which a base station with a
//! large uniform linear array serves multiple users, each helped by a set of
//! passive reflecting surfaces mounted on a facing wall. It provides:
//!
//! - geometric line-of-sight channel construction with molecular absorption
//!   and reflector cascades ([`array`]),
//! - ternary-tree hierarchical beam codebooks and their hybrid (analog +
//!   digital) realizations ([`codebook`]),
//! - the cooperative three-phase beam training protocol together with the
//!   exhaustive-search oracle and search-count accounting ([`training`]),
//! - reflector phase selection, analog ARV stages, water-filling and
//!   block-diagonalization digital stages, and rate evaluation
//!   ([`beamforming`]),
//! - Monte Carlo experiment drivers with deterministic per-trial RNG streams
//!   and CSV/JSON persistence ([`sim`]).
//!
//! All operations are pure functions of their inputs; constructed channels
//! and codebooks are immutable and safe to share across worker threads.

pub mod array;
pub mod beamforming;
pub mod codebook;
pub mod error;
pub mod rng;
pub mod sim;
pub mod training;

pub use error::Error;

/// Complex scalar used throughout the crate.
pub type Cx = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<Cx>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<Cx>;

/// Convenience alias for fallible operations.
pub type Result<T> = std::result::Result<T, Error>;
