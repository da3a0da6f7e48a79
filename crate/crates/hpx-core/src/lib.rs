//! Hall-Petresco progression densities over finite vector spaces.
//!
//! The crate provides:
//! - element arithmetic and indexing for products of F_p vector spaces
//!   ([`group`]),
//! - Hall-Petresco groups: parametrization, membership, enumeration ([`hp`]),
//! - exact and Fourier-accelerated correlation counting ([`counting`]),
//! - exact and annealing-based extremal set search plus the lower convex
//!   envelope ([`extremal`]),
//! - the analytic bound sandwich and its constants ([`bounds`]),
//! - finite-scale IP averaging: spectral product formula, junta projections,
//!   double-limit tables, and the matrix skew product ([`ip`]),
//! - reproducible random-set sampling and statistics ([`montecarlo`]).

pub mod bounds;
pub mod counting;
pub mod error;
pub mod extremal;
pub mod group;
pub mod hp;
pub mod ip;
pub mod montecarlo;

pub use error::{Error, Result};
pub use group::{
    binom_mod_p, DenseFunction, Element, ExactDensity, GroupSpec, RealFunction, SubsetMask,
};
pub use hp::{HpParams, HpSpec, HpTuple};
