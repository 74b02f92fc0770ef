//! Numerical toolkit for the critical beta-splitting random tree.
//!
//! The tree splits a clade of size `m` into parts `(i, m-i)` with probability
//! proportional to `1/(i(m-i))`; along the path to a fixed leaf the clade size
//! performs the harmonic descent chain with step law `1/(h_{m-1}(m-i))`.
//! Everything in this crate computes statistics of that process by three
//! independent routes that cross-check each other:
//!
//! - [`hd_exact`]: exact finite-n recurrences and closed-form sums,
//! - [`mellin`]: vertical-line contour integrals of Mellin transforms,
//! - [`asympt`]: asymptotic expansions with residue-computed coefficients,
//!
//! plus [`mgf_ldp`] (moment generating function, CLT parameters, and the
//! large-deviation rate function) and [`simulate`] (seeded, reproducible
//! Monte Carlo). The [`cli`] module wires these into subcommands and
//! cross-method verification suites.

pub mod asympt;
pub mod cli;
mod error;
pub mod hd_exact;
pub mod mellin;
pub mod mgf_ldp;
pub mod simulate;
pub mod specfun;

pub use error::{Error, Result};
