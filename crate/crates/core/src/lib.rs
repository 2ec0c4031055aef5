//! Adaptive low-rank matrix completion under bounded per-column noise.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: orthonormal bases, projections, restricted
//!   least-squares fits, coherence and principal angles.
//! * [`sampling`]: reproducible RNG streams and uniform row subsets.
//! * [`synthetic`]: ground-truth low-rank instances with bounded noise and
//!   the entry-counting [`synthetic::ObservationOracle`].
//! * [`lrebn`]: the adaptive column-by-column estimator.
//! * [`verify`]: executable checks of the inequalities the estimator's
//!   analysis relies on.
//! * [`formats`]: text formats for matrices, metadata and CSV output.
//! * [`cli`]: the command-line front end used by the `adaptive-mc` binary.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod formats;
pub mod linalg;
pub mod lrebn;
pub mod sampling;
pub mod synthetic;
pub mod verify;

pub use error::{Error, Result};
