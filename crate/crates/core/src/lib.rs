//! Error-rate analysis of a downlink NOMA system assisted by a large
//! intelligent surface (LIS).
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`] and [`quad`] provide the special functions, the two Meijer-G
//!   instances and adaptive quadrature everything else relies on.
//! * [`moments`] computes the raw moments of the cascade sum
//!   `S = sum_m |h_m| |g_{m,l}|`, and [`pdf`] fits and evaluates the
//!   moment-matched Meijer-G approximant alongside the exact double-Rayleigh
//!   and Gaussian (CLT) models.
//! * [`pep`] holds the error-event algebra and every pairwise error
//!   probability route, [`asymptotics`] the high-SNR expansion and diversity
//!   order, and [`union_bound`] the event enumeration and BER bound.
//! * [`channel`] is the scenario description plus the seeded Monte Carlo link
//!   simulator used as an oracle for all of the above.
//! * [`validation`] runs the cross-model acceptance criteria and is shared by
//!   the `validate` CLI subcommand and the integration test suite.
//!
//! Monte Carlo work is split into fixed-size chunks with their own random
//! substreams, so results are identical with or without the `parallel`
//! feature and for any thread count.

// `!(x > 0.0)` is used on purpose so NaN fails validation, index loops
// walk several parallel arrays at once, and tabulated constants keep the
// digits they are published with.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision
)]

pub mod asymptotics;
pub mod channel;
pub mod error;
mod exec;
pub mod moments;
pub mod pdf;
pub mod pep;
pub mod quad;
pub mod specfun;
pub mod union_bound;
pub mod validation;

pub use channel::{Constellation, SnrGrid, SystemConfig};
pub use error::{Error, Result};
pub use moments::Moments;
pub use pdf::GParams;
pub use pep::ErrorEvent;

/// Converts decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to decibels.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
