//! Special functions needed by the closed forms: Gamma and log-Gamma (real and
//! complex), digamma, erf/erfc and the Gaussian Q-function, the exponential
//! integral E1, the modified Bessel function K0, and the two Meijer-G
//! instances used by the density approximant and the PEP closed form.
//!
//! Everything here is self-contained and pure.

mod bessel;
mod erf;
mod expint;
mod gamma;
pub mod meijer;

pub use bessel::{bessel_k0, bessel_k0_scaled};
pub use erf::{erf_fn, erfc_fn, ln_erfc, ln_q_function, q_function};
pub use expint::{exp_int_e1, exp_int_e1_scaled};
pub use gamma::{digamma, gamma_fn, is_gamma_pole, ln_gamma, ln_gamma_complex};
pub use meijer::{meijer_g_1443, meijer_g_2012, MellinBarnesSpec};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// A real number carried as `sign * exp(ln_abs)` so that products of Gamma
/// functions with extreme arguments neither overflow nor underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    pub ln_abs: f64,
    pub sign: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        ln_abs: f64::NEG_INFINITY,
        sign: 0.0,
    };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogValue {
                ln_abs: x.abs().ln(),
                sign: x.signum(),
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }

    /// Multiplies by a positive factor given by its logarithm.
    pub fn scale_ln(self, ln_factor: f64) -> Self {
        LogValue {
            ln_abs: self.ln_abs + ln_factor,
            sign: self.sign,
        }
    }

    pub fn is_finite(self) -> bool {
        self.sign == 0.0 || self.ln_abs.is_finite()
    }
}
