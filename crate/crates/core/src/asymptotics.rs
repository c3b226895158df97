//! High-SNR behaviour of the averaged PEP.
//!
//! As `zeta -> inf` the G^{1,4}_{4,3} closed form is dominated by the first
//! poles of its four lower Gamma factors, giving four powers
//! `zeta^{-(a4/2 + 1)}`, `zeta^{-(a4/2 + 1/2)}`, `zeta^{-(a5/2 + 1)}` and
//! `zeta^{-(a5/2 + 1/2)}`. Since `zeta` is proportional to the SNR, the
//! diversity order is `min(a4, a5)/2 + 1/2` (real parts for a conjugate
//! pair). Distances only scale `zeta`, so the order is the same for every
//! user.

use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::pdf::{fit_for, GParams};
use crate::pep::{default_event, pep_general_with, pep_m1, zeta, ErrorEvent};
use crate::specfun::ln_gamma_complex;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// The four-term expansion at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPep {
    pub value: f64,
    /// Contributions of the four terms, before the common prefactor.
    pub terms: [Complex64; 4],
    pub zeta: f64,
    /// Gamma factors of the coefficients evaluated at poles. A pole in a
    /// denominator removes that term (reported here); a pole in a numerator
    /// is an error.
    pub poles: Vec<String>,
}

fn is_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// `prod Gamma(num) / prod Gamma(den)` in log form; `None` when a
/// denominator is at a pole (the coefficient is zero).
fn gamma_ratio(
    num: &[Complex64],
    den: &[Complex64],
    label: &str,
    poles: &mut Vec<String>,
) -> Result<Option<Complex64>> {
    for z in num {
        if is_pole(*z) {
            return Err(Error::GammaPole(format!(
                "{label}: numerator Gamma({}) at a pole; the expansion needs logarithmic terms here",
                z.re
            )));
        }
    }
    for z in den {
        if is_pole(*z) {
            poles.push(format!(
                "{label}: denominator Gamma({}) at a pole, term vanishes",
                z.re
            ));
            return Ok(None);
        }
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for z in num {
        acc += ln_gamma_complex(*z);
    }
    for z in den {
        acc -= ln_gamma_complex(*z);
    }
    Ok(Some(acc))
}

/// Four-term high-SNR expansion of the closed form for `params` at `zeta`.
pub fn expansion_at_zeta(params: &GParams, z: f64) -> Result<AsymptoticPep> {
    if !(z > 0.0) {
        return Err(Error::Domain {
            function: "pep_asymptotic",
            value: z,
            domain: "zeta > 0",
        });
    }
    let (a3, a4, a5) = (Complex64::new(params.a3, 0.0), params.a4, params.a5);
    let ln_z = z.ln();
    let mut poles = Vec::new();
    let mut terms = [Complex64::new(0.0, 0.0); 4];
    // (own, other) = (a4, a5) then (a5, a4)
    for (j, (b, c)) in [(a4, a5), (a5, a4)].into_iter().enumerate() {
        // zeta^{-(b/2 + 1)} term, sign -, factor 2
        let first = gamma_ratio(
            &[-(b - c) / 2.0, -(b - c + 1.0) / 2.0, b / 2.0 + 1.0],
            &[-(b - a3) / 2.0, -(b - a3 + 1.0) / 2.0],
            &format!("term {}", 2 * j + 1),
            &mut poles,
        )?;
        // zeta^{-(b/2 + 1/2)} term
        let second = gamma_ratio(
            &[(1.0 - b + c) / 2.0, -(b - c) / 2.0, (1.0 + b) / 2.0],
            &[(1.0 - b + a3) / 2.0, -(b - a3) / 2.0],
            &format!("term {}", 2 * j + 2),
            &mut poles,
        )?;
        if let Some(l) = first {
            terms[2 * j] = -2.0 * (l - (b / 2.0 + 1.0) * ln_z).exp();
        }
        if let Some(l) = second {
            terms[2 * j + 1] = (l - (b / 2.0 + 0.5) * ln_z).exp();
        }
    }
    let sum: Complex64 = terms.iter().sum();
    let ln_pref = params.ln_a1 + params.a2.ln() + (params.a6 - params.a3) * LN_2;
    Ok(AsymptoticPep {
        value: sum.re * ln_pref.exp(),
        terms,
        zeta: z,
        poles,
    })
}

/// High-SNR expansion of the general-`M` PEP for `event` (whose `lambda`
/// carries the SNR).
pub fn pep_asymptotic(config: &SystemConfig, event: &ErrorEvent) -> Result<AsymptoticPep> {
    let params = fit_for(config)?;
    expansion_at_zeta(&params, zeta(&params, config, event))
}

/// Exponent of the leading power of `zeta`: `-(min(a4, a5)/2 + 1/2)`.
pub fn dominant_exponent(params: &GParams) -> f64 {
    -(params.min_lower() / 2.0 + 0.5)
}

/// Analytic and numeric diversity order of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    #[serde(rename = "M")]
    pub elements: u32,
    pub user: usize,
    /// `min(a4, a5)/2 + 1/2`.
    pub analytic: f64,
    /// Which lower parameter attains the minimum: "a5", "a4", or
    /// "conjugate pair" when they share a real part.
    pub branch: String,
    pub a4: Complex64,
    pub a5: Complex64,
    /// Two-point secant `-d log10 PEP / d log10 snr`.
    pub numeric: Option<f64>,
    pub numeric_method: Option<String>,
    pub snr_low_db: f64,
    pub snr_high_db: f64,
    /// `|numeric - analytic| / analytic`.
    pub discrepancy: Option<f64>,
    pub note: String,
}

/// Secant slope `-(log10 p_hi - log10 p_lo) / ((hi_db - lo_db) / 10)`.
pub fn secant_slope(p_lo: f64, p_hi: f64, lo_db: f64, hi_db: f64) -> f64 {
    -(p_hi.log10() - p_lo.log10()) / ((hi_db - lo_db) / 10.0)
}

/// Top of the SNR range used for the numeric slope.
pub const SLOPE_HIGH_DB: f64 = 45.0;
/// The numeric slope spans the top 10 dB.
pub const SLOPE_SPAN_DB: f64 = 10.0;

/// Diversity order of `user` with an optional numeric cross-check on the
/// user's reference event (first symbols sent, second preferred, perfect
/// SIC). The numeric slope uses the single-element closed form when
/// `M = 1` and the general closed form otherwise.
pub fn diversity_order(
    config: &SystemConfig,
    user: usize,
    numeric: bool,
) -> Result<DiversityReport> {
    config.validate()?;
    config.check_user(user)?;
    let params = fit_for(config)?;
    let analytic = -dominant_exponent(&params);
    let branch = if params.complex_pair {
        "conjugate pair"
    } else if params.a5.re <= params.a4.re {
        "a5"
    } else {
        "a4"
    };
    let lo = SLOPE_HIGH_DB - SLOPE_SPAN_DB;
    let hi = SLOPE_HIGH_DB;
    let (num, method) = if numeric {
        let event = default_event(config, user)?;
        let at = |db: f64| -> Result<f64> {
            let e = event.with_snr(crate::db_to_linear(db));
            if config.elements == 1 {
                Ok(pep_m1(config, &e)?.raw)
            } else {
                Ok(pep_general_with(&params, config, &e)?.raw)
            }
        };
        let s = secant_slope(at(lo)?, at(hi)?, lo, hi);
        let m = if config.elements == 1 {
            "m1"
        } else {
            "general"
        };
        (Some(s), Some(m.to_string()))
    } else {
        (None, None)
    };
    Ok(DiversityReport {
        elements: config.elements,
        user,
        analytic,
        branch: branch.into(),
        a4: params.a4,
        a5: params.a5,
        numeric: num,
        numeric_method: method,
        snr_low_db: lo,
        snr_high_db: hi,
        discrepancy: num.map(|n| (n - analytic).abs() / analytic),
        note: "distances scale zeta only, so the diversity order is the same for every user".into(),
    })
}
