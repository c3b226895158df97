//! Raw moments of the cascade sum `S = sum_{m=1}^M beta_m`, where each
//! `beta_m = |h_m| |g_m|` is a product of two independent Rayleigh magnitudes
//! with `E|h|^2 = 2 sigma^2`.
//!
//! The general-`M` expressions are the canonical path. They follow from the
//! multinomial expansion of `E[S^n]` over the i.i.d. `beta_m`, and remain
//! valid for every `M >= 1` because each cross term vanishes when fewer than
//! the required number of distinct elements exist. The short listings for
//! small `M` are kept in [`piecewise_moments`] and checked against the
//! general form.

use crate::channel::draw_cascade_sum;
use crate::error::{Error, Result};
use crate::exec;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// The first four raw moments of `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// `[mu1, mu2, mu3, mu4]`.
    pub mu: [f64; 4],
    pub sigma2: f64,
    #[serde(rename = "M")]
    pub elements: u32,
    /// Standard errors, present for Monte Carlo estimates.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std_error: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<u64>,
}

impl Moments {
    /// Builds analytic-style moments from explicit values.
    pub fn from_values(mu: [f64; 4], sigma2: f64, elements: u32) -> Result<Self> {
        let m = Moments {
            mu,
            sigma2,
            elements,
            std_error: None,
            samples: None,
        };
        m.validate()?;
        Ok(m)
    }

    /// Positivity and the two Cauchy–Schwarz type inequalities.
    pub fn validate(&self) -> Result<()> {
        if self.mu.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "moments must be positive and finite, got {:?}",
                self.mu
            )));
        }
        let [m1, m2, _, m4] = self.mu;
        if m2 < m1 * m1 * (1.0 - 1e-12) || m4 < m2 * m2 * (1.0 - 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "moments violate mu2 >= mu1^2 or mu4 >= mu2^2: {:?}",
                self.mu
            )));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.mu[0]
    }

    pub fn variance(&self) -> f64 {
        self.mu[1] - self.mu[0] * self.mu[0]
    }

    /// Moment ratios `phi_n = mu_n / mu_{n-1}` with `mu_0 = 1`.
    pub fn ratios(&self) -> [f64; 4] {
        let [m1, m2, m3, m4] = self.mu;
        [m1, m2 / m1, m3 / m2, m4 / m3]
    }
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain {
            function: "moments",
            value: sigma2,
            domain: "sigma2 > 0",
        });
    }
    Ok(())
}

/// `E[beta^n]` for a single element: `pi sigma^2/2, 4 sigma^4,
/// 9 pi sigma^6/2, 64 sigma^8`.
pub fn beta_moment(n: u32, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    let v = match n {
        1 => PI / 2.0 * sigma2,
        2 => 4.0 * sigma2.powi(2),
        3 => 4.5 * PI * sigma2.powi(3),
        4 => 64.0 * sigma2.powi(4),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "beta moment order {n} outside 1..=4"
            )))
        }
    };
    Ok(v)
}

/// General-`M` expression of `E[S^n]`, `n` in 1..=4.
fn general(n: u32, m: f64, sigma2: f64) -> f64 {
    let pi2 = PI * PI;
    match n {
        1 => m * PI * sigma2 / 2.0,
        2 => (4.0 + (m - 1.0) * pi2 / 4.0) * m * sigma2.powi(2),
        3 => m * PI * (4.5 + 6.0 * (m - 1.0) + (m - 1.0) * (m - 2.0) * pi2 / 8.0) * sigma2.powi(3),
        4 => {
            (64.0 * m
                + 48.0 * m * (m - 1.0)
                + 9.0 * m * (m - 1.0) * pi2
                + 6.0 * m * (m - 1.0) * (m - 2.0) * pi2
                + m * (m - 1.0) * (m - 2.0) * (m - 3.0) * pi2 * pi2 / 16.0)
                * sigma2.powi(4)
        }
        _ => unreachable!("moment order checked by caller"),
    }
}

fn check_elements(m: u32) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    Ok(())
}

/// Exact raw moments of `S` for `M` elements.
pub fn analytic_moments(m: u32, sigma2: f64) -> Result<Moments> {
    check_elements(m)?;
    check_sigma2(sigma2)?;
    let mf = m as f64;
    let mu = [1, 2, 3, 4].map(|n| general(n, mf, sigma2));
    Ok(Moments {
        mu,
        sigma2,
        elements: m,
        std_error: None,
        samples: None,
    })
}

/// The small-`M` listings of the third and fourth moments, with the general
/// branch used from `M = 3` (third) and `M = 4` (fourth) onward.
pub fn piecewise_moments(m: u32, sigma2: f64) -> Result<Moments> {
    check_elements(m)?;
    check_sigma2(sigma2)?;
    let pi2 = PI * PI;
    let mf = m as f64;
    let mu3 = match m {
        1 => 9.0 * PI * sigma2.powi(3) / 2.0,
        2 => 21.0 * PI * sigma2.powi(3),
        _ => general(3, mf, sigma2),
    };
    let mu4 = match m {
        1 => 64.0 * sigma2.powi(4),
        2 => (224.0 + 18.0 * pi2) * sigma2.powi(4),
        3 => (480.0 + 90.0 * pi2) * sigma2.powi(4),
        _ => general(4, mf, sigma2),
    };
    Ok(Moments {
        mu: [general(1, mf, sigma2), general(2, mf, sigma2), mu3, mu4],
        sigma2,
        elements: m,
        std_error: None,
        samples: None,
    })
}

/// Evaluates the general branch of order `n` at `M`, for consistency checks
/// against [`piecewise_moments`].
pub fn general_branch(n: u32, m: u32, sigma2: f64) -> Result<f64> {
    check_elements(m)?;
    check_sigma2(sigma2)?;
    if !(1..=4).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "moment order {n} outside 1..=4"
        )));
    }
    Ok(general(n, m as f64, sigma2))
}

/// Jackknife block size; keeps at least three blocks at the minimum sample count.
const BLOCK: u64 = 4096;

/// Minimum sample count accepted by [`empirical_moments`].
pub const MIN_EMPIRICAL_SAMPLES: u64 = 10_000;

/// Monte Carlo raw moments of `S` with delete-one-block jackknife standard
/// errors.
pub fn empirical_moments(m: u32, sigma2: f64, samples: u64, seed: u64) -> Result<Moments> {
    check_elements(m)?;
    check_sigma2(sigma2)?;
    if samples < MIN_EMPIRICAL_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "empirical moments need at least {MIN_EMPIRICAL_SAMPLES} samples, got {samples}"
        )));
    }
    let sigma = sigma2.sqrt();
    // per chunk: power sums [n, s, s^2, s^3, s^4] of consecutive blocks
    let per_chunk = exec::map_chunks(samples, seed, |_, len, rng| {
        let mut blocks = Vec::with_capacity(len.div_ceil(BLOCK) as usize);
        let mut left = len;
        while left > 0 {
            let n = left.min(BLOCK);
            let mut acc = [n as f64, 0.0, 0.0, 0.0, 0.0];
            for _ in 0..n {
                let s = draw_cascade_sum(m, sigma, rng);
                let s2 = s * s;
                acc[1] += s;
                acc[2] += s2;
                acc[3] += s2 * s;
                acc[4] += s2 * s2;
            }
            blocks.push(acc);
            left -= n;
        }
        blocks
    });
    let blocks: Vec<[f64; 5]> = per_chunk.into_iter().flatten().collect();
    let mut total = [0.0; 5];
    for b in &blocks {
        for k in 0..5 {
            total[k] += b[k];
        }
    }
    let n = total[0];
    let mu = [total[1] / n, total[2] / n, total[3] / n, total[4] / n];
    let g = blocks.len() as f64;
    let mut std_error = [0.0; 4];
    for k in 0..4 {
        let loo: Vec<f64> = blocks
            .iter()
            .map(|b| (total[k + 1] - b[k + 1]) / (n - b[0]))
            .collect();
        let mean = loo.iter().sum::<f64>() / g;
        let ss: f64 = loo.iter().map(|v| (v - mean).powi(2)).sum();
        std_error[k] = ((g - 1.0) / g * ss).sqrt();
    }
    Ok(Moments {
        mu,
        sigma2,
        elements: m,
        std_error: Some(std_error),
        samples: Some(samples),
    })
}
