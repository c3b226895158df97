//! Union bound on the symbol error probability of one user.
//!
//! Every combination of transmitted tuple, wrong hypothesis for the user
//! and SIC outcome at the stronger users is one term; the bound is the mean
//! PEP over all `tau` terms. Terms with the same `(vartheta, |delta_bar|)`
//! have the same PEP and are merged into one weighted event.

use crate::channel::{SnrGrid, SystemConfig};
use crate::error::{Error, Result};
use crate::exec;
use crate::pep::{build_event, ErrorEvent, PepEvaluator, PepMethod};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// How terms are weighted. Only uniform weighting over the enumerated
/// combinations is implemented.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SicWeighting {
    #[default]
    Uniform,
}

/// One distinct event and how many combinations map onto it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEvent {
    pub event: ErrorEvent,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEnumeration {
    pub user: usize,
    pub events: Vec<WeightedEvent>,
    /// Number of enumerated combinations; equals the sum of the weights.
    pub tau: u64,
    /// Combinations with `vartheta <= 0`.
    pub nonpositive: u64,
    pub weighting: SicWeighting,
}

/// Mixed-radix counter over `sizes`; `None` after the last tuple.
fn next_index(idx: &mut [usize], sizes: &[usize]) -> bool {
    for (i, s) in idx.iter_mut().zip(sizes) {
        *i += 1;
        if *i < *s {
            return true;
        }
        *i = 0;
    }
    false
}

fn key(e: &ErrorEvent) -> (i64, i64) {
    (
        (e.vartheta * 1e9).round() as i64,
        (e.delta_bar.norm() * 1e9).round() as i64,
    )
}

/// Enumerates the error events of `user`. With `perfect_sic_only` the SIC
/// errors are fixed at zero.
pub fn enumerate_events(
    config: &SystemConfig,
    user: usize,
    perfect_sic_only: bool,
) -> Result<EventEnumeration> {
    config.validate()?;
    config.check_user(user)?;
    let own = config.constellation(user).points();
    if own.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "user {user} has a single-symbol constellation, no pairwise events"
        )));
    }
    let sizes: Vec<usize> = (0..config.users)
        .map(|i| config.constellation(i).len())
        .collect();
    let sic_sizes: Vec<usize> = if perfect_sic_only {
        vec![1; user]
    } else {
        sizes[..user].to_vec()
    };
    let mut merged: BTreeMap<(i64, i64), WeightedEvent> = BTreeMap::new();
    let (mut tau, mut nonpositive) = (0u64, 0u64);
    let mut xi = vec![0usize; config.users];
    loop {
        let x: Vec<Complex64> = xi
            .iter()
            .enumerate()
            .map(|(i, &k)| config.constellation(i).points()[k])
            .collect();
        for (b, &xbar) in own.iter().enumerate() {
            if b == xi[user] {
                continue;
            }
            let mut si = vec![0usize; user];
            loop {
                let sic: Vec<Complex64> = if perfect_sic_only {
                    vec![Complex64::new(0.0, 0.0); user]
                } else {
                    si.iter()
                        .enumerate()
                        .map(|(i, &k)| x[i] - config.constellation(i).points()[k])
                        .collect()
                };
                let e = build_event(config, user, &x, xbar, &sic)?;
                tau += 1;
                if e.vartheta <= 0.0 {
                    nonpositive += 1;
                }
                merged
                    .entry(key(&e))
                    .and_modify(|w| w.weight += 1)
                    .or_insert(WeightedEvent {
                        event: e,
                        weight: 1,
                    });
                if !next_index(&mut si, &sic_sizes) {
                    break;
                }
            }
        }
        if !next_index(&mut xi, &sizes) {
            break;
        }
    }
    Ok(EventEnumeration {
        user,
        events: merged.into_values().collect(),
        tau,
        nonpositive,
        weighting: SicWeighting::Uniform,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionBound {
    /// Bound clipped to at most one.
    pub value: f64,
    pub raw: f64,
    pub snr: f64,
    pub tau: u64,
    pub nonpositive: u64,
    pub method: String,
}

fn bound_with(
    enumeration: &EventEnumeration,
    eval: &PepEvaluator,
    snr: f64,
    method: &str,
) -> Result<UnionBound> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::Domain {
            function: "union_bound",
            value: snr,
            domain: "snr > 0",
        });
    }
    let terms = exec::map_ordered(enumeration.events.clone(), |w| {
        eval.eval(&w.event.with_snr(snr))
            .map(|p| p.value * w.weight as f64)
    });
    let mut sum = 0.0;
    for t in terms {
        sum += t?;
    }
    let raw = sum / enumeration.tau as f64;
    Ok(UnionBound {
        value: raw.min(1.0),
        raw,
        snr,
        tau: enumeration.tau,
        nonpositive: enumeration.nonpositive,
        method: method.into(),
    })
}

/// `(1/tau) sum PEP` at linear SNR `snr` with the chosen PEP route.
pub fn union_bound(
    config: &SystemConfig,
    user: usize,
    snr: f64,
    method: PepMethod,
) -> Result<UnionBound> {
    let en = enumerate_events(config, user, false)?;
    let eval = PepEvaluator::new(config, method)?;
    bound_with(&en, &eval, snr, &method.label())
}

/// [`union_bound`] over a grid, enumerating and fitting once.
pub fn union_bound_curve(
    config: &SystemConfig,
    user: usize,
    grid: &SnrGrid,
    method: PepMethod,
    perfect_sic_only: bool,
) -> Result<Vec<UnionBound>> {
    let en = enumerate_events(config, user, perfect_sic_only)?;
    let eval = PepEvaluator::new(config, method)?;
    let label = method.label();
    grid.points()
        .iter()
        .map(|&s| bound_with(&en, &eval, s, &label))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpsk_counts() {
        let cfg = SystemConfig::reference(3);
        let u0 = enumerate_events(&cfg, 0, false).unwrap();
        let u1 = enumerate_events(&cfg, 1, false).unwrap();
        assert_eq!(u0.tau, 4);
        assert_eq!(u1.tau, 8);
        assert_eq!(u0.nonpositive, 0);
        assert_eq!(u1.nonpositive, 2);
        for en in [&u0, &u1] {
            assert_eq!(en.events.iter().map(|w| w.weight).sum::<u64>(), en.tau);
            assert!(en.events.iter().all(|w| w.event.xbar != w.event.x[en.user]));
        }
        assert_eq!(enumerate_events(&cfg, 1, true).unwrap().tau, 4);
    }

    #[test]
    fn single_user_has_no_interference() {
        let cfg = SystemConfig::unit_distance(2, 0.5);
        let en = enumerate_events(&cfg, 0, false).unwrap();
        assert!(en.events.iter().all(|w| w.event.interference.norm() == 0.0));
    }

    #[test]
    fn imperfect_sic_adds_to_bound() {
        let cfg = SystemConfig::reference(3);
        let grid = SnrGrid::from_db(&[10.0, 20.0]).unwrap();
        let full = union_bound_curve(&cfg, 1, &grid, PepMethod::General, false).unwrap();
        let perfect = union_bound_curve(&cfg, 1, &grid, PepMethod::General, true).unwrap();
        for (f, p) in full.iter().zip(&perfect) {
            assert!(f.raw * f.tau as f64 >= p.raw * p.tau as f64);
        }
    }

    #[test]
    fn bound_decreases_with_snr() {
        let cfg = SystemConfig::reference(3);
        let grid = SnrGrid::db_range(0.0, 30.0, 10.0).unwrap();
        let b = union_bound_curve(&cfg, 0, &grid, PepMethod::General, false).unwrap();
        assert!(b.windows(2).all(|w| w[1].value < w[0].value));
    }
}
