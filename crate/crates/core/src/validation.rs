//! Cross-model acceptance criteria.
//!
//! Each criterion compares two independent routes to the same quantity
//! (closed form against quadrature, analytic against Monte Carlo, and so on)
//! and returns a one-line verdict. Quick mode restricts the element counts to
//! `M in {1, 3, 6}` where a criterion sweeps `M` and shrinks the Monte Carlo
//! budgets; thresholds are the same in both modes.

use crate::asymptotics::diversity_order;
use crate::channel::{simulate_ber_with, simulate_pep, BerOptions, SnrGrid, SystemConfig};
use crate::error::{Error, Result};
use crate::moments::{analytic_moments, empirical_moments, piecewise_moments};
use crate::pdf::{fit_for, ks_distance, pdf_double_rayleigh, pdf_g, PdfModel};
use crate::pep::PepMethod;
use crate::pep::{
    adjudicate_clt, default_event, pep_clt, pep_general_with, pep_m1, pep_quadrature, ErrorEvent,
};
use crate::union_bound::union_bound_curve;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    /// Reduced Monte Carlo budgets.
    pub quick: bool,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            quick: false,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    /// `[PASS] 3 pdf fidelity: ...`
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("[{tag}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

pub const CRITERIA: [(u32, &str); 10] = [
    (1, "moment identities"),
    (2, "piecewise moment branches"),
    (3, "pdf fidelity"),
    (4, "integral identities"),
    (5, "bound dominance"),
    (6, "diversity order"),
    (7, "union bound"),
    (8, "power-allocation sensitivity"),
    (9, "fitted a5 < a4"),
    (10, "gaussian-limit adjudication"),
];

struct Budget {
    moment_samples: u64,
    ks_samples: u64,
    ks_bins: usize,
    pep_trials: u64,
    ber_frames: u64,
    ber_min_errors: u64,
    moment_m: Vec<u32>,
    ks_m: Vec<u32>,
    identity_m: Vec<u32>,
    dominance_m: Vec<u32>,
    diversity_m: Vec<u32>,
    sensitivity_m: Vec<u32>,
    fit_m: Vec<u32>,
}

fn budget(opts: &ValidationOptions) -> Budget {
    if opts.quick {
        Budget {
            moment_samples: 1_000_000,
            ks_samples: 1_000_000,
            ks_bins: 2048,
            pep_trials: 100_000,
            ber_frames: 1 << 20,
            ber_min_errors: 100,
            moment_m: vec![1, 3, 6],
            ks_m: vec![1, 3, 6],
            identity_m: vec![3, 6],
            dominance_m: vec![1, 3],
            diversity_m: vec![3, 6],
            sensitivity_m: vec![3, 6],
            fit_m: vec![1, 3, 6],
        }
    } else {
        Budget {
            moment_samples: 10_000_000,
            ks_samples: 10_000_000,
            ks_bins: 8192,
            pep_trials: 1_000_000,
            ber_frames: 1 << 24,
            ber_min_errors: 200,
            moment_m: vec![1, 2, 3, 4, 8, 16],
            ks_m: vec![1, 3, 6, 9],
            identity_m: vec![2, 3, 6, 15],
            dominance_m: vec![1, 3, 15],
            diversity_m: vec![3, 6, 9, 12, 15],
            sensitivity_m: (2..=10).collect(),
            fit_m: (1..=64).collect(),
        }
    }
}

/// Runs one criterion. Numerical failures inside a criterion are reported as
/// a failed result rather than an error.
pub fn run_criterion(id: u32, opts: &ValidationOptions) -> Result<CriterionResult> {
    let name = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map(|c| c.1)
        .ok_or_else(|| Error::InvalidArgument(format!("no criterion {id}")))?;
    let b = budget(opts);
    let outcome = match id {
        1 => moment_identities(&b, opts.seed),
        2 => piecewise_branches(),
        3 => pdf_fidelity(&b, opts.seed),
        4 => integral_identities(&b),
        5 => bound_dominance(&b, opts.seed),
        6 => diversity(&b),
        7 => union_bound_check(&b, opts.seed),
        8 => power_sensitivity(&b),
        9 => fitted_ordering(&b),
        _ => clt_adjudication(),
    };
    let (passed, detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("evaluation error: {e}")),
    };
    Ok(CriterionResult {
        id,
        name: name.into(),
        passed,
        detail,
    })
}

pub fn run_all(opts: &ValidationOptions) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .map(|(id, _)| run_criterion(*id, opts).expect("known id"))
        .collect()
}

type Outcome = Result<(bool, String)>;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn moment_identities(b: &Budget, seed: u64) -> Outcome {
    let start = Instant::now();
    let sigma2 = 0.5;
    let mut worst = (0.0f64, 0u32, 0usize);
    for &m in &b.moment_m {
        let a = analytic_moments(m, sigma2)?;
        let e = empirical_moments(m, sigma2, b.moment_samples, seed + m as u64)?;
        let se = e.std_error.expect("empirical moments carry errors");
        for n in 0..4 {
            let z = (e.mu[n] - a.mu[n]).abs() / se[n];
            if z > worst.0 {
                worst = (z, m, n + 1);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst.0 <= 5.0 && secs < 120.0,
        format!(
            "max |emp - analytic| = {:.2} SE (M={}, order {}), M = {:?}, {} samples, {:.1} s",
            worst.0, worst.1, worst.2, b.moment_m, b.moment_samples, secs
        ),
    ))
}

fn piecewise_branches() -> Outcome {
    let tol = 8.0 * f64::EPSILON;
    let mut worst = (0.0f64, 1u32, 1usize);
    for m in 1..=16 {
        let a = analytic_moments(m, 0.5)?;
        let p = piecewise_moments(m, 0.5)?;
        for n in 0..4 {
            let r = rel(p.mu[n], a.mu[n]);
            if r > worst.0 {
                worst = (r, m, n + 1);
            }
        }
    }
    Ok((
        worst.0 <= tol,
        format!(
            "max relative difference {:.1e} (M={}, order {}), tolerance {:.1e}, M = 1..16",
            worst.0, worst.1, worst.2, tol
        ),
    ))
}

fn pdf_fidelity(b: &Budget, seed: u64) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for &m in &b.ks_m {
        let cfg = SystemConfig::unit_distance(m, 1.0);
        let ks = ks_distance(
            PdfModel::G,
            &cfg,
            0,
            b.ks_samples,
            seed + m as u64,
            b.ks_bins,
        )?;
        ok &= ks.statistic < 0.01;
        parts.push(format!("KS(M={m}) {:.4}", ks.statistic));
    }
    let cfg = SystemConfig::unit_distance(1, 1.0);
    let params = fit_for(&cfg)?;
    let mut sup = (0.0f64, 0.0);
    for k in 1..=800 {
        let q = 0.01 * k as f64;
        let d = (pdf_g(q, &cfg, 0, &params)? - pdf_double_rayleigh(q, &cfg, 0)).abs();
        if d > sup.0 {
            sup = (d, q);
        }
    }
    ok &= sup.0 < 1e-3;
    parts.push(format!("sup|g - dr|(M=1) {:.2e} at q={:.2}", sup.0, sup.1));
    let cfg = SystemConfig::unit_distance(15, 1.0);
    let ks = ks_distance(PdfModel::Clt, &cfg, 0, b.ks_samples, seed + 15, b.ks_bins)?;
    ok &= ks.statistic < 0.02;
    parts.push(format!("KS clt(M=15) {:.4}", ks.statistic));
    Ok((ok, parts.join(", ")))
}

fn events(cfg: &SystemConfig) -> Result<Vec<ErrorEvent>> {
    (0..cfg.users).map(|u| default_event(cfg, u)).collect()
}

fn integral_identities(b: &Budget) -> Outcome {
    let grid = SnrGrid::db_range(0.0, 30.0, 5.0)?;
    let mut worst_g = 0.0f64;
    for &m in &b.identity_m {
        let cfg = SystemConfig::reference(m);
        let params = fit_for(&cfg)?;
        for e in events(&cfg)? {
            for &g in grid.points() {
                let ev = e.with_snr(g);
                let a = pep_general_with(&params, &cfg, &ev)?.raw;
                let q = pep_quadrature(&cfg, &ev, PdfModel::G)?.raw;
                worst_g = worst_g.max(rel(a, q));
            }
        }
    }
    let mut worst_m1 = 0.0f64;
    let cfg = SystemConfig::reference(1);
    for e in events(&cfg)? {
        for &g in grid.points() {
            let ev = e.with_snr(g);
            let a = pep_m1(&cfg, &ev)?.raw;
            let q = pep_quadrature(&cfg, &ev, PdfModel::DoubleRayleigh)?.raw;
            worst_m1 = worst_m1.max(rel(a, q));
        }
    }
    Ok((
        worst_g <= 1e-6 && worst_m1 <= 1e-8,
        format!(
            "general vs quadrature(g) max rel {worst_g:.2e} (tol 1e-6, M = {:?}); \
             m1 vs quadrature(dr) max rel {worst_m1:.2e} (tol 1e-8); 0-30 dB",
            b.identity_m
        ),
    ))
}

/// Secant slope over the last two grid points, in decades per decade of SNR.
fn end_slope(db: &[f64], p: &[f64]) -> f64 {
    let n = db.len();
    crate::asymptotics::secant_slope(p[n - 2], p[n - 1], db[n - 2], db[n - 1])
}

fn bound_dominance(b: &Budget, seed: u64) -> Outcome {
    let grid = SnrGrid::db_range(0.0, 40.0, 5.0)?;
    let db = grid.db();
    // the slope window is the last two points, 30 and 40 dB
    let slope_db = [30.0, 40.0];
    let mut ok = true;
    let mut parts = Vec::new();
    for &m in &b.dominance_m {
        let cfg = SystemConfig::reference(m);
        let params = fit_for(&cfg)?;
        for e in events(&cfg)? {
            let mut mc = Vec::new();
            for (i, &g) in grid.points().iter().enumerate() {
                mc.push(simulate_pep(
                    &cfg,
                    &e.with_snr(g),
                    b.pep_trials,
                    seed + 97 * i as u64,
                )?);
            }
            let mut forms: Vec<(&str, Vec<f64>)> = Vec::new();
            let general = grid
                .points()
                .iter()
                .map(|&g| Ok(pep_general_with(&params, &cfg, &e.with_snr(g))?.raw))
                .collect::<Result<Vec<f64>>>()?;
            forms.push(("general", general));
            if m == 1 {
                let v = grid
                    .points()
                    .iter()
                    .map(|&g| Ok(pep_m1(&cfg, &e.with_snr(g))?.raw))
                    .collect::<Result<Vec<f64>>>()?;
                forms.push(("m1", v));
            }
            if m > 10 {
                let v = grid
                    .points()
                    .iter()
                    .map(|&g| Ok(pep_clt(&cfg, &e.with_snr(g))?.raw))
                    .collect::<Result<Vec<f64>>>()?;
                forms.push(("clt", v));
            }
            let mc_v: Vec<f64> = mc.iter().map(|p| p.value).collect();
            let idx: Vec<usize> = slope_db
                .iter()
                .map(|d| {
                    db.iter()
                        .position(|x| (x - d).abs() < 1e-9)
                        .expect("grid point")
                })
                .collect();
            let pick = |v: &[f64]| [v[idx[0]], v[idx[1]]];
            let s_mc = end_slope(&slope_db, &pick(&mc_v));
            for (label, v) in &forms {
                let dominated = v
                    .iter()
                    .zip(&mc)
                    .all(|(c, p)| *c >= p.value - 3.0 * p.std_error);
                let s_cf = end_slope(&slope_db, &pick(v));
                let slope_ok = rel(s_mc, s_cf) <= 0.1;
                ok &= dominated && slope_ok;
                if !dominated || !slope_ok {
                    parts.push(format!(
                        "M={m} user {} {label}: dominance {}, slope {s_cf:.3} vs mc {s_mc:.3}",
                        e.user + 1,
                        if dominated { "ok" } else { "violated" }
                    ));
                }
            }
        }
    }
    if parts.is_empty() {
        parts.push(format!(
            "all closed forms dominate Monte Carlo with matching 30-40 dB slopes, M = {:?}",
            b.dominance_m
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn diversity(b: &Budget) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for &m in &b.diversity_m {
        let cfg = SystemConfig::reference(m);
        let u0 = diversity_order(&cfg, 0, true)?;
        let u1 = diversity_order(&cfg, 1, true)?;
        let worst = u0
            .discrepancy
            .unwrap_or(f64::INFINITY)
            .max(u1.discrepancy.unwrap_or(f64::INFINITY));
        let within = worst <= 0.05;
        let equal = u0.analytic == u1.analytic;
        let increasing = u0.analytic > prev;
        prev = u0.analytic;
        ok &= within && equal && increasing;
        parts.push(format!(
            "M={m} d={:.3} num={:.3}/{:.3} ({:+.1}%)",
            u0.analytic,
            u0.numeric.unwrap_or(f64::NAN),
            u1.numeric.unwrap_or(f64::NAN),
            100.0 * (u0.numeric.unwrap_or(f64::NAN) - u0.analytic) / u0.analytic
        ));
    }
    Ok((ok, parts.join(", ")))
}

/// First SNR (dB) where `p` falls to `level`, log-linear between grid points.
pub fn snr_at_level(db: &[f64], p: &[f64], level: f64) -> Option<f64> {
    for i in 1..p.len() {
        if p[i - 1] >= level && p[i] < level {
            let (l0, l1) = (p[i - 1].ln(), p[i].ln());
            let t = (level.ln() - l0) / (l1 - l0);
            return Some(db[i - 1] + t * (db[i] - db[i - 1]));
        }
    }
    None
}

/// Target error level for the horizontal gap.
pub const GAP_LEVEL: f64 = 1.8e-3;

fn union_bound_check(b: &Budget, seed: u64) -> Outcome {
    let mc_grid = SnrGrid::db_range(0.0, 30.0, 5.0)?;
    let fine = SnrGrid::db_range(0.0, 40.0, 0.25)?;
    let fine_db = fine.db();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut crossing = [[f64::NAN; 2]; 2];
    for (mi, m) in [3u32, 6].into_iter().enumerate() {
        let cfg = SystemConfig::reference(m);
        let opts = BerOptions {
            max_frames: b.ber_frames,
            min_errors: Some(b.ber_min_errors),
            seed: seed + m as u64,
        };
        let ber = simulate_ber_with(&cfg, &mc_grid, &opts)?;
        for (u, curve) in ber.iter().enumerate() {
            let bound = union_bound_curve(&cfg, u, &mc_grid, PepMethod::General, false)?;
            let dominated = bound
                .iter()
                .zip(&curve.points)
                .all(|(ub, p)| ub.value >= p.ci_low);
            ok &= dominated;
            let bits: u64 = curve.points.iter().map(|p| p.bits).max().unwrap_or(0);
            ok &= bits <= 100_000_000;
            if !dominated {
                parts.push(format!("M={m} user {}: bound below simulation", u + 1));
            }
            let ub = union_bound_curve(&cfg, u, &fine, PepMethod::General, false)?;
            let v: Vec<f64> = ub.iter().map(|x| x.raw).collect();
            crossing[u][mi] = snr_at_level(&fine_db, &v, GAP_LEVEL).unwrap_or(f64::NAN);
        }
    }
    for (u, want) in [(0usize, 9.8), (1, 10.0)] {
        let gap = crossing[u][0] - crossing[u][1];
        let good = (gap - want).abs() <= 0.7;
        ok &= good;
        parts.push(format!(
            "user {} gap {gap:.2} dB (want {want} +- 0.7)",
            u + 1
        ));
    }
    parts.push(format!("max {} frames per point", b.ber_frames));
    Ok((ok, parts.join(", ")))
}

fn power_sensitivity(b: &Budget) -> Outcome {
    let grid = SnrGrid::from_db(&[15.0])?;
    let mut ok = true;
    let mut parts = Vec::new();
    for &m in &b.sensitivity_m {
        let mut diff = [0.0; 2];
        for (u, d) in diff.iter_mut().enumerate() {
            let hi = union_bound_curve(
                &SystemConfig::reference(m).with_first_power(0.8),
                u,
                &grid,
                PepMethod::General,
                false,
            )?;
            let lo = union_bound_curve(
                &SystemConfig::reference(m).with_first_power(0.6),
                u,
                &grid,
                PepMethod::General,
                false,
            )?;
            *d = (hi[0].value - lo[0].value).abs();
        }
        let good = diff[0] > diff[1];
        ok &= good;
        if !good {
            parts.push(format!(
                "M={m}: |dPe| user 1 {:.3e} <= user 2 {:.3e}",
                diff[0], diff[1]
            ));
        }
    }
    if parts.is_empty() {
        parts.push(format!(
            "user 1 more sensitive at 15 dB for every M in {:?}",
            b.sensitivity_m
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn fitted_ordering(b: &Budget) -> Outcome {
    let mut ok = true;
    let mut bad = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    let mut increasing = true;
    for &m in &b.fit_m {
        let p = fit_for(&SystemConfig::reference(m))?;
        let ordered = !p.complex_pair && p.a5.re < p.a4.re;
        if !ordered {
            bad.push(m);
        }
        increasing &= p.a5.re > prev;
        prev = p.a5.re;
        ok &= ordered;
    }
    ok &= increasing;
    let mut detail = if bad.is_empty() {
        format!("a5 < a4 for all {} fitted M", b.fit_m.len())
    } else {
        format!("a5 < a4 fails (complex pair or reversed) at M = {bad:?}")
    };
    detail.push_str(if increasing {
        "; Re a5 increasing"
    } else {
        "; Re a5 not increasing"
    });
    Ok((ok, detail))
}

fn clt_adjudication() -> Outcome {
    let grid = SnrGrid::db_range(0.0, 30.0, 5.0)?;
    let mut parts = Vec::new();
    for m in [15, 30] {
        let cfg = SystemConfig::reference(m);
        for e in events(&cfg)? {
            let a = adjudicate_clt(&cfg, &e, &grid)?;
            parts.push(format!(
                "M={m} user {}: scaled {:.1e}, unscaled {:.1e} ({})",
                e.user + 1,
                a.max_rel_scaled,
                a.max_rel_unscaled,
                a.verdict
            ));
        }
    }
    Ok((true, parts.join("; ")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_crossing() {
        let db = [0.0, 10.0, 20.0];
        let p = [1e-1, 1e-2, 1e-3];
        assert!((snr_at_level(&db, &p, 10f64.powf(-1.5)).unwrap() - 5.0).abs() < 1e-12);
        assert!(snr_at_level(&db, &p, 1e-5).is_none());
    }

    #[test]
    fn cheap_criteria_run() {
        let opts = ValidationOptions {
            quick: true,
            seed: 1,
        };
        let r = run_criterion(2, &opts).unwrap();
        assert!(r.passed, "{}", r.line());
        assert!(run_criterion(11, &opts).is_err());
    }
}
