//! Pairwise error probabilities.
//!
//! For an error event the conditional PEP given the cascade `q` is
//! `Q(q vartheta / lambda)` with
//!
//! ```text
//! vartheta = sqrt(P_l) |xbar_delta|^2 + 2 Re{xbar_delta conj(X_l)},
//! lambda   = |xbar_delta| sqrt(2 N0),
//! ```
//!
//! where `X_l` collects the residual SIC errors of stronger users and the
//! un-cancelled weaker users. Averaging the Chernoff form
//! `exp(-q^2 vartheta^2 / (2 lambda^2))` over a density of `q` gives the
//! closed forms here. The closed forms depend on `vartheta^2` only, so they
//! are upper bounds only when `vartheta > 0`; events with `vartheta <= 0`
//! carry a warning.

use crate::channel::{draw_cascade_sum, SnrGrid, SystemConfig};
use crate::error::{Error, Result};
use crate::exec;
use crate::pdf::{fit_for, CltParams, GParams, ModelDensity, PdfModel};
use crate::quad::{self, Tolerance};
use crate::specfun::meijer::ln_meijer_g_1443;
use crate::specfun::{erf_fn, exp_int_e1_scaled, q_function};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A (transmitted tuple, wrong hypothesis, SIC outcome) triple for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEvent {
    /// Zero-based user index `l`.
    pub user: usize,
    /// Transmitted symbols of all users.
    pub x: Vec<Complex64>,
    /// The wrongly preferred symbol of user `l`.
    pub xbar: Complex64,
    /// `delta_i = x_i - xhat_i` for the stronger users `i < l`.
    pub sic_errors: Vec<Complex64>,
    /// `x_l - xbar`.
    pub delta_bar: Complex64,
    /// `X_l`.
    pub interference: Complex64,
    pub vartheta: f64,
    pub lambda: f64,
    /// Noise level `lambda` was computed for.
    pub n0: f64,
}

fn in_constellation(points: &[Complex64], z: Complex64) -> bool {
    points.iter().any(|p| (p - z).norm() < 1e-9)
}

/// Builds the event, validating every symbol against its constellation.
/// An empty `sic_errors` means perfect SIC.
pub fn build_event(
    config: &SystemConfig,
    user: usize,
    x: &[Complex64],
    xbar: Complex64,
    sic_errors: &[Complex64],
) -> Result<ErrorEvent> {
    config.validate()?;
    config.check_user(user)?;
    if x.len() != config.users {
        return Err(Error::InvalidArgument(format!(
            "{} transmitted symbols for {} users",
            x.len(),
            config.users
        )));
    }
    for (i, xi) in x.iter().enumerate() {
        if !in_constellation(config.constellation(i).points(), *xi) {
            return Err(Error::InvalidArgument(format!(
                "{xi} is not a symbol of user {i}"
            )));
        }
    }
    if !in_constellation(config.constellation(user).points(), xbar) {
        return Err(Error::InvalidArgument(format!(
            "{xbar} is not a symbol of user {user}"
        )));
    }
    let delta_bar = x[user] - xbar;
    if delta_bar.norm() < 1e-12 {
        return Err(Error::InvalidArgument(
            "xbar equals the transmitted symbol".into(),
        ));
    }
    let sic: Vec<Complex64> = if sic_errors.is_empty() {
        vec![Complex64::new(0.0, 0.0); user]
    } else {
        sic_errors.to_vec()
    };
    if sic.len() != user {
        return Err(Error::InvalidArgument(format!(
            "user {user} needs {user} SIC error terms, got {}",
            sic.len()
        )));
    }
    for (i, d) in sic.iter().enumerate() {
        if !in_constellation(config.constellation(i).points(), x[i] - d) {
            return Err(Error::InvalidArgument(format!(
                "SIC error {d} of user {i} is not x_i minus a symbol"
            )));
        }
    }
    let sqrt_p: Vec<f64> = config.power.iter().map(|p| p.sqrt()).collect();
    let interference: Complex64 = sic
        .iter()
        .zip(&sqrt_p)
        .map(|(d, s)| d * *s)
        .sum::<Complex64>()
        + (user + 1..config.users)
            .map(|j| x[j] * sqrt_p[j])
            .sum::<Complex64>();
    let vartheta = sqrt_p[user] * delta_bar.norm_sqr() + 2.0 * (delta_bar * interference.conj()).re;
    Ok(ErrorEvent {
        user,
        x: x.to_vec(),
        xbar,
        sic_errors: sic,
        delta_bar,
        interference,
        vartheta,
        lambda: delta_bar.norm() * (2.0 * config.n0).sqrt(),
        n0: config.n0,
    })
}

/// The reference event of a user: every user sends its first symbol, the
/// detector prefers the second symbol, and SIC is perfect.
pub fn default_event(config: &SystemConfig, user: usize) -> Result<ErrorEvent> {
    config.check_user(user)?;
    let x: Vec<Complex64> = (0..config.users)
        .map(|i| config.constellation(i).points()[0])
        .collect();
    let c = config.constellation(user);
    if c.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "user {user} has a single-symbol constellation"
        )));
    }
    build_event(config, user, &x, c.points()[1], &[])
}

impl ErrorEvent {
    /// The same event at noise level `n0`.
    pub fn with_n0(&self, n0: f64) -> ErrorEvent {
        ErrorEvent {
            lambda: self.delta_bar.norm() * (2.0 * n0).sqrt(),
            n0,
            ..self.clone()
        }
    }

    /// The same event at linear average transmit SNR `snr = 1 / N0`.
    pub fn with_snr(&self, snr: f64) -> ErrorEvent {
        self.with_n0(1.0 / snr)
    }

    /// `vartheta / lambda`.
    pub fn ratio(&self) -> f64 {
        self.vartheta / self.lambda
    }
}

/// A PEP value: `value` is clipped to `[0, 1]`, `raw` is unclipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pep {
    pub value: f64,
    pub raw: f64,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl Pep {
    fn new(raw: f64, method: &str, event: &ErrorEvent) -> Pep {
        let mut warnings = Vec::new();
        if event.vartheta <= 0.0 {
            warnings.push(format!(
                "vartheta = {} <= 0: the averaged Chernoff forms depend on vartheta^2 and do not bound this event",
                event.vartheta
            ));
        }
        if raw > 1.0 {
            warnings.push(format!("raw value {raw} clipped to 1"));
        }
        Pep {
            value: raw.clamp(0.0, 1.0),
            raw,
            method: method.into(),
            std_error: None,
            warnings,
        }
    }
}

/// Conditional PEP at cascade value `q`.
///
/// `exact` gives `Q(z)` with `z = q vartheta / lambda`. The bound path gives
/// `exp(-sign(z) z^2 / 2)`: the Chernoff bound for `z >= 0` and a trivially
/// valid value above one for `z < 0`, where `Q(z) > 1/2`.
pub fn pep_conditional(q: f64, event: &ErrorEvent, exact: bool) -> Result<Pep> {
    if !(q >= 0.0) {
        return Err(Error::Domain {
            function: "pep_conditional",
            value: q,
            domain: "q >= 0",
        });
    }
    let z = q * event.ratio();
    let (raw, method) = if exact {
        (q_function(z), "conditional-exact")
    } else {
        ((-z.signum() * z * z / 2.0).exp(), "conditional-chernoff")
    };
    let raw = if z == 0.0 && !exact { 1.0 } else { raw };
    Ok(Pep::new(raw, method, event))
}

/// Averages the Chernoff form over a model density by adaptive quadrature.
pub fn pep_quadrature(config: &SystemConfig, event: &ErrorEvent, model: PdfModel) -> Result<Pep> {
    let method = format!("quadrature-{}", model.label());
    if let PdfModel::Empirical { samples, seed } = model {
        return empirical_average(config, event, samples, seed, &method);
    }
    let density = ModelDensity::new(model, config, event.user)?;
    let raw = chernoff_average(&density, event)?;
    Ok(Pep::new(raw, &method, event))
}

/// `int_0^inf exp(-q^2 k^2 / 2) f(q) dq` with `k = vartheta / lambda`.
pub(crate) fn chernoff_average(density: &ModelDensity, event: &ErrorEvent) -> Result<f64> {
    let k = event.ratio().abs();
    if k == 0.0 {
        return Ok(1.0);
    }
    let tol = Tolerance {
        abs_tol: 0.0,
        rel_tol: 1e-11,
        max_intervals: 4000,
    };
    let width = density.support_end().min(1.0 / k) / 8.0;
    let f = |q: f64| -> Result<f64> { Ok((-0.5 * q * q * k * k).exp() * density.density(q)?) };
    Ok(quad::try_integrate_to_infinity(f, 0.0, width, &tol)?.value)
}

fn empirical_average(
    config: &SystemConfig,
    event: &ErrorEvent,
    samples: u64,
    seed: u64,
    method: &str,
) -> Result<Pep> {
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "at least two samples are needed".into(),
        ));
    }
    config.validate()?;
    config.check_user(event.user)?;
    let k = event.ratio();
    let sigma = config.sigma2.sqrt();
    let inv_d = 1.0 / config.distance_factor(event.user);
    let m = config.elements;
    let sums = exec::map_chunks(samples, seed, |_, len, rng| {
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            let q = draw_cascade_sum(m, sigma, rng) * inv_d;
            let v = (-0.5 * q * q * k * k).exp();
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    let mut pep = Pep::new(mean, method, event);
    pep.std_error = Some((var / n).sqrt());
    Ok(pep)
}

/// `zeta_l = 2 a2^2 vartheta^2 / (D^2 lambda^2)`, the argument of the
/// closed form.
pub fn zeta(params: &GParams, config: &SystemConfig, event: &ErrorEvent) -> f64 {
    let d = config.distance_factor(event.user);
    2.0 * params.a2 * params.a2 * event.vartheta * event.vartheta
        / (d * d * event.lambda * event.lambda)
}

/// Closed form for any `M`:
/// `a1 a2 2^{a4+a5-a3} / sqrt(pi) G^{1,4}_{4,3}(zeta)`.
pub fn pep_general(config: &SystemConfig, event: &ErrorEvent) -> Result<Pep> {
    let params = fit_for(config)?;
    pep_general_with(&params, config, event)
}

/// [`pep_general`] with pre-fitted parameters.
pub fn pep_general_with(
    params: &GParams,
    config: &SystemConfig,
    event: &ErrorEvent,
) -> Result<Pep> {
    config.check_user(event.user)?;
    let z = zeta(params, config, event);
    if z == 0.0 {
        return Ok(Pep::new(1.0, "general", event));
    }
    let g = ln_meijer_g_1443(z, params.a3, params.a4, params.a5)?;
    let ln_pref = params.ln_a1 + params.a2.ln() + (params.a6 - params.a3) * std::f64::consts::LN_2
        - 0.5 * PI.ln();
    Ok(Pep::new(g.scale_ln(ln_pref).to_f64(), "general", event))
}

/// `eta_l = lambda^2 D^2 / (2 sigma^4 vartheta^2)`.
pub fn eta(config: &SystemConfig, event: &ErrorEvent) -> f64 {
    let d = config.distance_factor(event.user);
    event.lambda * event.lambda * d * d
        / (2.0 * config.sigma2 * config.sigma2 * event.vartheta * event.vartheta)
}

/// Single-element closed form `eta e^eta E1(eta)`.
pub fn pep_m1(config: &SystemConfig, event: &ErrorEvent) -> Result<Pep> {
    config.check_user(event.user)?;
    if config.elements != 1 {
        return Err(Error::InvalidArgument(format!(
            "the single-element form needs M = 1, got M = {}",
            config.elements
        )));
    }
    if event.vartheta == 0.0 {
        return Err(Error::Domain {
            function: "pep_m1",
            value: 0.0,
            domain: "vartheta != 0",
        });
    }
    let e = eta(config, event);
    Ok(Pep::new(e * exp_int_e1_scaled(e), "m1", event))
}

/// How the Gaussian-limit closed form treats the distance factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CltReading {
    /// `xi = (vartheta^2 sigma_bar^2 + D^2 lambda^2) / (2 sigma_bar^2 lambda^2)`
    /// with the `D^2` factors of the erf form: the Gaussian models the raw
    /// sum and `q = S / D`.
    Scaled,
    /// The integrand with `vartheta^2 sigma_bar^2 + lambda^2` and no distance
    /// factor anywhere, i.e. the Gaussian taken directly as the law of `q`.
    Unscaled,
}

/// The erf-form Gaussian-limit PEP under the chosen reading.
pub fn pep_clt_reading(config: &SystemConfig, event: &ErrorEvent, reading: CltReading) -> f64 {
    let clt = CltParams::for_config(config);
    let d2 = match reading {
        CltReading::Scaled => config.distance_factor(event.user).powi(2),
        CltReading::Unscaled => 1.0,
    };
    let (mu, s2) = (clt.mean, clt.variance);
    let (th2, l2) = (event.vartheta * event.vartheta, event.lambda * event.lambda);
    let xi = (th2 * s2 + d2 * l2) / (2.0 * s2 * l2);
    let c = d2 * mu * mu / (4.0 * xi * s2 * s2);
    (d2 / (8.0 * xi * s2)).sqrt() * (c - mu * mu / (2.0 * s2)).exp() * (1.0 + erf_fn(c.sqrt()))
}

/// Gaussian-limit closed form, scaled reading. Intended for `M > 10`; a
/// warning is attached otherwise.
pub fn pep_clt(config: &SystemConfig, event: &ErrorEvent) -> Result<Pep> {
    config.check_user(event.user)?;
    let mut pep = Pep::new(
        pep_clt_reading(config, event, CltReading::Scaled),
        "clt",
        event,
    );
    if config.elements <= 10 {
        pep.warnings.push(format!(
            "Gaussian limit used with M = {} <= 10",
            config.elements
        ));
    }
    Ok(pep)
}

/// Both Gaussian-limit readings against quadrature of the Chernoff form over
/// the Gaussian model density of `q = S / D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltAdjudication {
    pub elements: u32,
    pub user: usize,
    pub snr_db: Vec<f64>,
    pub quadrature: Vec<f64>,
    pub scaled: Vec<f64>,
    pub unscaled: Vec<f64>,
    pub max_rel_scaled: f64,
    pub max_rel_unscaled: f64,
    pub scaled_agrees: bool,
    pub unscaled_agrees: bool,
    pub verdict: String,
}

/// Runs the adjudication for `event` over `snr`. Agreement means within 10%
/// relative at every grid point.
pub fn adjudicate_clt(
    config: &SystemConfig,
    event: &ErrorEvent,
    snr: &SnrGrid,
) -> Result<CltAdjudication> {
    let density = ModelDensity::new(PdfModel::Clt, config, event.user)?;
    let mut quadrature = Vec::new();
    let mut scaled = Vec::new();
    let mut unscaled = Vec::new();
    for &g in snr.points() {
        let e = event.with_snr(g);
        quadrature.push(chernoff_average(&density, &e)?);
        scaled.push(pep_clt_reading(config, &e, CltReading::Scaled));
        unscaled.push(pep_clt_reading(config, &e, CltReading::Unscaled));
    }
    let max_rel = |v: &[f64]| {
        v.iter()
            .zip(&quadrature)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max)
    };
    let max_rel_scaled = max_rel(&scaled);
    let max_rel_unscaled = max_rel(&unscaled);
    let scaled_agrees = max_rel_scaled <= 0.1;
    let unscaled_agrees = max_rel_unscaled <= 0.1;
    let verdict = match (scaled_agrees, unscaled_agrees) {
        (true, false) => "scaled reading agrees with quadrature; unscaled reading does not",
        (false, true) => "unscaled reading agrees with quadrature; scaled reading does not",
        (true, true) => "both readings agree with quadrature on this grid",
        (false, false) => "neither reading agrees with quadrature within 10%",
    }
    .to_string();
    Ok(CltAdjudication {
        elements: config.elements,
        user: event.user,
        snr_db: snr.db(),
        quadrature,
        scaled,
        unscaled,
        max_rel_scaled,
        max_rel_unscaled,
        scaled_agrees,
        unscaled_agrees,
        verdict,
    })
}

/// Selects a PEP route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PepMethod {
    General,
    M1,
    Clt,
    Quadrature(PdfModel),
}

impl PepMethod {
    pub fn label(&self) -> String {
        match self {
            PepMethod::General => "general".into(),
            PepMethod::M1 => "m1".into(),
            PepMethod::Clt => "clt".into(),
            PepMethod::Quadrature(m) => format!("quadrature-{}", m.label()),
        }
    }
}

/// A PEP route bound to a scenario, fitting the approximant once.
#[derive(Debug, Clone)]
pub struct PepEvaluator {
    config: SystemConfig,
    method: PepMethod,
    params: Option<GParams>,
}

impl PepEvaluator {
    pub fn new(config: &SystemConfig, method: PepMethod) -> Result<Self> {
        config.validate()?;
        let params = match method {
            PepMethod::General => Some(fit_for(config)?),
            _ => None,
        };
        Ok(PepEvaluator {
            config: config.clone(),
            method,
            params,
        })
    }

    pub fn eval(&self, event: &ErrorEvent) -> Result<Pep> {
        let c = &self.config;
        match self.method {
            PepMethod::General => pep_general_with(self.params.as_ref().expect("fitted"), c, event),
            PepMethod::M1 => pep_m1(c, event),
            PepMethod::Clt => pep_clt(c, event),
            PepMethod::Quadrature(m) => pep_quadrature(c, event, m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn event_algebra() {
        let cfg = SystemConfig::reference(3);
        let e = build_event(&cfg, 0, &[c(1.0), c(1.0)], c(-1.0), &[]).unwrap();
        assert_eq!(e.delta_bar, c(2.0));
        assert!((e.interference - c(0.2f64.sqrt())).norm() < 1e-15);
        assert!((e.vartheta - (4.0 * 0.8f64.sqrt() + 4.0 * 0.2f64.sqrt())).abs() < 1e-12);
        assert!((e.vartheta - 5.366_563).abs() < 1e-6);
        assert!((e.lambda - 2.0 * 2f64.sqrt()).abs() < 1e-15);

        // no weaker users and perfect SIC: vartheta = sqrt(P_l) |delta|^2
        let e = build_event(&cfg, 1, &[c(1.0), c(1.0)], c(-1.0), &[c(0.0)]).unwrap();
        assert!((e.vartheta - 4.0 * 0.2f64.sqrt()).abs() < 1e-12);
        let omitted = build_event(&cfg, 1, &[c(1.0), c(1.0)], c(-1.0), &[]).unwrap();
        assert_eq!(e.vartheta, omitted.vartheta);

        // failed SIC of the strong user can flip the sign
        let e = build_event(&cfg, 1, &[c(-1.0), c(1.0)], c(-1.0), &[c(-2.0)]).unwrap();
        assert!(e.vartheta < 0.0);

        assert!(build_event(&cfg, 0, &[c(1.0), c(1.0)], c(1.0), &[]).is_err());
        assert!(build_event(&cfg, 1, &[c(1.0), c(1.0)], c(-1.0), &[c(1.0)]).is_err());
        assert!(build_event(&cfg, 0, &[c(0.5), c(1.0)], c(-1.0), &[]).is_err());
    }

    #[test]
    fn conditional_limits() {
        let cfg = SystemConfig::reference(3);
        let e = default_event(&cfg, 0).unwrap();
        assert_eq!(pep_conditional(0.0, &e, true).unwrap().value, 0.5);
        assert_eq!(pep_conditional(0.0, &e, false).unwrap().value, 1.0);
        let bad = build_event(&cfg, 1, &[c(-1.0), c(1.0)], c(-1.0), &[c(-2.0)]).unwrap();
        let exact = pep_conditional(0.3, &bad, true).unwrap();
        let bound = pep_conditional(0.3, &bad, false).unwrap();
        assert!(exact.value > 0.5);
        assert!(bound.raw > 1.0 && bound.value == 1.0);
        assert!(!bound.warnings.is_empty());
    }

    #[test]
    fn m1_limits_and_scale_invariance() {
        let cfg = SystemConfig::reference(1);
        let e = default_event(&cfg, 0).unwrap();
        let low = pep_m1(&cfg, &e.with_snr(1e-9)).unwrap();
        assert!((low.value - 1.0).abs() < 1e-6);
        // doubling D^2 and sigma^4 together leaves eta unchanged
        let mut other = cfg.clone();
        other.sigma2 = cfg.sigma2 * 2f64.sqrt();
        other.d_b = cfg.d_b * 2f64.powf(1.0 / cfg.alpha);
        let a = pep_m1(&cfg, &e).unwrap().value;
        let b = pep_m1(&other, &e).unwrap().value;
        assert!((a - b).abs() < 1e-13 * a);
        assert!(pep_m1(&SystemConfig::reference(2), &e).is_err());
    }

    #[test]
    fn closed_forms_tend_to_one_at_low_snr() {
        for m in [2, 15] {
            let cfg = SystemConfig::reference(m);
            let e = default_event(&cfg, 0).unwrap().with_snr(1e-10);
            assert!((pep_general(&cfg, &e).unwrap().value - 1.0).abs() < 1e-4);
            // the Gaussian law of S is integrated over S > 0 only
            let clt = CltParams::for_config(&cfg);
            let mass = 1.0 - q_function(clt.mean / clt.variance.sqrt());
            assert!((pep_clt(&cfg, &e).unwrap().value - mass).abs() < 1e-4);
        }
    }

    #[test]
    fn clt_warns_below_threshold() {
        let cfg = SystemConfig::reference(4);
        let e = default_event(&cfg, 0).unwrap();
        assert!(!pep_clt(&cfg, &e).unwrap().warnings.is_empty());
    }
}
