//! The two Meijer-G instances used by the analysis.
//!
//! * `G^{2,0}_{1,2}(x | -; a3 / a4, a5; -)` is the shape of the moment-matched
//!   density. It is evaluated from the two pole families of
//!   `Gamma(a4+s) Gamma(a5+s)` when that series is well conditioned, and by
//!   numerical Mellin–Barnes quadrature otherwise.
//! * `G^{1,4}_{4,3}` with the parameter rows of the averaged Chernoff PEP is
//!   evaluated by Mellin–Barnes quadrature only.
//!
//! The lower parameters `a4, a5` may be a complex-conjugate pair (the four
//! moment fit produces one for small element counts); the G-function is real
//! in that case and the same machinery applies.

use super::gamma::ln_gamma_complex;
use super::LogValue;
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Log-magnitude drop that marks the integrand as negligible.
const TAIL_DROP: f64 = 52.0;
const MIN_NODES: usize = 64;
const MAX_NODES: usize = 1 << 17;

/// A Mellin–Barnes integral
///
/// ```text
///            1      /        prod Gamma(p_j + s) prod Gamma(m_j - s)
///   I(x) = -----    |  ds  ------------------------------------------  x^{-s}
///          2 pi i   /C              prod Gamma(d_j + s)
/// ```
///
/// along the vertical line `Re s = c`, which must separate the left pole
/// family of the `p_j` gammas from the right pole family of the `m_j` gammas.
/// Complex parameters must come in conjugate pairs so that `I(x)` is real.
#[derive(Debug, Clone)]
pub struct MellinBarnesSpec {
    /// Offsets `p_j` of the `Gamma(p_j + s)` factors.
    pub plus: Vec<Complex64>,
    /// Offsets `m_j` of the `Gamma(m_j - s)` factors.
    pub minus: Vec<Complex64>,
    /// Offsets `d_j` of the `1 / Gamma(d_j + s)` factors.
    pub denominator: Vec<Complex64>,
    /// The positive argument `x`.
    pub argument: f64,
    /// Contour abscissa; `None` picks the saddle point of the integrand on the
    /// real axis inside the strip.
    pub abscissa: Option<f64>,
    /// Relative change between successive node doublings that ends refinement.
    pub tolerance: f64,
    /// Initial node count (at least 64).
    pub nodes: usize,
}

/// Diagnostics of a contour evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ContourReport {
    pub value: LogValue,
    pub abscissa: f64,
    /// Truncation of the line integral, `|Im s| <= truncation`.
    pub truncation: f64,
    pub nodes: usize,
    /// Last relative change between doublings.
    pub last_change: f64,
}

impl MellinBarnesSpec {
    pub fn new(
        plus: Vec<Complex64>,
        minus: Vec<Complex64>,
        denominator: Vec<Complex64>,
        argument: f64,
    ) -> Self {
        MellinBarnesSpec {
            plus,
            minus,
            denominator,
            argument,
            abscissa: None,
            tolerance: 1e-11,
            nodes: MIN_NODES,
        }
    }

    pub fn with_abscissa(mut self, c: f64) -> Self {
        self.abscissa = Some(c);
        self
    }

    /// The open strip `(left, right)` of legal abscissae.
    pub fn strip(&self) -> (f64, f64) {
        let left = self
            .plus
            .iter()
            .map(|p| -p.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let right = self
            .minus
            .iter()
            .map(|m| m.re)
            .fold(f64::INFINITY, f64::min);
        (left, right)
    }

    fn validate(&self) -> Result<()> {
        if !(self.argument > 0.0) || !self.argument.is_finite() {
            return Err(Error::Domain {
                function: "Mellin-Barnes integral",
                value: self.argument,
                domain: "x > 0",
            });
        }
        if self.nodes < MIN_NODES {
            return Err(Error::InvalidArgument(format!(
                "Mellin-Barnes node count {} below {MIN_NODES}",
                self.nodes
            )));
        }
        let (left, right) = self.strip();
        if !(left < right) {
            return Err(Error::InvalidArgument(format!(
                "empty contour strip ({left}, {right}): pole families overlap"
            )));
        }
        if let Some(c) = self.abscissa {
            if !(c > left && c < right) {
                return Err(Error::InvalidArgument(format!(
                    "abscissa {c} outside the strip ({left}, {right})"
                )));
            }
        }
        let decay = self.plus.len() + self.minus.len();
        if decay <= self.denominator.len() {
            return Err(Error::InvalidArgument(
                "integrand does not decay along the contour".into(),
            ));
        }
        for row in [&self.plus, &self.minus, &self.denominator] {
            for p in row.iter().filter(|p| p.im != 0.0) {
                let paired = row.iter().any(|q| {
                    (q.re - p.re).abs() <= 1e-12 * (1.0 + p.re.abs())
                        && (q.im + p.im).abs() <= 1e-12 * (1.0 + p.im.abs())
                });
                if !paired {
                    return Err(Error::InvalidArgument(format!(
                        "complex parameter {p} has no conjugate partner"
                    )));
                }
            }
        }
        Ok(())
    }

    fn ln_integrand(&self, s: Complex64, ln_x: f64) -> Complex64 {
        let mut acc = -s * ln_x;
        for p in &self.plus {
            acc += ln_gamma_complex(p + s);
        }
        for m in &self.minus {
            acc += ln_gamma_complex(m - s);
        }
        for d in &self.denominator {
            acc -= ln_gamma_complex(d + s);
        }
        acc
    }

    fn real_log(&self, c: f64, ln_x: f64) -> f64 {
        self.ln_integrand(Complex64::new(c, 0.0), ln_x).re
    }

    /// Minimises the integrand on the real axis inside the strip. Along the
    /// vertical through that point the phase is stationary, so the line
    /// integral carries little cancellation.
    fn saddle(&self, ln_x: f64) -> f64 {
        let (left, right) = self.strip();
        let f = |c: f64| self.real_log(c, ln_x);
        let (mut lo, mut hi);
        if right.is_finite() {
            let w = right - left;
            lo = left + 1e-9 * w.max(1.0);
            hi = right - 1e-9 * w.max(1.0);
        } else {
            lo = left + 1e-9;
            let mut step = 1.0;
            hi = left + step;
            while f(hi + step) < f(hi) && step < 1e6 {
                step *= 2.0;
                hi = left + step;
            }
            hi += step;
        }
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let mut f1 = f(x1);
        let mut f2 = f(x2);
        for _ in 0..200 {
            if (hi - lo) < 1e-10 * (1.0 + lo.abs()) {
                break;
            }
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = f(x2);
            }
        }
        let c = 0.5 * (lo + hi);
        // keep a little room from the nearest pole
        let width = if right.is_finite() { right - left } else { 1.0 };
        let margin = 1e-3 * width.min(1.0);
        c.clamp(left + margin, right - margin)
    }

    /// Distance from `c` to the nearest pole, used as the node-clustering scale.
    fn pole_gap(&self, c: f64) -> f64 {
        let mut gap = f64::INFINITY;
        for p in &self.plus {
            gap = gap.min(Complex64::new(c + p.re, p.im).norm());
        }
        for m in &self.minus {
            gap = gap.min(Complex64::new(m.re - c, m.im).norm());
        }
        gap
    }

    /// Evaluates the integral, returning the value with diagnostics.
    pub fn evaluate_with_report(&self) -> Result<ContourReport> {
        self.validate()?;
        let ln_x = self.argument.ln();
        let c = match self.abscissa {
            Some(c) => c,
            None => self.saddle(ln_x),
        };
        let h0 = self.real_log(c, ln_x);
        if !h0.is_finite() {
            return Err(Error::Numerical(format!(
                "integrand not finite at abscissa {c}"
            )));
        }
        let at = |t: f64| self.ln_integrand(Complex64::new(c, t), ln_x);

        // truncation: walk out until the integrand has dropped by TAIL_DROP
        let mut truncation = 0.0;
        let mut quiet = 0;
        let mut t = 0.0;
        while quiet < 3 {
            t += 0.5;
            if t > 5000.0 {
                return Err(Error::Convergence {
                    what: "Mellin-Barnes truncation",
                    detail: format!("integrand not negligible at |Im s| = {t}, abscissa {c}"),
                });
            }
            if at(t).re - h0 < -TAIL_DROP {
                quiet += 1;
            } else {
                quiet = 0;
                truncation = t;
            }
        }
        truncation += 1.0;

        // t = kappa sinh(u) clusters nodes near the real axis on the pole scale
        let kappa = self.pole_gap(c).clamp(1e-3, 1.0);
        let u_max = (truncation / kappa).asinh();
        let g = |u: f64| -> f64 {
            let t = kappa * u.sinh();
            let w = kappa * u.cosh();
            w * (at(t) - h0).exp().re
        };

        let mut n = self.nodes;
        let mut h = u_max / n as f64;
        let mut sum = 0.5 * g(0.0);
        let mut abs_sum = sum.abs();
        for k in 1..=n {
            let v = g(k as f64 * h);
            sum += v;
            abs_sum += v.abs();
        }
        let mut estimate = h * sum;
        let mut last_change = f64::INFINITY;
        loop {
            if 2 * n > MAX_NODES {
                return Err(Error::Convergence {
                    what: "Mellin-Barnes quadrature",
                    detail: format!(
                        "{n} nodes, abscissa {c}, truncation {truncation}, last relative change {last_change:e}"
                    ),
                });
            }
            // odd nodes of the halved step
            let mut extra = 0.0;
            for k in 0..n {
                let v = g((2 * k + 1) as f64 * 0.5 * h);
                extra += v;
                abs_sum += v.abs();
            }
            sum += extra;
            n *= 2;
            h *= 0.5;
            let refined = h * sum;
            let change = (refined - estimate).abs();
            last_change = change / refined.abs().max(f64::MIN_POSITIVE);
            estimate = refined;
            let scale = h * abs_sum;
            if change <= self.tolerance * refined.abs() || change <= 1e-15 * scale {
                break;
            }
        }
        if estimate == 0.0 || !estimate.is_finite() {
            return Err(Error::Numerical(format!(
                "Mellin-Barnes quadrature returned {estimate} at abscissa {c}"
            )));
        }
        let value = LogValue {
            ln_abs: h0 + (estimate.abs() / PI).ln(),
            sign: estimate.signum(),
        };
        Ok(ContourReport {
            value,
            abscissa: c,
            truncation,
            nodes: n,
            last_change,
        })
    }

    pub fn evaluate(&self) -> Result<LogValue> {
        Ok(self.evaluate_with_report()?.value)
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn g2012_spec(x: f64, a3: f64, a4: Complex64, a5: Complex64) -> MellinBarnesSpec {
    MellinBarnesSpec::new(vec![a4, a5], vec![], vec![real(a3)], x)
}

/// `a4 - a5` within this distance of an integer counts as a degenerate pole
/// configuration and bypasses the residue series.
const DEGENERATE_GAP: f64 = 1e-6;
/// Largest accepted ratio of the sum of term magnitudes to the result.
const MAX_CANCELLATION: f64 = 1e5;
/// Beyond this argument the alternating series is never well conditioned.
const RESIDUE_MAX_X: f64 = 30.0;

/// Residue series of `G^{2,0}_{1,2}(x | a3; a4, a5)`:
///
/// ```text
/// sum over {b, b'} = {a4, a5}:
///   Gamma(b' - b) / Gamma(a3 - b) x^b 1F1(1 + b - a3; 1 + b - b'; -x)
/// ```
///
/// Returns `None` when `a4 - a5` is (close to) an integer or when the
/// alternating sums lose too many digits to cancellation.
pub fn meijer_g_2012_residues(x: f64, a3: f64, a4: Complex64, a5: Complex64) -> Option<LogValue> {
    if !(x > 0.0) || x > RESIDUE_MAX_X {
        return None;
    }
    let d = a4 - a5;
    if (d - real(d.re.round())).norm() < DEGENERATE_GAP {
        return None;
    }
    let ln_x = x.ln();
    let mut parts = Vec::with_capacity(2);
    for (b, other) in [(a4, a5), (a5, a4)] {
        let rg = a3 - b;
        // 1/Gamma(a3 - b) vanishes at the poles
        if rg.im == 0.0 && super::is_gamma_pole(rg.re) {
            continue;
        }
        let ln_coef = ln_gamma_complex(other - b) - ln_gamma_complex(rg) + b * ln_x;
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        let mut abs_sum = 1.0;
        let mut k = 0.0;
        loop {
            term *= (1.0 + b - a3 + k) / ((1.0 + b - other + k) * (k + 1.0)) * (-x);
            sum += term;
            abs_sum += term.norm();
            k += 1.0;
            if k > x && term.norm() < 1e-17 * sum.norm() {
                break;
            }
            if k > 4000.0 {
                return None;
            }
        }
        parts.push((ln_coef, sum, abs_sum));
    }
    if parts.is_empty() {
        return Some(LogValue::ZERO);
    }
    let scale = parts
        .iter()
        .map(|(l, _, _)| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    for (ln_coef, sum, abs_sum) in &parts {
        let c = (ln_coef - scale).exp();
        total += c * sum;
        magnitude += c.norm() * abs_sum;
    }
    if total.re == 0.0 || magnitude / total.re.abs() > MAX_CANCELLATION {
        return None;
    }
    Some(LogValue {
        ln_abs: scale + total.re.abs().ln(),
        sign: total.re.signum(),
    })
}

/// `G^{2,0}_{1,2}(x | a3; a4, a5)` by contour quadrature, optionally on a
/// caller-chosen abscissa.
pub fn meijer_g_2012_contour(
    x: f64,
    a3: f64,
    a4: Complex64,
    a5: Complex64,
    abscissa: Option<f64>,
) -> Result<LogValue> {
    let mut spec = g2012_spec(x, a3, a4, a5);
    spec.abscissa = abscissa;
    spec.evaluate()
}

/// `ln G^{2,0}_{1,2}(x | -; a3 / a4, a5; -)` with its sign.
pub fn ln_meijer_g_2012(x: f64, a3: f64, a4: Complex64, a5: Complex64) -> Result<LogValue> {
    if !(x > 0.0) {
        return Err(Error::Domain {
            function: "meijer_g_2012",
            value: x,
            domain: "x > 0",
        });
    }
    match meijer_g_2012_residues(x, a3, a4, a5) {
        Some(v) => Ok(v),
        None => meijer_g_2012_contour(x, a3, a4, a5, None),
    }
}

/// `G^{2,0}_{1,2}(x | -; a3 / a4, a5; -)`.
pub fn meijer_g_2012(x: f64, a3: f64, a4: Complex64, a5: Complex64) -> Result<f64> {
    Ok(ln_meijer_g_2012(x, a3, a4, a5)?.to_f64())
}

/// Mellin–Barnes description of
/// `G^{1,4}_{4,3}(x | -a4/2, (1-a4)/2, -a5/2, (1-a5)/2; - / 0; -a3/2, (1-a3)/2)`.
pub fn g1443_spec(x: f64, a3: f64, a4: Complex64, a5: Complex64) -> MellinBarnesSpec {
    // G^{1,4}_{4,3}(x) = 1/(2 pi i) int Gamma(-s) prod Gamma(1 - a_j + s)
    //                    / prod Gamma(1 - b_j + s) x^s ds; x^s = (1/x)^{-s}
    let plus = vec![
        a4 * 0.5 + 1.0,
        (a4 + 1.0) * 0.5,
        a5 * 0.5 + 1.0,
        (a5 + 1.0) * 0.5,
    ];
    let denominator = vec![real(0.5 * a3 + 1.0), real(0.5 * (a3 + 1.0))];
    MellinBarnesSpec::new(plus, vec![real(0.0)], denominator, 1.0 / x)
}

/// `ln G^{1,4}_{4,3}(x | ...)` with its sign.
pub fn ln_meijer_g_1443(x: f64, a3: f64, a4: Complex64, a5: Complex64) -> Result<LogValue> {
    if !(x > 0.0) {
        return Err(Error::Domain {
            function: "meijer_g_1443",
            value: x,
            domain: "x > 0",
        });
    }
    let spec = MellinBarnesSpec {
        tolerance: 1e-10,
        ..g1443_spec(x, a3, a4, a5)
    };
    spec.evaluate()
}

/// `G^{1,4}_{4,3}(x | -a4/2, (1-a4)/2, -a5/2, (1-a5)/2; - / 0; -a3/2, (1-a3)/2)`.
pub fn meijer_g_1443(x: f64, a3: f64, a4: Complex64, a5: Complex64) -> Result<f64> {
    Ok(ln_meijer_g_1443(x, a3, a4, a5)?.to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::bessel_k0;

    fn c(x: f64) -> Complex64 {
        real(x)
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn exponential_identity() {
        // G^{1,0}_{0,1}(z | -; 0) = e^{-z}
        for z in [0.01, 1.0, 7.5] {
            let v = MellinBarnesSpec::new(vec![c(0.0)], vec![], vec![], z)
                .evaluate()
                .unwrap()
                .to_f64();
            assert!(rel(v, (-z).exp()) < 1e-10, "z={z}: {v}");
        }
    }

    #[test]
    fn bessel_identity() {
        // (1/2) G^{2,0}_{0,2}(x^2/4 | 0, 0) = K0(x)
        for x in [0.3, 1.0, 4.0] {
            let v = MellinBarnesSpec::new(vec![c(0.0), c(0.0)], vec![], vec![], x * x / 4.0)
                .evaluate()
                .unwrap()
                .to_f64();
            assert!(rel(0.5 * v, bessel_k0(x)) < 1e-10, "x={x}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let unpaired = MellinBarnesSpec::new(vec![Complex64::new(1.0, 0.5)], vec![], vec![], 1.0);
        assert!(unpaired.evaluate().is_err());
        let empty_strip = MellinBarnesSpec::new(vec![c(-1.0)], vec![c(0.5)], vec![], 1.0);
        assert!(empty_strip.evaluate().is_err());
        let no_decay = MellinBarnesSpec::new(vec![c(1.0)], vec![], vec![c(2.0)], 1.0);
        assert!(no_decay.evaluate().is_err());
        let outside = MellinBarnesSpec::new(vec![c(1.0)], vec![], vec![], 1.0).with_abscissa(-2.0);
        assert!(outside.evaluate().is_err());
        assert!(meijer_g_2012(0.0, 1.0, c(1.0), c(0.5)).is_err());
    }

    #[test]
    fn residues_decline_degenerate_and_large_arguments() {
        assert!(meijer_g_2012_residues(1.0, 2.0, c(3.0), c(1.0)).is_none());
        assert!(meijer_g_2012_residues(80.0, 2.0, c(3.3), c(1.0)).is_none());
        assert!(meijer_g_2012_residues(1.0, 2.0, c(3.3), c(1.0)).is_some());
    }

    fn pair() -> (f64, Complex64, Complex64) {
        (
            1.08212,
            Complex64::new(0.78798, 0.26887),
            Complex64::new(0.78798, -0.26887),
        )
    }

    fn parameter_sets() -> [(f64, Complex64, Complex64); 3] {
        [
            pair(),
            (7.98264, c(6.72999), c(6.30832)),
            (3.3, c(2.1), c(0.4)),
        ]
    }

    #[test]
    fn g2012_reference_values() {
        let want = [
            [
                0.122_449_162_531_056_63,
                0.331_506_482_494_844_42,
                0.005_864_369_799_750_515_5,
                2.616_318_275_943_591_1e-17,
            ],
            [
                8.121_725_426_573_357e-9,
                0.140_228_473_137_805_84,
                16.179_875_746_868_271,
                5.081_160_943_899_695e-10,
            ],
            [
                0.133_228_914_559_340_25,
                0.090_857_775_521_785_83,
                3.842_679_600_406_848_4e-4,
                2.046_259_288_315_358_4e-19,
            ],
        ];
        for ((a3, a4, a5), row) in parameter_sets().into_iter().zip(want) {
            for (x, w) in [0.05, 1.0, 6.0, 40.0].into_iter().zip(row) {
                let v = meijer_g_2012(x, a3, a4, a5).unwrap();
                assert!(rel(v, w) < 1e-9, "a3={a3} x={x}: {v} vs {w}");
            }
        }
    }

    #[test]
    fn g1443_reference_values() {
        let want = [
            [
                0.989_927_733_266_989_5,
                0.716_237_315_296_934_8,
                0.128_621_412_716_625_33,
                1.019_597_000_372_212_5e-5,
            ],
            [
                5.149_429_482_381_198,
                0.374_478_992_709_488_8,
                6.128_569_288_247_306e-5,
                3.886_791_738_198_023e-21,
            ],
            [
                0.679_196_921_400_527_6,
                0.573_861_718_712_849_1,
                0.185_024_483_311_330_67,
                1.652_110_378_597_958_3e-4,
            ],
        ];
        for ((a3, a4, a5), row) in parameter_sets().into_iter().zip(want) {
            for (z, w) in [1e-3, 0.5, 20.0, 1e6].into_iter().zip(row) {
                let v = meijer_g_1443(z, a3, a4, a5).unwrap();
                assert!(rel(v, w) < 1e-8, "a3={a3} z={z}: {v} vs {w}");
            }
        }
    }

    #[test]
    fn residues_match_contour() {
        for (a3, a4, a5) in parameter_sets() {
            for x in [0.01, 0.3, 2.0, 9.0] {
                let Some(r) = meijer_g_2012_residues(x, a3, a4, a5) else {
                    assert!(x > 5.0, "series declined at x={x}");
                    continue;
                };
                let r = r.to_f64();
                let q = meijer_g_2012_contour(x, a3, a4, a5, None).unwrap().to_f64();
                assert!(rel(q, r) < 1e-8, "a3={a3} x={x}: {r} vs {q}");
            }
        }
    }

    #[test]
    fn abscissa_shift_invariance() {
        let (a3, a4, a5) = (7.98264, c(6.72999), c(6.30832));
        let base = meijer_g_2012_contour(1.7, a3, a4, a5, Some(-6.0))
            .unwrap()
            .to_f64();
        for shift in [-0.25, 0.5, 2.0, 5.0] {
            let v = meijer_g_2012_contour(1.7, a3, a4, a5, Some(-6.0 + shift))
                .unwrap()
                .to_f64();
            assert!(rel(v, base) < 1e-9, "shift {shift}: {v} vs {base}");
        }
        let (a3, a4, a5) = pair();
        let spec = g1443_spec(3.0, a3, a4, a5);
        let (left, right) = spec.strip();
        let mid = spec.clone().evaluate().unwrap().to_f64();
        for t in [0.2, 0.5, 0.8] {
            let v = spec
                .clone()
                .with_abscissa(left + t * (right - left))
                .evaluate()
                .unwrap()
                .to_f64();
            assert!(rel(v, mid) < 1e-9, "t={t}: {v} vs {mid}");
        }
    }
}
