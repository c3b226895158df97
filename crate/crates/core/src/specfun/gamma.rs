use num_complex::Complex64;
use std::f64::consts::PI;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `B_{2k} / (2k (2k-1))` for k = 1..8 (Stirling series coefficients).
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// Below this modulus the argument is shifted upward before applying Stirling.
const STIRLING_MIN: f64 = 15.0;

/// True when `x` is a pole of Gamma (zero or a negative integer).
pub fn is_gamma_pole(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

fn stirling_real(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut p = inv;
    for c in STIRLING {
        series += c * p;
        p *= inv2;
    }
    (x - 0.5) * x.ln() - x + LN_SQRT_2PI + series
}

/// `ln |Gamma(x)|` for real `x`; `+inf` at the poles.
pub fn ln_gamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if is_gamma_pole(x) {
        return f64::INFINITY;
    }
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        let s = (PI * x).sin().abs();
        return PI.ln() - s.ln() - ln_gamma(1.0 - x);
    }
    let mut z = x;
    let mut prod = 1.0;
    while z < STIRLING_MIN {
        prod *= z;
        z += 1.0;
    }
    stirling_real(z) - prod.ln()
}

fn gamma_sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        // sign alternates between consecutive negative poles
        let k = (-x).floor() as i64;
        if k % 2 == 0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// The Gamma function for real arguments. Poles return `NaN`.
pub fn gamma_fn(x: f64) -> f64 {
    if is_gamma_pole(x) {
        return f64::NAN;
    }
    if x > 0.0 && x < 20.0 && x == x.round() {
        let mut f = 1.0;
        for k in 2..(x as u64) {
            f *= k as f64;
        }
        return f;
    }
    gamma_sign(x) * ln_gamma(x).exp()
}

/// `(ln |Gamma(x)|, sign Gamma(x))`.
pub(crate) fn ln_gamma_signed(x: f64) -> (f64, f64) {
    if is_gamma_pole(x) {
        return (f64::INFINITY, f64::NAN);
    }
    (ln_gamma(x), gamma_sign(x))
}

/// A logarithm of Gamma for complex arguments.
///
/// The imaginary part is only defined modulo `2 pi`; callers exponentiate the
/// result (or sums of such results), which is branch independent.
pub fn ln_gamma_complex(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        let (l, s) = ln_gamma_signed(z.re);
        let im = if s < 0.0 { PI } else { 0.0 };
        return Complex64::new(l, im);
    }
    if z.re < 0.5 {
        let one = Complex64::new(1.0, 0.0);
        return Complex64::new(PI.ln(), 0.0) - ln_sin_pi(z) - ln_gamma_complex(one - z);
    }
    let mut w = z;
    let mut prod = Complex64::new(1.0, 0.0);
    while w.norm() < STIRLING_MIN {
        prod *= w;
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut p = inv;
    for c in STIRLING {
        series += p * c;
        p *= inv2;
    }
    (w - 0.5) * w.ln() - w + LN_SQRT_2PI + series - prod.ln()
}

/// `ln sin(pi z)`, written to avoid overflow for large `|Im z|`.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    if z.im.abs() < 30.0 {
        return (z * PI).sin().ln();
    }
    // sin(pi z) = (e^{i pi z} - e^{-i pi z}) / 2i; keep the dominant exponential
    let i = Complex64::new(0.0, 1.0);
    let half_i = Complex64::new(0.0, 2.0).ln();
    if z.im > 0.0 {
        let small = (i * z * (2.0 * PI)).exp();
        -i * z * PI + (-small + 1.0).ln() - half_i + Complex64::new(0.0, PI)
    } else {
        let small = (-i * z * (2.0 * PI)).exp();
        i * z * PI + (-small + 1.0).ln() - half_i
    }
}

/// The digamma function `psi(x) = d/dx ln Gamma(x)`.
pub fn digamma(x: f64) -> f64 {
    if is_gamma_pole(x) || x.is_nan() {
        return f64::NAN;
    }
    if x < 0.5 {
        return digamma(1.0 - x) - PI / (PI * x).tan();
    }
    let mut z = x;
    let mut acc = 0.0;
    while z < 10.0 {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let inv2 = 1.0 / (z * z);
    // B_{2k} / (2k) for k = 1..6
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + z.ln() - 0.5 / z - series
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn ln_gamma_reference_values() {
        // reference values from 30-digit arithmetic
        let cases = [
            (0.1, 2.252_712_651_734_205_9),
            (0.5, 0.572_364_942_924_700_087),
            (2.5, 0.284_682_870_472_919_16),
            (7.3, 7.147_892_523_022_248_7),
            (20.0, 39.339_884_187_199_494),
            (150.5, 602.513_954_870_585_41),
            (-0.5, 1.265_512_123_484_645_4),
            (-2.7, -0.071_407_085_315_645_687),
        ];
        for (x, want) in cases {
            assert!(rel(ln_gamma(x), want) < 1e-13, "x={x}: {}", ln_gamma(x));
        }
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(-3.0).is_infinite());
    }

    #[test]
    fn gamma_values_and_signs() {
        assert_eq!(gamma_fn(5.0), 24.0);
        assert!(rel(gamma_fn(0.5), PI.sqrt()) < 1e-14);
        assert!(rel(gamma_fn(-0.5), -2.0 * PI.sqrt()) < 1e-14);
        assert!(rel(gamma_fn(-1.5), 4.0 / 3.0 * PI.sqrt()) < 1e-14);
        assert!(gamma_fn(-2.0).is_nan());
        assert!(rel(gamma_fn(171.0), 7.257_415_615_307_999e306) < 1e-12);
    }

    #[test]
    fn complex_ln_gamma_matches_reference_modulo_branch() {
        let cases = [
            (
                Complex64::new(0.3, 2.0),
                Complex64::new(-2.359_449_355_937_571, -0.916_907_613_518_669_8),
            ),
            (
                Complex64::new(-3.3, 1.5),
                Complex64::new(-4.768_201_197_509_462, -9.894_656_725_339_940),
            ),
            (
                Complex64::new(12.0, -40.0),
                Complex64::new(-19.336_433_860_020_052, -123.989_225_371_573_04),
            ),
            (
                Complex64::new(0.5, 100.0),
                Complex64::new(-156.160_694_146_284_99, 360.517_435_267_906_44),
            ),
        ];
        for (z, want) in cases {
            let got = ln_gamma_complex(z);
            assert!(
                (got.re - want.re).abs() < 1e-12 * want.re.abs().max(1.0),
                "{z}: {got}"
            );
            let dphase = (got.im - want.im) / (2.0 * PI);
            assert!((dphase - dphase.round()).abs() < 1e-12, "{z}: {got}");
        }
    }

    #[test]
    fn complex_agrees_with_real_on_axis() {
        for x in [0.2, 1.7, 9.9, 33.0] {
            let z = ln_gamma_complex(Complex64::new(x, 1e-300));
            assert!((z.re - ln_gamma(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn digamma_reference_values() {
        let cases = [
            (0.3, -3.502_524_222_200_133),
            (1.0, -0.577_215_664_901_532_86),
            (4.5, 1.388_870_926_359_528_9),
            (-0.7, -2.073_952_793_628_703_8),
            (25.0, 3.198_742_512_851_974),
        ];
        for (x, want) in cases {
            assert!(rel(digamma(x), want) < 1e-13, "x={x}: {}", digamma(x));
        }
    }
}
