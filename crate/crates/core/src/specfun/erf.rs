use std::f64::consts::{FRAC_1_SQRT_2, PI};

const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// `erf(x)` for `0 <= x < 2.5` from the positive-term series
/// `erf x = 2/sqrt(pi) e^{-x^2} sum 2^n x^{2n+1} / (2n+1)!!`.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    TWO_OVER_SQRT_PI * (-x2).exp() * sum
}

/// `erfc(x)` for `x >= 2.5` by the Laplace continued fraction (modified Lentz).
fn erfc_cf(x: f64) -> f64 {
    (-x * x).exp() / (PI.sqrt() * erfc_cf_denominator(x))
}

/// The continued fraction `x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))`.
fn erfc_cf_denominator(x: f64) -> f64 {
    // erfc x = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 * 0.5;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}

/// `e^{x^2} erfc(x)` for `x >= 2.5`.
fn erfc_cf_scaled(x: f64) -> f64 {
    erfc_cf_denominator(x).recip() / PI.sqrt()
}

/// `ln erfc(x)`, finite far beyond the underflow point of `erfc`.
pub fn ln_erfc(x: f64) -> f64 {
    if x < 2.5 {
        return erfc_fn(x).ln();
    }
    let e = erfc_cf_scaled(x);
    -x * x + e.ln()
}

/// `ln Q(x)`.
pub fn ln_q_function(x: f64) -> f64 {
    ln_erfc(x * FRAC_1_SQRT_2) - std::f64::consts::LN_2
}

/// The error function.
pub fn erf_fn(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let a = x.abs();
    let v = if a < 2.5 {
        erf_series(a)
    } else {
        1.0 - erfc_cf(a)
    };
    v.copysign(x)
}

/// The complementary error function, accurate in the far tail.
pub fn erfc_fn(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc_fn(-x);
    }
    if x < 2.5 {
        1.0 - erf_series(x)
    } else {
        erfc_cf(x)
    }
}

/// The Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc_fn(x * FRAC_1_SQRT_2)
}
