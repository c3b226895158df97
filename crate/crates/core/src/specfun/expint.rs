use super::EULER_GAMMA;

/// `e^x E1(x)` for `x > 1` by continued fraction (modified Lentz).
fn e1_scaled_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

fn e1_series(x: f64) -> f64 {
    // E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    let mut sum = 0.0;
    let mut fact = 1.0;
    for k in 1..100 {
        fact *= -x / k as f64;
        let term = fact / k as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// The exponential integral `E1(x) = int_x^inf e^{-t}/t dt`, `x > 0`.
pub fn exp_int_e1(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x <= 1.0 {
        e1_series(x)
    } else {
        e1_scaled_cf(x) * (-x).exp()
    }
}

/// `e^x E1(x)`, finite for arbitrarily large `x`.
pub fn exp_int_e1_scaled(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x <= 1.0 {
        e1_series(x) * x.exp()
    } else {
        e1_scaled_cf(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let cases = [
            (0.01, 4.037_929_576_538_113_8),
            (0.7, 0.373_768_843_233_509_18),
            (1.0, 0.219_383_934_395_520_27),
            (2.0, 0.048_900_510_708_061_12),
            (5.0, 0.001_148_295_591_275_325_8),
            (30.0, 3.021_552_010_688_812_5e-15),
        ];
        for (x, want) in cases {
            let got = exp_int_e1(x);
            assert!(((got - want) / want).abs() < 1e-13, "E1({x}) = {got}");
        }
    }

    #[test]
    fn scaled_large_argument() {
        // e^x E1(x) ~ 1/x (1 - 1/x + 2/x^2 - 6/x^3 ...)
        let x: f64 = 1e4;
        let approx = (1.0 - 1.0 / x + 2.0 / (x * x) - 6.0 / x.powi(3)) / x;
        assert!(((exp_int_e1_scaled(x) - approx) / approx).abs() < 1e-12);
        assert!(exp_int_e1(-1.0).is_nan());
    }
}
