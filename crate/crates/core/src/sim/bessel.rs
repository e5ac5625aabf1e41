//! Modified Bessel function `K_1` and the Matérn correlation for `nu = 1`.

use crate::error::{FaceError, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this argument the power series is used, above it the integral
/// representation.
const SERIES_LIMIT: f64 = 2.0;

fn k1_series(x: f64) -> f64 {
    // K_1(x) = 1/x + I_1(x) ln(x/2)
    //          - (x/4) sum_k (psi(k+1) + psi(k+2)) (x^2/4)^k / (k! (k+1)!)
    let q = x * x / 4.0;
    let mut term = 1.0; // (x^2/4)^k / (k! (k+1)!)
    let mut psi_k1 = -EULER_GAMMA; // psi(k + 1)
    let mut i1_sum = 0.0;
    let mut log_sum = 0.0;
    for k in 0..60 {
        let psi_k2 = psi_k1 + 1.0 / (k + 1) as f64;
        i1_sum += term;
        log_sum += (psi_k1 + psi_k2) * term;
        term *= q / ((k + 1) as f64 * (k + 2) as f64);
        psi_k1 = psi_k2;
        if term < 1e-18 * i1_sum {
            break;
        }
    }
    let i1 = x / 2.0 * i1_sum;
    1.0 / x + i1 * (x / 2.0).ln() - x / 4.0 * log_sum
}

/// `e^x K_1(x)` from `K_1(x) = int_0^inf exp(-x cosh t) cosh t dt` by the
/// trapezoid rule, which converges geometrically for this integrand.
fn k1_scaled_integral(x: f64) -> f64 {
    let h = 0.05;
    let t_max = (1.0 + 45.0 / x).acosh();
    let n = (t_max / h).ceil() as usize;
    let mut sum = 0.5; // t = 0 contributes cosh(0) e^0 with half weight
    for i in 1..=n {
        let t = i as f64 * h;
        let c = t.cosh();
        sum += (-x * (c - 1.0)).exp() * c;
    }
    sum * h
}

/// Modified Bessel function of the second kind of order one, `x > 0`.
pub fn bessel_k1(x: f64) -> f64 {
    if x.is_nan() || x < 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return f64::INFINITY;
    }
    if x <= SERIES_LIMIT {
        k1_series(x)
    } else {
        (-x).exp() * k1_scaled_integral(x)
    }
}

/// `x K_1(x)`, continuous at 0 with value 1.
pub fn x_k1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x > 740.0 {
        return 0.0;
    }
    x * bessel_k1(x)
}

/// Matérn correlation
/// `C(d) = (sqrt(2 nu) d / phi)^nu K_nu(sqrt(2 nu) d / phi) / (2^{nu-1} Gamma(nu))`.
/// Only `nu = 1` is supported.
pub fn matern_cov(d: f64, phi: f64, nu: f64) -> Result<f64> {
    if nu != 1.0 {
        return Err(FaceError::Unsupported(format!("Matérn order nu = {nu}; only nu = 1 is implemented")));
    }
    if phi.is_nan() || phi <= 0.0 || !phi.is_finite() {
        return Err(FaceError::InvalidInput(format!("Matérn range phi must be positive, got {phi}")));
    }
    if d.is_nan() || d < 0.0 {
        return Err(FaceError::InvalidInput(format!("distance must be nonnegative, got {d}")));
    }
    Ok(x_k1(2f64.sqrt() * d / phi))
}

#[cfg(test)]
mod tests {
    use super::*;

    // 25-digit reference values
    #[allow(clippy::excessive_precision)]
    const REFERENCE: [(f64, f64); 8] = [
        (0.1, 9.853844780870605574377339),
        (0.5, 1.656441120003300893696445),
        (1.0, 0.60190723019723457473754),
        (2.0, 0.1398658818165224272845988),
        (3.7, 0.01762803510222326306511635),
        (10.0, 1.864877345382558459681686e-5),
        (25.0, 3.532778073199933770190346e-12),
        (60.0, 1.425632026517104323214389e-27),
    ];

    #[test]
    fn matches_reference_values() {
        for (x, want) in REFERENCE {
            let got = bessel_k1(x);
            assert!(((got - want) / want).abs() < 1e-10, "K1({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn branches_agree_at_the_switch() {
        let x = SERIES_LIMIT;
        let a = k1_series(x);
        let b = (-x).exp() * k1_scaled_integral(x);
        assert!(((a - b) / a).abs() < 1e-12);
    }

    #[test]
    fn matern_basics() {
        assert_eq!(matern_cov(0.0, 0.07, 1.0).unwrap(), 1.0);
        let mut prev = 1.0;
        for i in 1..200 {
            let c = matern_cov(i as f64 * 0.005, 0.07, 1.0).unwrap();
            assert!(c < prev);
            prev = c;
        }
        assert!(matches!(matern_cov(0.1, 0.07, 1.5), Err(FaceError::Unsupported(_))));
        assert!(matern_cov(-0.1, 0.07, 1.0).is_err());
    }
}
