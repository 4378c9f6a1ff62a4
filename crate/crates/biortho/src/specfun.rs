//! Complex log-gamma and related primitives.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Complex numbers used for every contour point.
pub type ComplexValue = Complex64;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Distance below which a point counts as sitting on a pole.
pub const POLE_TOL: f64 = 1e-12;

/// Fails unless both components are finite.
pub fn check_finite(z: ComplexValue, what: &str) -> Result<ComplexValue> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::NonFinite(format!("{what} produced {z}")))
    }
}

fn lanczos_right(z: ComplexValue) -> ComplexValue {
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, &p) in LANCZOS.iter().enumerate().skip(1) {
        x += p / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    HALF_LN_2PI + (z + 0.5) * t.ln() - t + x.ln()
}

/// Principal branch of log Γ(z).
///
/// Uses the Lanczos approximation on `Re z >= 0.5` and shifts smaller real
/// parts up with the recurrence `log Γ(z) = log Γ(z+m) - Σ log(z+k)`, which
/// stays on the principal branch off the negative real axis.
///
/// ```
/// use biortho::specfun::{log_gamma, ComplexValue};
/// let v = log_gamma(ComplexValue::new(0.5, 0.0)).unwrap();
/// assert!((v.re - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
/// ```
pub fn log_gamma(z: ComplexValue) -> Result<ComplexValue> {
    check_finite(z, "log_gamma argument")?;
    if z.re <= 0.5 {
        let k = z.re.round();
        if k <= 0.0 && (z - k).norm() < POLE_TOL {
            return Err(Error::Pole(format!("log_gamma at nonpositive integer {k}")));
        }
    }
    if z.re >= 0.5 {
        return Ok(lanczos_right(z));
    }
    let m = (0.5 - z.re).ceil() as usize;
    let mut shift = Complex64::new(0.0, 0.0);
    for k in 0..m {
        shift += (z + k as f64).ln();
    }
    Ok(lanczos_right(z + m as f64) - shift)
}

/// Γ(z) itself; overflows for large arguments, intended for tests and small
/// closed forms.
pub fn gamma(z: ComplexValue) -> Result<ComplexValue> {
    Ok(log_gamma(z)?.exp())
}

/// Exponential decay rate of |Γ(x+iy)| as |y| grows: π/2 per unit of |y|,
/// for either direction and any x.
pub fn stirling_decay_rate(_x: f64, _direction: f64) -> f64 {
    PI / 2.0
}

/// Stirling's modulus approximation √(2π)|y|^{x-1/2}e^{-π|y|/2}.
pub fn stirling_modulus(x: f64, y: f64) -> f64 {
    (2.0 * PI).sqrt() * y.abs().powf(x - 0.5) * (-PI * y.abs() / 2.0).exp()
}

/// Real log Γ for positive arguments.
pub fn ln_gamma_real(x: f64) -> f64 {
    log_gamma(Complex64::new(x, 0.0)).map(|v| v.re).unwrap_or(f64::NAN)
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> ComplexValue {
        Complex64::new(re, im)
    }

    #[test]
    fn gamma_one_is_one() {
        assert!(log_gamma(c(1.0, 0.0)).unwrap().norm() < 1e-15);
    }

    #[test]
    fn half_integer() {
        let v = log_gamma(c(0.5, 0.0)).unwrap();
        assert!((v.re - 0.572_364_942_924_700_1).abs() < 1e-14);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn one_plus_i_against_multiprecision_value() {
        // mpmath.gamma(1+1j) at 30 digits
        let g = gamma(c(1.0, 1.0)).unwrap();
        assert!((g - c(0.498_015_668_118_356_04, -0.154_949_828_301_810_69)).norm() < 1e-14);
        let l = log_gamma(c(1.0, 1.0)).unwrap();
        assert!((l - c(-0.650_923_199_301_856_34, -0.301_640_320_467_533_2)).norm() < 1e-14);
    }

    #[test]
    fn poles_are_rejected() {
        assert!(matches!(log_gamma(c(0.0, 0.0)), Err(Error::Pole(_))));
        assert!(matches!(log_gamma(c(-3.0, 1e-13)), Err(Error::Pole(_))));
        assert!(log_gamma(c(-3.0, 1e-6)).is_ok());
    }

    #[test]
    fn reflection_region_matches_recurrence() {
        let z = c(-2.3, 0.7);
        let lhs = log_gamma(z + 1.0).unwrap().exp();
        let rhs = z * log_gamma(z).unwrap().exp();
        assert!((lhs - rhs).norm() < 1e-13 * lhs.norm());
    }

    #[test]
    fn stirling_rate_is_direction_free() {
        assert_eq!(stirling_decay_rate(0.9, 1.0), PI / 2.0);
        assert_eq!(stirling_decay_rate(0.0, -1.0), PI / 2.0);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        let v = normal_cdf(1.0);
        assert!((v - 0.841_344_746_068_542_9).abs() < 1e-15, "{v:e}");
        assert!((normal_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-17);
        assert!((normal_cdf(-8.0) - 6.220_960_574_271_785e-16).abs() < 1e-27);
    }
}
