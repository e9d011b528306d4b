//! Standard normal distribution primitives.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before z-transforms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - phi(x)`, without cancellation for large `x`.
pub fn phi_upper(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Gaussian mass in `(lo, hi)` for a unit-variance normal centred at `mu`.
/// Uses whichever tail keeps the subtraction well conditioned.
pub fn interval_mass(lo: f64, hi: f64, mu: f64) -> f64 {
    let (a, b) = (lo - mu, hi - mu);
    if a > 0.0 {
        phi_upper(a) - phi_upper(b)
    } else {
        phi(b) - phi(a)
    }
}

/// Inverse of [`phi`].
///
/// Acklam's rational approximation followed by two Halley steps against the
/// erfc-based CDF, which brings the result to near machine precision.
#[allow(clippy::excessive_precision)]
pub fn phi_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfDomain(p));
    }
    if p > 0.5 {
        // 1 - p is exact on [0.5, 1)
        return phi_inv(1.0 - p).map(|z| -z);
    }
    if p == 0.5 {
        return Ok(0.0);
    }

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let mut z = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    for _ in 0..2 {
        let e = phi(z) - p;
        let u = e * (2.0 * PI).sqrt() * (0.5 * z * z).exp();
        z -= u / (1.0 + 0.5 * z * u);
    }
    Ok(z)
}

/// `phi_inv` after clamping `p` into `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub fn phi_inv_clamped(p: f64) -> f64 {
    phi_inv(p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)).expect("clamped probability is in (0, 1)")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Maclaurin series Φ(x) = 1/2 + φ(x) Σ x^(2k+1) / (2k+1)!!, summed until
    /// terms vanish. Independent of erfc.
    fn phi_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut k = 0.0;
        while term.abs() > 1e-300 && k < 2000.0 {
            k += 1.0;
            term *= x * x / (2.0 * k + 1.0);
            sum += term;
            if term.abs() < sum.abs() * 1e-18 {
                break;
            }
        }
        0.5 + pdf(x) * sum
    }

    #[test]
    fn phi_matches_series_oracle() {
        let mut x = -6.0;
        while x <= 6.0 {
            let err = (phi(x) - phi_series(x)).abs();
            assert!(err <= 1e-12, "x={x} err={err}");
            x += 0.0625;
        }
    }

    #[test]
    fn known_values() {
        assert_eq!(phi(0.0), 0.5);
        assert!((phi(1.959964) - 0.975).abs() < 1e-6);
        assert_eq!(phi_inv(0.5).unwrap(), 0.0);
        assert!((phi_inv(0.975).unwrap() - 1.959964).abs() < 1e-6);
        assert!((phi_series(1.959964) - 0.975).abs() < 1e-6);
    }

    #[test]
    fn out_of_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(phi_inv(p), Err(Error::OutOfDomain(_))));
        }
        assert!(phi_inv_clamped(0.0) < -7.0);
        assert!(phi_inv_clamped(1.0) > 7.0);
    }

    #[test]
    fn inverse_on_clamped_range() {
        for &p in &[1e-12, 1e-9, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.9, 0.999, 1.0 - 1e-9] {
            let z = phi_inv(p).unwrap();
            // residual in probability, scaled by the density: first-order error in z
            let dz = (phi(z) - p).abs() / pdf(z);
            assert!(dz <= 1e-9, "p={p} dz={dz}");
        }
    }

    #[test]
    fn interval_mass_tails() {
        assert!((interval_mass(8.0, f64::INFINITY, 0.0) - phi_upper(8.0)).abs() < 1e-30);
        assert!(interval_mass(8.0, f64::INFINITY, 0.0) > 0.0);
        assert!((interval_mass(f64::NEG_INFINITY, f64::INFINITY, 1.3) - 1.0).abs() < 1e-15);
        assert!((interval_mass(-1.0, 1.0, 0.0) - 0.682689492137086).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn phi_symmetry(x in -10.0f64..10.0) {
            prop_assert!((phi(x) + phi(-x) - 1.0).abs() < 1e-15);
        }

        #[test]
        fn round_trip(x in -6.0f64..6.0) {
            prop_assert!((phi_inv(phi(x)).unwrap() - x).abs() <= 1e-8);
        }
    }
}
