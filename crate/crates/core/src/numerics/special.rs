//! Log-gamma, digamma and trigamma on the positive reals.
//!
//! `lgamma` uses the Lanczos approximation (g = 7, nine coefficients) with
//! reflection below one half. `digamma` and `trigamma` shift the argument
//! upward with the recurrences until it reaches [`ASYMPTOTIC_CUTOFF`], then
//! evaluate the Stirling-type asymptotic series.

use crate::error::{Error, Result};
use crate::real::Real;

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
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

/// Argument above which the asymptotic series for the polygamma functions
/// is accurate to better than 1e-12.
pub const ASYMPTOTIC_CUTOFF: f64 = 6.0;

fn check_domain<T: Real>(what: &'static str, x: T) -> Result<()> {
    if x.is_finite() && x > T::zero() {
        Ok(())
    } else {
        Err(Error::Domain { what, value: x.as_f64() })
    }
}

/// Natural log of the gamma function.
pub fn lgamma<T: Real>(x: T) -> Result<T> {
    check_domain("lgamma", x)?;
    Ok(ln_gamma(x))
}

/// Digamma function, the derivative of [`lgamma`].
pub fn digamma<T: Real>(x: T) -> Result<T> {
    check_domain("digamma", x)?;
    Ok(psi(x))
}

/// Trigamma function, the derivative of [`digamma`].
pub fn trigamma<T: Real>(x: T) -> Result<T> {
    check_domain("trigamma", x)?;
    Ok(psi1(x))
}

/// Unchecked log-gamma for `x > 0`. Returns NaN outside the domain.
pub(crate) fn ln_gamma<T: Real>(x: T) -> T {
    if !(x > T::zero()) {
        return T::nan();
    }
    let half = T::lit(0.5);
    if x < half {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx).
        let pi = T::PI();
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS_COEF[0]);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_usize_lossy(i));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    half * (T::lit(2.0) * T::PI()).ln() + (x + half) * t.ln() - t + acc.ln()
}

/// Unchecked digamma for `x > 0`.
pub(crate) fn psi<T: Real>(x: T) -> T {
    if !(x > T::zero()) {
        return T::nan();
    }
    let mut x = x;
    let mut acc = T::zero();
    let cutoff = T::lit(ASYMPTOTIC_CUTOFF);
    while x < cutoff {
        acc = acc - x.recip();
        x = x + T::one();
    }
    let inv = x.recip();
    let inv2 = inv * inv;
    // -Σ B_2k / (2k x^2k), k = 1..7, in Horner form over x^-2.
    let series = inv2
        * (T::lit(-1.0 / 12.0)
            + inv2
                * (T::lit(1.0 / 120.0)
                    + inv2
                        * (T::lit(-1.0 / 252.0)
                            + inv2
                                * (T::lit(1.0 / 240.0)
                                    + inv2
                                        * (T::lit(-1.0 / 132.0)
                                            + inv2 * (T::lit(691.0 / 32_760.0) + inv2 * T::lit(-1.0 / 12.0)))))));
    acc + x.ln() - T::lit(0.5) * inv + series
}

/// Unchecked trigamma for `x > 0`.
pub(crate) fn psi1<T: Real>(x: T) -> T {
    if !(x > T::zero()) {
        return T::nan();
    }
    let mut x = x;
    let mut acc = T::zero();
    let cutoff = T::lit(ASYMPTOTIC_CUTOFF);
    while x < cutoff {
        acc = acc + (x * x).recip();
        x = x + T::one();
    }
    let inv = x.recip();
    let inv2 = inv * inv;
    // Σ B_2k / x^(2k+1), k = 1..7.
    let series = inv
        * inv2
        * (T::lit(1.0 / 6.0)
            + inv2
                * (T::lit(-1.0 / 30.0)
                    + inv2
                        * (T::lit(1.0 / 42.0)
                            + inv2
                                * (T::lit(-1.0 / 30.0)
                                    + inv2
                                        * (T::lit(5.0 / 66.0)
                                            + inv2 * (T::lit(-691.0 / 2_730.0) + inv2 * T::lit(7.0 / 6.0)))))));
    acc + inv + T::lit(0.5) * inv2 + series
}
