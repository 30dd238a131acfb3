//! Real sine and cosine integrals.
//!
//! Two regimes: the Maclaurin series for `x <= 4`, and the auxiliary
//! functions `f`, `g` for `x > 4`, where
//!
//! ```text
//! Si(x) = pi/2 - f(x) cos x - g(x) sin x
//! Ci(x) =        f(x) sin x - g(x) cos x
//! ```
//!
//! `g(x) - i f(x) = e^{ix} E1(ix)` is evaluated with a modified Lentz
//! continued fraction, which converges in a few dozen terms for `x > 4`
//! and is accurate to a few ulps.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_LIMIT: f64 = 4.0;
const EPS: f64 = 1e-16;
const MAX_TERMS: usize = 200;

/// `Si(x) = ∫₀ˣ sin(t)/t dt` for `x >= 0`.
pub fn sine_integral(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain {
            function: "sine_integral",
            value: x,
            expected: "finite x >= 0",
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x <= SERIES_LIMIT {
        return Ok(si_series(x));
    }
    let (f, g) = auxiliary(x);
    let (s, c) = x.sin_cos();
    Ok(FRAC_PI_2 - f * c - g * s)
}

/// `Ci(x) = -∫ₓ^∞ cos(t)/t dt` for `x > 0`. `Ci` has a logarithmic pole at 0.
pub fn cosine_integral(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain {
            function: "cosine_integral",
            value: x,
            expected: "finite x > 0",
        });
    }
    if x <= SERIES_LIMIT {
        return Ok(ci_series(x));
    }
    let (f, g) = auxiliary(x);
    let (s, c) = x.sin_cos();
    Ok(f * s - g * c)
}

/// Both integrals at once, sharing the auxiliary-function evaluation.
pub fn sici(x: f64) -> Result<(f64, f64)> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain {
            function: "sici",
            value: x,
            expected: "finite x > 0",
        });
    }
    if x <= SERIES_LIMIT {
        return Ok((si_series(x), ci_series(x)));
    }
    let (f, g) = auxiliary(x);
    let (s, c) = x.sin_cos();
    Ok((FRAC_PI_2 - f * c - g * s, f * s - g * c))
}

fn si_series(x: f64) -> f64 {
    // sum_k (-1)^k x^(2k+1) / ((2k+1) (2k+1)!)
    let x2 = x * x;
    let mut term = x; // x^(2k+1) / (2k+1)! with sign
    let mut sum = x;
    for k in 1..MAX_TERMS {
        let n = (2 * k) as f64;
        term *= -x2 / (n * (n + 1.0));
        let add = term / (n + 1.0);
        sum += add;
        if add.abs() < EPS * sum.abs() {
            break;
        }
    }
    sum
}

fn ci_series(x: f64) -> f64 {
    // gamma + ln x + sum_{k>=1} (-1)^k x^(2k) / (2k (2k)!)
    let x2 = x * x;
    let mut term = 1.0; // x^(2k) / (2k)! with sign
    let mut sum = 0.0;
    for k in 1..MAX_TERMS {
        let n = (2 * k) as f64;
        term *= -x2 / ((n - 1.0) * n);
        let add = term / n;
        sum += add;
        if add.abs() < EPS * sum.abs().max(1e-300) {
            break;
        }
    }
    EULER_GAMMA + x.ln() + sum
}

/// Auxiliary functions `(f, g)` from the continued fraction of `e^{ix} E1(ix)`.
fn auxiliary(x: f64) -> (f64, f64) {
    const TINY: f64 = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / TINY, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 2..MAX_TERMS {
        let a = -(((i - 1) * (i - 1)) as f64);
        b += 2.0;
        d = (d * a + b).inv();
        c = b + c.inv() * a;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < EPS {
            break;
        }
    }
    // h = g - i f
    (-h.im, h.re)
}
