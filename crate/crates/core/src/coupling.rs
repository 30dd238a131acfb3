//! Intra-array impedance matrix for side-by-side half-wavelength dipoles.
//!
//! Mutual impedance between two parallel center-fed dipoles of length `l`
//! at separation `s`, with `u = k s`, `v = k(√(s² + l²) + l)` and
//! `w = k(√(s² + l²) - l)`:
//!
//! ```text
//! R = η/4π [2 Ci(u) - Ci(v) - Ci(w)]
//! X = -η/4π [2 Si(u) - Si(v) - Si(w)]
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::linalg::CMatrix;
use crate::specfun::{cosine_integral, sici, EULER_GAMMA};

/// Self-impedance of a half-wavelength dipole, `R_r + jX_A`.
pub const DIPOLE_SELF_IMPEDANCE: Complex64 = Complex64::new(73.0, 42.5);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingModel {
    HalfWaveDipole,
    Uncoupled,
}

/// Mutual impedance of two side-by-side dipoles `separation` meters apart.
pub fn mutual_impedance_at(separation: f64, wavelength: f64, eta: f64) -> Result<Complex64> {
    if !(separation > 0.0) || !separation.is_finite() {
        return Err(Error::invalid(
            "separation",
            format!("{separation} m must be positive"),
        ));
    }
    let k = 2.0 * PI / wavelength;
    let l = wavelength / 2.0;
    let root = separation.hypot(l);
    let u = k * separation;
    let v = k * (root + l);
    // root - l suffers cancellation for s << l
    let w = k * separation * separation / (root + l);
    let (si_u, ci_u) = sici(u)?;
    let (si_v, ci_v) = sici(v)?;
    let (si_w, ci_w) = sici(w)?;
    let scale = eta / (4.0 * PI);
    Ok(Complex64::new(
        scale * (2.0 * ci_u - ci_v - ci_w),
        -scale * (2.0 * si_u - si_v - si_w),
    ))
}

/// `[Z_R]_{p,q}` for `p != q`.
pub fn mutual_impedance(p: usize, q: usize, geometry: &ArrayGeometry, eta: f64) -> Result<Complex64> {
    if p == q {
        return Err(Error::invalid(
            "p, q",
            "self-impedance is assigned, not computed from the mutual formula",
        ));
    }
    let lag = p.abs_diff(q);
    mutual_impedance_at(
        geometry.spacing() * lag as f64,
        geometry.wavelength(),
        eta,
    )
}

/// `N×N` receive impedance matrix. Entries depend on `|p - q|` only, so each
/// lag is evaluated once and the matrix is exactly Toeplitz and symmetric.
pub fn build_zr(
    geometry: &ArrayGeometry,
    model: CouplingModel,
    self_impedance: Complex64,
    eta: f64,
) -> Result<CMatrix> {
    if !(self_impedance.re > 0.0) {
        return Err(Error::invalid(
            "self_impedance",
            format!("radiation resistance {} must be positive", self_impedance.re),
        ));
    }
    let n = geometry.elements();
    let mut lags = vec![Complex64::new(0.0, 0.0); n];
    lags[0] = self_impedance;
    if model == CouplingModel::HalfWaveDipole {
        for (lag, z) in lags.iter_mut().enumerate().skip(1) {
            *z = mutual_impedance_at(
                geometry.spacing() * lag as f64,
                geometry.wavelength(),
                eta,
            )?;
        }
    }
    Ok(CMatrix::from_fn(n, n, |p, q| lags[p.abs_diff(q)]))
}

/// Mutual resistance as separation tends to zero:
/// `η/4π [γ + ln(2kl) - Ci(2kl)]` with `kl = π`.
pub fn coincident_resistance(eta: f64) -> f64 {
    let two_kl = 2.0 * PI;
    let ci = cosine_integral(two_kl).expect("2π is in the domain of Ci");
    eta / (4.0 * PI) * (EULER_GAMMA + two_kl.ln() - ci)
}

/// Mutual resistance at `d/λ`, normalized so that it tends to one as `d → 0`.
pub fn normalized_coupling(d_over_lambda: f64, eta: f64) -> Result<f64> {
    let z = mutual_impedance_at(d_over_lambda, 1.0, eta)?;
    Ok(z.re / coincident_resistance(eta))
}
