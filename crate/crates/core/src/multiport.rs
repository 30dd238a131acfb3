//! Multiport circuit model of the uplink: transmitter matching, the
//! load-coupling matrix `Q`, channel and noise second-order statistics, and
//! the scalar factors of the uncoupled model.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupling::{build_zr, CouplingModel, DIPOLE_SELF_IMPEDANCE};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, BOLTZMANN, FREE_SPACE_IMPEDANCE};
use crate::linalg::{hermitian_eigenvalues, hermitian_part, hermitian_residual, norm_one, trace_re, CMatrix, CVector};
use crate::scene::{inter_array_covariance, Scene};

/// Largest 1-norm condition number accepted for `Z_L I + Z_R`.
pub const MAX_CONDITION: f64 = 1e12;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Circuit and noise parameters. Defaults reproduce the reference scenario:
/// 20 MHz bandwidth, 290 K antennas, a 5 Ω LNA noise resistance and
/// `Z_G = Z_L = 186 - j31.6 Ω`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// `Z_G`, Ω.
    pub generator_impedance: Complex64,
    /// `Z_L`, Ω.
    pub load_impedance: Complex64,
    /// `Z_AT`, Ω.
    pub tx_antenna_impedance: Complex64,
    /// `Z_A = R_r + jX_A`, Ω.
    pub rx_self_impedance: Complex64,
    /// `R_N`, Ω.
    pub noise_resistance: f64,
    /// `ρ`, LNA voltage/current noise correlation.
    pub noise_correlation: Complex64,
    /// `T_A`, K.
    pub antenna_temperature: f64,
    /// `B_W`, Hz.
    pub bandwidth: f64,
    /// `σ_i²`, A².
    pub current_noise_variance: f64,
    /// `c`, V².
    pub normalization: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        let bandwidth = 20e6;
        let antenna_temperature = 290.0;
        let noise_resistance = 5.0;
        Self {
            generator_impedance: Complex64::new(186.0, -31.6),
            load_impedance: Complex64::new(186.0, -31.6),
            tx_antenna_impedance: DIPOLE_SELF_IMPEDANCE,
            rx_self_impedance: DIPOLE_SELF_IMPEDANCE,
            noise_resistance,
            noise_correlation: Complex64::new(0.2730, 0.1793),
            antenna_temperature,
            bandwidth,
            current_noise_variance: default_current_noise_variance(
                bandwidth,
                antenna_temperature,
                noise_resistance,
            ),
            normalization: 1.0,
        }
    }
}

/// `σ_i² = 2 k_B B_W T_A / R_N`.
pub fn default_current_noise_variance(bandwidth: f64, temperature: f64, noise_resistance: f64) -> f64 {
    2.0 * BOLTZMANN * bandwidth * temperature / noise_resistance
}

impl CircuitParams {
    pub fn radiation_resistance(&self) -> f64 {
        self.rx_self_impedance.re
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} must be positive and finite")))
            }
        };
        positive("generator_impedance (real part)", self.generator_impedance.re)?;
        positive("tx_antenna_impedance (real part)", self.tx_antenna_impedance.re)?;
        positive("rx_self_impedance (real part)", self.rx_self_impedance.re)?;
        positive("noise_resistance", self.noise_resistance)?;
        positive("antenna_temperature", self.antenna_temperature)?;
        positive("bandwidth", self.bandwidth)?;
        positive("current_noise_variance", self.current_noise_variance)?;
        positive("normalization", self.normalization)?;
        if !self.load_impedance.re.is_finite() || !self.load_impedance.im.is_finite() {
            return Err(Error::invalid("load_impedance", "must be finite"));
        }
        if !(self.noise_correlation.norm() <= 1.0) {
            return Err(Error::invalid(
                "noise_correlation",
                format!("|ρ| = {} must not exceed 1", self.noise_correlation.norm()),
            ));
        }
        Ok(())
    }

    /// `-j / (2 √(R_G Re Z_AT))`, the factor between `Q z_ART` and `h`.
    pub fn channel_scale(&self) -> Complex64 {
        -J / (2.0 * (self.generator_impedance.re * self.tx_antenna_impedance.re).sqrt())
    }
}

/// Lossless two-port matching the generator to the transmit antenna.
pub fn matching_network(params: &CircuitParams) -> Result<Matrix2<Complex64>> {
    let rg = params.generator_impedance.re;
    let rat = params.tx_antenna_impedance.re;
    if !(rg > 0.0) || !(rat > 0.0) {
        return Err(Error::invalid(
            "matching_network",
            format!("resistances must be positive (R_G = {rg}, Re Z_AT = {rat})"),
        ));
    }
    let off = -J * (rg * rat).sqrt();
    Ok(Matrix2::new(
        -J * params.generator_impedance.im,
        off,
        off,
        -J * params.tx_antenna_impedance.im,
    ))
}

/// Impedance seen looking into the matched transmitter, `Z_T`.
pub fn transmit_impedance(zmt: &Matrix2<Complex64>, tx_antenna_impedance: Complex64) -> Complex64 {
    zmt[(0, 0)] - zmt[(0, 1)] * zmt[(0, 1)] / (tx_antenna_impedance + zmt[(1, 1)])
}

/// `Q = Z_L (Z_L I + Z_R)⁻¹`.
pub fn q_matrix(load_impedance: Complex64, z_r: &CMatrix) -> Result<CMatrix> {
    let n = z_r.nrows();
    let a = CMatrix::identity(n, n) * load_impedance + z_r;
    let inv = a.clone().lu().try_inverse().ok_or_else(|| {
        Error::numerical("q_matrix", "Z_L I + Z_R is singular")
    })?;
    let cond = norm_one(&a) * norm_one(&inv);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::numerical(
            "q_matrix",
            format!("Z_L I + Z_R has condition number {cond:.3e} > {MAX_CONDITION:.0e}"),
        ));
    }
    Ok(inv * load_impedance)
}

/// `h = -j / (2√(R_G Re Z_AT)) · Q z_ART`.
pub fn channel_from_zart(z_art: &CVector, q: &CMatrix, params: &CircuitParams) -> CVector {
    (q * z_art) * params.channel_scale()
}

/// `C_z = Q (C_EN + U_LNA) Qᴴ / c` with `C_EN = 4 k_B T_A B_W Re(Z_R)` and
/// `U_LNA = σ_i² (R_N² I + Z_R Z_Rᴴ - 2 R_N Re(ρ* Z_R))`.
pub fn noise_covariance(q: &CMatrix, z_r: &CMatrix, params: &CircuitParams) -> Result<CMatrix> {
    let n = z_r.nrows();
    let thermal = 4.0 * BOLTZMANN * params.antenna_temperature * params.bandwidth;
    let rn = params.noise_resistance;
    let rho_conj = params.noise_correlation.conj();
    let extrinsic = z_r.map(|z| Complex64::new(thermal * z.re, 0.0));
    let cross = z_r.map(|z| Complex64::new(2.0 * rn * (rho_conj * z).re, 0.0));
    let intrinsic = (CMatrix::identity(n, n) * Complex64::new(rn * rn, 0.0) + z_r * z_r.adjoint() - cross)
        * Complex64::new(params.current_noise_variance, 0.0);
    let c_n = q * (extrinsic + intrinsic) * q.adjoint();
    let c_z = c_n / Complex64::new(params.normalization, 0.0);

    let tr = trace_re(&c_z);
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::numerical("noise_covariance", format!("trace {tr} is not positive")));
    }
    let resid = hermitian_residual(&c_z);
    if resid > 1e-12 * tr / n as f64 {
        return Err(Error::numerical(
            "noise_covariance",
            format!("Hermitian residual {resid:.3e} exceeds tolerance"),
        ));
    }
    let c_z = hermitian_part(&c_z);
    let min = hermitian_eigenvalues(&c_z)[0];
    if min < -1e-10 * tr / n as f64 {
        return Err(Error::numerical(
            "noise_covariance",
            format!("not positive semidefinite (min eigenvalue {min:.3e}); Z_R is not physical"),
        ));
    }
    Ok(c_z)
}

/// `C_h = Q C_ART Qᴴ / (4 R_G Re Z_AT)`.
pub fn channel_covariance(q: &CMatrix, c_art: &CMatrix, params: &CircuitParams) -> CMatrix {
    let scale = 4.0 * params.generator_impedance.re * params.tx_antenna_impedance.re;
    hermitian_part(&(q * c_art * q.adjoint())) / Complex64::new(scale, 0.0)
}

/// Scalars of the uncoupled model `Z_R = Z_A I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncoupledFactors {
    /// Channel power scale, `|g_u|²`.
    pub gamma1: f64,
    /// Per-antenna noise power.
    pub gamma2: f64,
    /// Complex gain `g_u` with `h = g_u z_ART`.
    pub gain: Complex64,
}

pub fn gamma_factors(params: &CircuitParams) -> UncoupledFactors {
    let za = params.rx_self_impedance;
    let q_u = params.load_impedance / (params.load_impedance + za);
    let gain = params.channel_scale() * q_u;
    let thermal = 4.0 * BOLTZMANN * params.antenna_temperature * params.bandwidth;
    let rn = params.noise_resistance;
    let lna = params.current_noise_variance
        * (rn * rn + za.norm_sqr() - 2.0 * rn * (params.noise_correlation.conj() * za).re);
    let gamma2 = q_u.norm_sqr() * (thermal * za.re + lna) / params.normalization;
    UncoupledFactors {
        gamma1: gain.norm_sqr(),
        gamma2,
        gain,
    }
}

/// Every matrix the detectors need for one array/scene configuration.
#[derive(Clone, Debug)]
pub struct MultiportChannel {
    pub model: CouplingModel,
    pub z_r: CMatrix,
    pub q: CMatrix,
    pub c_art: CMatrix,
    pub c_h: CMatrix,
    pub c_z: CMatrix,
    pub factors: UncoupledFactors,
}

impl MultiportChannel {
    pub fn build(
        params: &CircuitParams,
        geometry: &ArrayGeometry,
        scene: &Scene,
        model: CouplingModel,
    ) -> Result<Self> {
        params.validate()?;
        let z_r = build_zr(geometry, model, params.rx_self_impedance, FREE_SPACE_IMPEDANCE)?;
        let q = q_matrix(params.load_impedance, &z_r)?;
        let c_art = inter_array_covariance(scene, geometry, params.radiation_resistance())?;
        let c_h = channel_covariance(&q, &c_art, params);
        let c_z = noise_covariance(&q, &z_r, params)?;
        Ok(Self {
            model,
            z_r,
            q,
            c_art,
            c_h,
            c_z,
            factors: gamma_factors(params),
        })
    }

    pub fn elements(&self) -> usize {
        self.z_r.nrows()
    }
}
