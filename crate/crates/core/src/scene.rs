//! Scatterer scenes, spherical-wave array responses and the inter-array
//! coupling vector `z_ART = j R_r Σ α_i a_i`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Point2, Polar};
use crate::linalg::{CMatrix, CVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: Point2,
    /// Mean power `β = E|α|²`.
    pub power: f64,
}

/// A user surrounded by point scatterers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub user: Polar,
    pub cluster_radius: f64,
    pub scatterers: Vec<Scatterer>,
}

impl Scene {
    pub fn new(user: Polar, cluster_radius: f64, scatterers: Vec<Scatterer>) -> Result<Self> {
        if scatterers.is_empty() {
            return Err(Error::invalid("scatterers", "scene needs at least one scatterer"));
        }
        if let Some(s) = scatterers.iter().find(|s| !(s.power > 0.0)) {
            return Err(Error::invalid(
                "scatterers",
                format!("scatterer power {} must be positive", s.power),
            ));
        }
        Ok(Self {
            user,
            cluster_radius,
            scatterers,
        })
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    /// `N×L` matrix whose columns are the array responses `a_i`.
    pub fn response_matrix(&self, geometry: &ArrayGeometry) -> Result<CMatrix> {
        let n = geometry.elements();
        let mut a = CMatrix::zeros(n, self.len());
        for (i, s) in self.scatterers.iter().enumerate() {
            a.set_column(i, &array_response(s.position, geometry)?);
        }
        Ok(a)
    }
}

/// `[a]_n = e^{-jk‖s - u_n‖} / (k‖s - u_n‖)`, exact spherical wavefront.
pub fn array_response(source: Point2, geometry: &ArrayGeometry) -> Result<CVector> {
    let k = geometry.wavenumber();
    let mut a = CVector::zeros(geometry.elements());
    for (n, u) in geometry.positions().enumerate() {
        let r = source.distance(&u);
        if !(r > 0.0) {
            return Err(Error::Domain {
                function: "array_response",
                value: r,
                expected: "scatterer distinct from every element",
            });
        }
        let kr = k * r;
        a[n] = Complex64::from_polar(1.0 / kr, -kr);
    }
    Ok(a)
}

/// `C_ART = R_r² Σ β_i a_i a_iᴴ`.
pub fn inter_array_covariance(
    scene: &Scene,
    geometry: &ArrayGeometry,
    radiation_resistance: f64,
) -> Result<CMatrix> {
    let n = geometry.elements();
    let mut c = CMatrix::zeros(n, n);
    for s in &scene.scatterers {
        let a = array_response(s.position, geometry)?;
        c += (&a * a.adjoint()) * Complex64::new(s.power, 0.0);
    }
    Ok(c * Complex64::new(radiation_resistance * radiation_resistance, 0.0))
}

/// `count` scatterers on the circle of radius `cluster_radius` around the
/// user, at i.i.d. uniform angles, each with power `1 / count`.
pub fn sample_scatterers<R: Rng + ?Sized>(
    user: Polar,
    cluster_radius: f64,
    count: usize,
    rng: &mut R,
) -> Result<Scene> {
    if !(cluster_radius > 0.0) || !cluster_radius.is_finite() {
        return Err(Error::invalid(
            "cluster_radius",
            format!("{cluster_radius} m must be positive"),
        ));
    }
    if count == 0 {
        return Err(Error::invalid("scatterers", "need at least one scatterer"));
    }
    let centre = user.to_cartesian();
    let power = 1.0 / count as f64;
    let scatterers = (0..count)
        .map(|_| {
            let phi = rng.random::<f64>() * 2.0 * PI;
            let (s, c) = phi.sin_cos();
            Scatterer {
                position: Point2::new(centre.x + cluster_radius * c, centre.y + cluster_radius * s),
                power,
            }
        })
        .collect();
    Scene::new(user, cluster_radius, scatterers)
}

/// One circularly-symmetric complex Gaussian draw with variance `var`.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Scatterer gains `α_i ~ CN(0, β_i)`.
pub fn draw_gains<R: Rng + ?Sized>(scene: &Scene, rng: &mut R) -> Vec<Complex64> {
    scene
        .scatterers
        .iter()
        .map(|s| complex_gaussian(rng, s.power))
        .collect()
}

/// `z_ART = j R_r Σ α_i a_i` for fresh gains.
pub fn draw_z_art<R: Rng + ?Sized>(
    scene: &Scene,
    geometry: &ArrayGeometry,
    radiation_resistance: f64,
    rng: &mut R,
) -> Result<CVector> {
    let a = scene.response_matrix(geometry)?;
    let alpha = CVector::from_vec(draw_gains(scene, rng));
    Ok(a * alpha * Complex64::new(0.0, radiation_resistance))
}
