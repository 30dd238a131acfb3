//! Uniform linear array geometry and planar coordinates.
//!
//! Elements sit on the x axis at `(n·d, 0)`. Azimuths are measured from
//! broadside (the +y axis) toward the array axis, so `θ = 90°` is end-fire
//! along +x.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Free-space wave impedance, Ω.
pub const FREE_SPACE_IMPEDANCE: f64 = 376.730;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn wavelength_from_frequency(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn translate(&self, by: Point2) -> Point2 {
        Point2::new(self.x + by.x, self.y + by.y)
    }
}

/// Range and azimuth (radians, from broadside).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polar {
    pub range: f64,
    pub azimuth: f64,
}

impl Polar {
    pub fn from_degrees(range: f64, azimuth_deg: f64) -> Self {
        Self {
            range,
            azimuth: azimuth_deg.to_radians(),
        }
    }

    pub fn to_cartesian(&self) -> Point2 {
        let (s, c) = self.azimuth.sin_cos();
        Point2::new(self.range * s, self.range * c)
    }
}

/// A ULA of side-by-side half-wavelength dipoles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    elements: usize,
    spacing: f64,
    wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(elements: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if elements == 0 {
            return Err(Error::invalid("elements", "array needs at least one element"));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid("spacing", format!("{spacing} m must be positive")));
        }
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::invalid(
                "wavelength",
                format!("{wavelength} m must be positive"),
            ));
        }
        Ok(Self {
            elements,
            spacing,
            wavelength,
        })
    }

    /// Array of `elements >= 2` spanning `aperture` meters, `d = D / (N - 1)`.
    pub fn from_aperture(elements: usize, aperture: f64, wavelength: f64) -> Result<Self> {
        if elements < 2 {
            return Err(Error::invalid(
                "elements",
                format!("{elements}: a fixed aperture needs at least two elements"),
            ));
        }
        if !(aperture > 0.0) || !aperture.is_finite() {
            return Err(Error::invalid("aperture", format!("{aperture} m must be positive")));
        }
        Self::new(elements, aperture / (elements - 1) as f64, wavelength)
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn aperture(&self) -> f64 {
        self.spacing * (self.elements - 1) as f64
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    pub fn dipole_length(&self) -> f64 {
        self.wavelength / 2.0
    }

    pub fn position(&self, n: usize) -> Point2 {
        Point2::new(n as f64 * self.spacing, 0.0)
    }

    pub fn positions(&self) -> impl Iterator<Item = Point2> + '_ {
        (0..self.elements).map(|n| self.position(n))
    }
}
