//! Mutual coupling in dense receive arrays: impedance model, multiport
//! channel statistics, coherent and non-coherent detectors, and a
//! deterministic Monte Carlo symbol-error engine.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod detect;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod mc;
pub mod multiport;
pub mod scene;
pub mod specfun;

pub use coupling::{build_zr, mutual_impedance, CouplingModel, DIPOLE_SELF_IMPEDANCE};
pub use detect::{Constellation, Detector, DetectorKind, MismatchGain, Mode};
pub use error::{Error, Result};
pub use geometry::{ArrayGeometry, Point2, Polar};
pub use linalg::{CMatrix, CVector};
pub use mc::{estimate_ser, run_sweep, ExperimentSpec, SerEstimate, SweepPoint, SweepResult};
pub use multiport::{CircuitParams, MultiportChannel, UncoupledFactors};
pub use num_complex::Complex64;
pub use scene::Scene;
