//! Unipolar PAM, the coherent MRC detector and the noncoherent
//! unconditional-ML detector.
//!
//! Two NC implementations are provided. [`NcCache`] factors every
//! `C_{y|x} = |x|² C_h + C_z` and evaluates the quadratic form by triangular
//! solves. [`NcProjector`] diagonalizes `C_h` and `C_z` jointly once, after
//! which each decision only needs the projection of the whitened
//! observation onto the numerically nonzero eigenvectors of the whitened
//! channel covariance. Both give the same decisions; the Monte Carlo engine
//! uses the projector.

use std::fmt;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot_conj, hermitian_part, CMatrix, CVector, Cholesky};

/// Eigenvalues of the whitened channel covariance below this fraction of
/// the largest one are dropped by [`NcProjector`].
pub const EIGEN_CUTOFF: f64 = 1e-13;

/// Unipolar M-PAM, `x_m = (m - 1)Δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    spacing: f64,
    points: Vec<f64>,
}

impl Constellation {
    /// Scales the grid so that `E|x|² = mean_power` under a uniform prior.
    pub fn new(order: usize, mean_power: f64) -> Result<Self> {
        if order < 2 {
            return Err(Error::invalid("order", format!("{order}: need at least two symbols")));
        }
        if !(mean_power > 0.0) || !mean_power.is_finite() {
            return Err(Error::invalid("mean_power", format!("{mean_power} must be positive")));
        }
        let sum_sq: f64 = (0..order).map(|m| (m * m) as f64).sum();
        let spacing = (mean_power * order as f64 / sum_sq).sqrt();
        let points = (0..order).map(|m| m as f64 * spacing).collect();
        Ok(Self { spacing, points })
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|x| x * x).sum::<f64>() / self.order() as f64
    }

    /// Index of the closest point; ties go to the lower index.
    pub fn nearest(&self, s: f64) -> usize {
        let mut best = 0;
        let mut best_d = (s - self.points[0]).abs();
        for (m, &x) in self.points.iter().enumerate().skip(1) {
            let d = (s - x).abs();
            if d < best_d {
                best = m;
                best_d = d;
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    /// Coherent MRC.
    #[serde(rename = "C")]
    Coherent,
    /// Noncoherent unconditional ML.
    #[serde(rename = "NC")]
    Noncoherent,
}

impl DetectorKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Coherent => "C",
            Self::Noncoherent => "NC",
        }
    }
}

/// Which model the detector believes in.
///
/// `Matched` detects with the true coupled statistics, `Mismatched` detects
/// coupled signals with the uncoupled model, `Uncoupled` generates and
/// detects with the uncoupled model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "M")]
    Matched,
    #[serde(rename = "MM")]
    Mismatched,
    #[serde(rename = "U")]
    Uncoupled,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Self::Matched => "M",
            Self::Mismatched => "MM",
            Self::Uncoupled => "U",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Detector {
    pub kind: DetectorKind,
    pub mode: Mode,
}

impl Detector {
    /// All six detectors in legend order.
    pub const ALL: [Detector; 6] = [
        Detector::new(DetectorKind::Noncoherent, Mode::Matched),
        Detector::new(DetectorKind::Coherent, Mode::Matched),
        Detector::new(DetectorKind::Noncoherent, Mode::Mismatched),
        Detector::new(DetectorKind::Coherent, Mode::Mismatched),
        Detector::new(DetectorKind::Noncoherent, Mode::Uncoupled),
        Detector::new(DetectorKind::Coherent, Mode::Uncoupled),
    ];

    pub const fn new(kind: DetectorKind, mode: Mode) -> Self {
        Self { kind, mode }
    }

    /// Stable small integer used to split random streams.
    pub fn id(self) -> u64 {
        let k = match self.kind {
            DetectorKind::Noncoherent => 0,
            DetectorKind::Coherent => 1,
        };
        let m = match self.mode {
            Mode::Matched => 0,
            Mode::Mismatched => 1,
            Mode::Uncoupled => 2,
        };
        2 * m + k
    }

    pub fn label(self) -> String {
        format!("{}-{}", self.kind.label(), self.mode.label())
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Detector::ALL
            .into_iter()
            .find(|d| d.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::invalid(
                    "detector",
                    format!("unknown detector {s:?}, expected one of NC-M, C-M, NC-MM, C-MM, NC-U, C-U"),
                )
            })
    }
}

/// Channel gain assumed by the mismatched coherent detector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchGain {
    /// `ĥ = g_u z_ART`, keeping the phase of the uncoupled load factor.
    #[default]
    Complex,
    /// `ĥ = √γ₁ z_ART`.
    Real,
}

/// `C^{-1/2}` in factored form.
#[derive(Clone, Debug)]
pub enum Whitener {
    /// `L⁻¹` for `C = L Lᴴ`.
    Cholesky(Cholesky),
    /// `σ⁻¹ I` for `C = σ² I`.
    Isotropic { dim: usize, variance: f64 },
}

impl Whitener {
    pub fn from_covariance(c: &CMatrix) -> Result<Self> {
        Ok(Self::Cholesky(Cholesky::factor(c)?))
    }

    pub fn isotropic(dim: usize, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::invalid("variance", format!("{variance} must be positive")));
        }
        Ok(Self::Isotropic { dim, variance })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Cholesky(ch) => ch.dim(),
            Self::Isotropic { dim, .. } => *dim,
        }
    }

    pub fn whiten_in_place(&self, x: &mut [Complex64]) {
        match self {
            Self::Cholesky(ch) => ch.solve_lower_in_place(x),
            Self::Isotropic { variance, .. } => {
                let s = 1.0 / variance.sqrt();
                x.iter_mut().for_each(|v| *v *= s);
            }
        }
    }

    pub fn whiten(&self, x: &CVector) -> CVector {
        let mut out = x.clone();
        self.whiten_in_place(out.as_mut_slice());
        out
    }

    /// `W M`.
    pub fn whiten_matrix(&self, m: &CMatrix) -> CMatrix {
        match self {
            Self::Cholesky(ch) => ch.solve_lower_matrix(m),
            Self::Isotropic { variance, .. } => m / Complex64::new(variance.sqrt(), 0.0),
        }
    }

    /// `Wᴴ M`.
    fn whiten_adjoint_matrix(&self, m: &CMatrix) -> CMatrix {
        match self {
            Self::Cholesky(ch) => {
                let mut out = m.clone();
                let mut col = vec![Complex64::new(0.0, 0.0); ch.dim()];
                for j in 0..m.ncols() {
                    col.copy_from_slice(m.column(j).as_slice());
                    ch.solve_adjoint_in_place(&mut col);
                    out.column_mut(j).copy_from_slice(&col);
                }
                out
            }
            Self::Isotropic { variance, .. } => m / Complex64::new(variance.sqrt(), 0.0),
        }
    }

    /// `ln |C|`.
    pub fn log_det(&self) -> f64 {
        match self {
            Self::Cholesky(ch) => ch.log_det(),
            Self::Isotropic { dim, variance } => *dim as f64 * variance.ln(),
        }
    }
}

/// `Re[hᴴC⁻¹y] / (hᴴC⁻¹h)`.
pub fn mrc_statistic(y: &CVector, h: &CVector, noise: &Whitener) -> Result<f64> {
    let yw = noise.whiten(y);
    let hw = noise.whiten(h);
    let den = hw.norm_squared();
    if !(den > 0.0) {
        return Err(Error::DegenerateChannel);
    }
    Ok(dot_conj(yw.as_slice(), hw.as_slice()).re / den)
}

/// Coherent MRC decision with noise covariance `c_z`.
pub fn mrc_detect(y: &CVector, h: &CVector, c_z: &CMatrix, cst: &Constellation) -> Result<usize> {
    let w = Whitener::from_covariance(c_z)?;
    Ok(cst.nearest(mrc_statistic(y, h, &w)?))
}

/// Per-symbol Cholesky factors of `|x_m|² C_h + C_z`.
#[derive(Clone, Debug)]
pub struct NcCache {
    factors: Vec<Cholesky>,
    log_dets: Vec<f64>,
}

impl NcCache {
    pub fn build(c_h: &CMatrix, c_z: &CMatrix, cst: &Constellation) -> Result<Self> {
        let mut factors = Vec::with_capacity(cst.order());
        let mut log_dets = Vec::with_capacity(cst.order());
        for &x in cst.points() {
            let c = c_h * Complex64::new(x * x, 0.0) + c_z;
            let f = Cholesky::factor(&hermitian_part(&c))?;
            let ld = f.log_det();
            if !ld.is_finite() {
                return Err(Error::numerical("nc_cache", format!("log-determinant {ld} for x = {x}")));
            }
            log_dets.push(ld);
            factors.push(f);
        }
        Ok(Self { factors, log_dets })
    }

    pub fn log_dets(&self) -> &[f64] {
        &self.log_dets
    }

    /// `yᴴ C_{y|x_m}⁻¹ y + ln |C_{y|x_m}|` for every symbol.
    pub fn metrics(&self, y: &CVector) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); y.len()];
        self.factors
            .iter()
            .zip(&self.log_dets)
            .map(|(f, ld)| {
                buf.copy_from_slice(y.as_slice());
                f.solve_lower_in_place(&mut buf);
                buf.iter().map(|v| v.norm_sqr()).sum::<f64>() + ld
            })
            .collect()
    }
}

fn argmin(metrics: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (m, v) in metrics.into_iter().enumerate() {
        if v < best_v {
            best = m;
            best_v = v;
        }
    }
    best
}

/// Noncoherent ML decision.
pub fn nc_detect(y: &CVector, cache: &NcCache) -> usize {
    argmin(cache.metrics(y))
}

/// Joint diagonalization of `(C_h, C_z)` for fast NC decisions.
///
/// With `W = C_z^{-1/2}` and `W C_h Wᴴ = U Λ Uᴴ`, and `p = U_rᴴ W y`,
///
/// ```text
/// yᴴ(t C_h + C_z)⁻¹y + ln|t C_h + C_z|
///     = ‖Wy‖² + ln|C_z| - Σ_k |p_k|² tλ_k/(1 + tλ_k) + Σ_k ln(1 + tλ_k)
/// ```
///
/// and the first two terms do not depend on the symbol.
#[derive(Clone, Debug)]
pub struct NcProjector {
    /// `U_r`, `N × r`.
    basis: CMatrix,
    /// `U_rᴴ W`, `r × N`.
    projector: CMatrix,
    eigenvalues: Vec<f64>,
    /// Row `m`: `tλ_k / (1 + tλ_k)` for `t = x_m²`.
    weights: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl NcProjector {
    pub fn build(c_h: &CMatrix, noise: &Whitener, cst: &Constellation) -> Result<Self> {
        let wc = noise.whiten_matrix(c_h);
        let m = noise.whiten_matrix(&wc.adjoint());
        let eig = SymmetricEigen::new(hermitian_part(&m));
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        if !max.is_finite() {
            return Err(Error::numerical("nc_projector", "non-finite eigenvalue"));
        }
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&k| max > 0.0 && eig.eigenvalues[k] > EIGEN_CUTOFF * max)
            .collect();
        let n = noise.dim();
        let u = CMatrix::from_fn(n, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])]);
        // (U_rᴴ W)ᴴ = Wᴴ U_r
        let projector = noise.whiten_adjoint_matrix(&u).adjoint();
        let eigenvalues: Vec<f64> = keep.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut weights = Vec::with_capacity(cst.order());
        let mut offsets = Vec::with_capacity(cst.order());
        for &x in cst.points() {
            let t = x * x;
            weights.push(eigenvalues.iter().map(|l| t * l / (1.0 + t * l)).collect());
            offsets.push(eigenvalues.iter().map(|l| (t * l).ln_1p()).sum());
        }
        Ok(Self {
            basis: u,
            projector,
            eigenvalues,
            weights,
            offsets,
        })
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues of the whitened channel covariance that were kept.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Kept eigenvectors `U_r` of the whitened channel covariance.
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.basis
    }

    /// `U_rᴴ W`.
    pub fn projector(&self) -> &CMatrix {
        &self.projector
    }

    /// Decision from the projected observation `p = U_rᴴ W y`.
    pub fn decide(&self, p: &[Complex64]) -> usize {
        debug_assert_eq!(p.len(), self.rank());
        argmin(self.weights.iter().zip(&self.offsets).map(|(w, off)| {
            let energy: f64 = w.iter().zip(p).map(|(wk, pk)| wk * pk.norm_sqr()).sum();
            off - energy
        }))
    }

    pub fn detect(&self, y: &CVector) -> usize {
        let p = &self.projector * y;
        self.decide(p.as_slice())
    }
}
