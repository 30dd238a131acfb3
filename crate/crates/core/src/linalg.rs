//! Dense complex linear algebra used by the channel model and detectors.
//!
//! General matrix arithmetic, LU inversion and Hermitian eigensolves come
//! from `nalgebra`. The Cholesky factor is kept in a row-major lower
//! triangle so that the per-trial kernels (forward substitution and
//! triangular products) run over contiguous rows.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative diagonal loading applied when a first factorization attempt fails.
pub const JITTER_EPS: f64 = 1e-12;

static JITTER_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Number of factorizations (process-wide) that needed diagonal loading.
pub fn jitter_events() -> u64 {
    JITTER_EVENTS.load(Ordering::Relaxed)
}

/// Lower Cholesky factor `A = L Lᴴ` of a Hermitian positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<Complex64>,
    inv_diag: Vec<f64>,
    jittered: bool,
}

impl Cholesky {
    /// Factorizes `a`. On failure, retries once with `a + ε·(tr a / n)·I`.
    pub fn factor(a: &CMatrix) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::numerical(
                "cholesky",
                format!("expected a nonempty square matrix, got {}x{}", n, a.ncols()),
            ));
        }
        if let Some(l) = decompose(a, 0.0) {
            return Ok(Self::from_lower(n, l, false));
        }
        let trace: f64 = (0..n).map(|i| a[(i, i)].re).sum();
        if !(trace > 0.0) || !trace.is_finite() {
            return Err(Error::numerical(
                "cholesky",
                format!("matrix trace {trace} is not positive"),
            ));
        }
        JITTER_EVENTS.fetch_add(1, Ordering::Relaxed);
        decompose(a, JITTER_EPS * trace / n as f64)
            .map(|l| Self::from_lower(n, l, true))
            .ok_or_else(|| {
                Error::numerical("cholesky", "not positive definite after diagonal loading")
            })
    }

    /// Factor of `variance · I`.
    pub fn scaled_identity(n: usize, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::invalid("variance", format!("{variance} must be positive")));
        }
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        let s = variance.sqrt();
        for i in 0..n {
            l[i * n + i] = Complex64::new(s, 0.0);
        }
        Ok(Self::from_lower(n, l, false))
    }

    fn from_lower(n: usize, l: Vec<Complex64>, jittered: bool) -> Self {
        let inv_diag = (0..n).map(|i| 1.0 / l[i * n + i].re).collect();
        Self {
            n,
            l,
            inv_diag,
            jittered,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Whether diagonal loading was needed.
    pub fn jittered(&self) -> bool {
        self.jittered
    }

    #[inline]
    fn row(&self, i: usize) -> &[Complex64] {
        &self.l[i * self.n..i * self.n + i + 1]
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, x: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let acc = dot(&row[..i], &x[..i]);
            x[i] = (x[i] - acc) * self.inv_diag[i];
        }
    }

    /// Solves `Lᴴ x = b` in place.
    pub fn solve_adjoint_in_place(&self, x: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in (0..self.n).rev() {
            x[i] *= self.inv_diag[i];
            let xi = x[i];
            let row = self.row(i);
            for (xk, lik) in x[..i].iter_mut().zip(&row[..i]) {
                *xk -= lik.conj() * xi;
            }
        }
    }

    /// `out = L w`.
    pub fn mul_lower(&self, w: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(w.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), &w[..=i]);
        }
    }

    /// `ln det A = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        self.inv_diag.iter().map(|d| -2.0 * d.ln()).sum()
    }

    pub fn lower(&self) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |i, j| {
            if j <= i {
                self.l[i * self.n + j]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// `L⁻¹ M`, column by column.
    pub fn solve_lower_matrix(&self, m: &CMatrix) -> CMatrix {
        let mut out = m.clone();
        let mut col = vec![Complex64::new(0.0, 0.0); self.n];
        for j in 0..m.ncols() {
            col.copy_from_slice(m.column(j).as_slice());
            self.solve_lower_in_place(&mut col);
            out.column_mut(j).copy_from_slice(&col);
        }
        out
    }
}

fn decompose(a: &CMatrix, shift: f64) -> Option<Vec<Complex64>> {
    let n = a.nrows();
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    let mut row_j = Vec::with_capacity(n);
    for j in 0..n {
        row_j.clear();
        row_j.extend_from_slice(&l[j * n..j * n + j]);
        let sq: f64 = row_j.iter().map(|v: &Complex64| v.norm_sqr()).sum();
        let d = a[(j, j)].re + shift - sq;
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[j * n + j] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let row_i = &mut l[i * n..i * n + j + 1];
            let acc = dot_conj(&row_i[..j], &row_j);
            row_i[j] = (a[(i, j)] - acc) / ljj;
        }
    }
    Some(l)
}

/// `Σ a_k b_k` with split real/imaginary accumulators.
#[inline]
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re - x.im * y.im;
        im += x.re * y.im + x.im * y.re;
    }
    Complex64::new(re, im)
}

/// `Σ a_k conj(b_k)`.
#[inline]
pub fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.im * y.re - x.re * y.im;
    }
    Complex64::new(re, im)
}

/// `max |M - Mᴴ|`.
pub fn hermitian_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + Mᴴ) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn trace_re(m: &CMatrix) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// Ascending eigenvalues of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Number of eigenvalues above `rel · λ_max`.
pub fn numerical_rank(m: &CMatrix, rel: f64) -> usize {
    let ev = hermitian_eigenvalues(m);
    let max = ev.last().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    ev.iter().filter(|&&v| v > rel * max).count()
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Maximum absolute column sum.
pub fn norm_one(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn real_matrix(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}
