//! SNR calibration, Monte Carlo SER estimation and parameter sweeps.
//!
//! Each trial draws a symbol, the scatterer gains `α` and a white noise
//! vector `w`, so that `h = T α`, `z = L_z w` and `y = h x + z`. Every
//! detector statistic is linear in `(α x, w)` once the detector's whitening
//! and projection are fixed, so a [`Link`] precomputes those maps once per
//! sweep point and a trial costs `O(N·L)` instead of `O(N²)`.
//!
//! Trial `t` of stream `s` at sweep index `i` always uses the generator
//! seeded by `stream_seed(seed, i, s, t)`. Trials are grouped in fixed-size
//! chunks and error counts are summed as integers, so the result does not
//! depend on how many workers run the chunks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingModel;
use crate::detect::{Constellation, Detector, DetectorKind, MismatchGain, Mode, NcProjector, Whitener};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Polar};
use crate::linalg::{dot_conj, trace_re, CMatrix, Cholesky};
use crate::multiport::{CircuitParams, MultiportChannel};
use crate::scene::{complex_gaussian, sample_scatterers, Scene};

/// Two-sided 95% standard normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Trials per parallel work unit.
pub const CHUNK: u64 = 1024;

/// Stream id reserved for scene sampling.
pub const SCENE_STREAM: u64 = u64::MAX;

/// `E|x|² = 10^(snr/10) tr(C_z) / tr(C_h)`.
pub fn calibrate_power(c_h: &CMatrix, c_z: &CMatrix, snr_db: f64) -> Result<f64> {
    let th = trace_re(c_h);
    let tz = trace_re(c_z);
    if !(th > 0.0) || !th.is_finite() {
        return Err(Error::Domain {
            function: "calibrate_power",
            value: th,
            expected: "tr(C_h) > 0",
        });
    }
    if !(tz > 0.0) || !tz.is_finite() {
        return Err(Error::Domain {
            function: "calibrate_power",
            value: tz,
            expected: "tr(C_z) > 0",
        });
    }
    Ok(10f64.powf(snr_db / 10.0) * tz / th)
}

/// Wilson score interval for `errors` out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerEstimate {
    pub errors: u64,
    pub trials: u64,
    pub ser: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
}

impl SerEstimate {
    pub fn new(errors: u64, trials: u64) -> Self {
        assert!(trials > 0 && errors <= trials, "{errors} errors in {trials} trials");
        let (lo, hi) = wilson_interval(errors, trials);
        let ser = errors as f64 / trials as f64;
        Self {
            errors,
            trials,
            ser,
            ci95_lo: lo.min(ser),
            ci95_hi: hi.max(ser),
        }
    }

    pub fn overlaps(&self, other: &SerEstimate) -> bool {
        self.ci95_lo <= other.ci95_hi && other.ci95_lo <= self.ci95_hi
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the generator for one trial.
pub fn stream_seed(seed: u64, sweep_index: u64, stream: u64, trial: u64) -> u64 {
    let mut h = splitmix(seed);
    for v in [sweep_index, stream, trial] {
        h = splitmix(h ^ v);
    }
    h
}

/// Identifies the random streams of one detector at one sweep point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub sweep_index: u64,
    pub stream: u64,
}

impl StreamKey {
    pub fn rng(&self, trial: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(stream_seed(self.seed, self.sweep_index, self.stream, trial))
    }
}

/// Everything that defines one sweep point.
#[derive(Clone, Debug)]
pub struct PointConfig {
    pub params: CircuitParams,
    pub geometry: ArrayGeometry,
    pub scene: Scene,
    pub order: usize,
    pub snr_db: f64,
    /// Coupling model of the physical array (Matched and Mismatched modes).
    pub coupling: CouplingModel,
    pub mm_gain: MismatchGain,
}

/// Channel statistics plus the linear maps from gains to `z_ART` and `h`.
#[derive(Clone, Debug)]
pub struct PointModel {
    pub channel: MultiportChannel,
    /// Scatterer powers `β_i`.
    pub powers: Vec<f64>,
    /// `j R_r A`, so that `z_ART = art_basis · α`.
    pub art_basis: CMatrix,
    /// `h = channel_basis · α`.
    pub channel_basis: CMatrix,
    /// Calibrated to the target SNR with this model's traces.
    pub constellation: Constellation,
}

impl PointModel {
    pub fn build(cfg: &PointConfig, model: CouplingModel) -> Result<Self> {
        let channel = MultiportChannel::build(&cfg.params, &cfg.geometry, &cfg.scene, model)?;
        let a = cfg.scene.response_matrix(&cfg.geometry)?;
        let art_basis = a * Complex64::new(0.0, cfg.params.radiation_resistance());
        let channel_basis = (&channel.q * &art_basis) * cfg.params.channel_scale();
        let power = calibrate_power(&channel.c_h, &channel.c_z, cfg.snr_db)?;
        let constellation = Constellation::new(cfg.order, power)?;
        Ok(Self {
            channel,
            powers: cfg.scene.scatterers.iter().map(|s| s.power).collect(),
            art_basis,
            channel_basis,
            constellation,
        })
    }
}

/// Random quantities of one trial.
#[derive(Clone, Debug, Default)]
pub struct Trial {
    pub symbol: usize,
    pub alpha: Vec<Complex64>,
    pub noise: Vec<Complex64>,
}

impl Trial {
    /// Draws symbol, then gains, then white noise, in that order.
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, order: usize, powers: &[f64], n: usize) {
        self.symbol = rng.random_range(0..order);
        self.alpha.clear();
        self.alpha.extend(powers.iter().map(|&b| complex_gaussian(rng, b)));
        self.noise.clear();
        self.noise.extend((0..n).map(|_| complex_gaussian(rng, 1.0)));
    }
}

#[derive(Clone, Debug)]
enum Statistic {
    /// `s = Re[αᴴ(G₁ α x + G₂ w)] / Re[αᴴ G₀ α]`.
    Mrc {
        gram: CMatrix,
        signal: CMatrix,
        noise: CMatrix,
    },
    /// `p = K₁ α x + K₂ w`, decided by the projector.
    Nc {
        projector: NcProjector,
        signal: CMatrix,
        noise: CMatrix,
    },
}

/// One detector wired to one point's true model.
#[derive(Clone, Debug)]
pub struct Link {
    statistic: Statistic,
    constellation: Constellation,
    powers: Vec<f64>,
    elements: usize,
}

impl Link {
    /// `mode` must be `Matched` or `Mismatched`; the uncoupled mode is a
    /// matched link on an uncoupled `truth`.
    pub fn build(truth: &PointModel, kind: DetectorKind, mode: Mode, mm_gain: MismatchGain) -> Result<Self> {
        let ch = &truth.channel;
        let n = ch.elements();
        let noise_factor = Cholesky::factor(&ch.c_z)?;
        let (whitener, h_model, c_h_model) = match mode {
            Mode::Matched | Mode::Uncoupled => (
                Whitener::Cholesky(noise_factor.clone()),
                truth.channel_basis.clone(),
                ch.c_h.clone(),
            ),
            Mode::Mismatched => {
                let f = ch.factors;
                let gain = match mm_gain {
                    MismatchGain::Complex => f.gain,
                    MismatchGain::Real => Complex64::new(f.gamma1.sqrt(), 0.0),
                };
                (
                    Whitener::isotropic(n, f.gamma2)?,
                    &truth.art_basis * gain,
                    &ch.c_art * Complex64::new(f.gamma1, 0.0),
                )
            }
        };
        let matched = mode != Mode::Mismatched;
        // W L_z, which is exactly I when the detector whitens with L_z itself
        let whitened_noise = (!matched).then(|| whitener.whiten_matrix(&noise_factor.lower()));
        let whitened_truth = whitener.whiten_matrix(&truth.channel_basis);

        let statistic = match kind {
            DetectorKind::Coherent => {
                let e = whitener.whiten_matrix(&h_model);
                let e_h = e.adjoint();
                Statistic::Mrc {
                    gram: &e_h * &e,
                    signal: &e_h * &whitened_truth,
                    noise: match &whitened_noise {
                        Some(wl) => &e_h * wl,
                        None => e_h,
                    },
                }
            }
            DetectorKind::Noncoherent => {
                let projector = NcProjector::build(&c_h_model, &whitener, &truth.constellation)?;
                let u_h = projector.eigenvectors().adjoint();
                Statistic::Nc {
                    signal: &u_h * &whitened_truth,
                    noise: match &whitened_noise {
                        Some(wl) => &u_h * wl,
                        None => u_h,
                    },
                    projector,
                }
            }
        };
        Ok(Self {
            statistic,
            constellation: truth.constellation.clone(),
            powers: truth.powers.clone(),
            elements: n,
        })
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn draw<R: Rng + ?Sized>(&self, trial: &mut Trial, rng: &mut R) {
        trial.draw(rng, self.constellation.order(), &self.powers, self.elements);
    }

    /// Detector decision for the observation generated by `trial`.
    pub fn decide(&self, trial: &Trial, buf: &mut Vec<Complex64>) -> usize {
        let x = Complex64::new(self.constellation.points()[trial.symbol], 0.0);
        let (signal, noise) = match &self.statistic {
            Statistic::Mrc { signal, noise, .. } | Statistic::Nc { signal, noise, .. } => (signal, noise),
        };
        buf.clear();
        buf.resize(signal.nrows(), Complex64::new(0.0, 0.0));
        affine(signal, &trial.alpha, x, noise, &trial.noise, buf);
        match &self.statistic {
            Statistic::Mrc { gram, .. } => {
                let num = dot_conj(buf, &trial.alpha).re;
                let den = quadratic(gram, &trial.alpha);
                if !(den > 0.0) {
                    // degenerate channel: s defaults to 0
                    return 0;
                }
                self.constellation.nearest(num / den)
            }
            Statistic::Nc { projector, .. } => projector.decide(buf),
        }
    }
}

/// `out = S α x + K w` with column-major `S`, `K`.
fn affine(s: &CMatrix, alpha: &[Complex64], x: Complex64, k: &CMatrix, w: &[Complex64], out: &mut [Complex64]) {
    for (j, a) in alpha.iter().enumerate() {
        let ax = a * x;
        for (o, v) in out.iter_mut().zip(s.column(j).iter()) {
            *o += v * ax;
        }
    }
    for (j, wj) in w.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(k.column(j).iter()) {
            *o += v * wj;
        }
    }
}

/// `Re[αᴴ G α]`.
fn quadratic(g: &DMatrix<Complex64>, alpha: &[Complex64]) -> f64 {
    let mut acc = 0.0;
    for (j, aj) in alpha.iter().enumerate() {
        let col: Complex64 = g.column(j).iter().zip(alpha).map(|(gij, ai)| ai.conj() * gij).sum();
        acc += (col * aj).re;
    }
    acc
}

/// Counts decision errors over `trials` trials of `link`.
pub fn count_errors(link: &Link, trials: u64, key: StreamKey) -> u64 {
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut trial = Trial::default();
            let mut buf = Vec::new();
            let mut errors = 0u64;
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = key.rng(t);
                link.draw(&mut trial, &mut rng);
                if link.decide(&trial, &mut buf) != trial.symbol {
                    errors += 1;
                }
            }
            errors
        })
        .sum()
}

fn truth_model(cfg: &PointConfig, mode: Mode) -> CouplingModel {
    match mode {
        Mode::Uncoupled => CouplingModel::Uncoupled,
        Mode::Matched | Mode::Mismatched => cfg.coupling,
    }
}

/// SER of one detector at one point. Runs on the current rayon pool.
pub fn estimate_ser(cfg: &PointConfig, detector: Detector, trials: u64, key: StreamKey) -> Result<SerEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    let truth = PointModel::build(cfg, truth_model(cfg, detector.mode))?;
    let link = Link::build(&truth, detector.kind, detector.mode, cfg.mm_gain)?;
    Ok(SerEstimate::new(count_errors(&link, trials, key), trials))
}

/// Fixed physical and scenario parameters shared by every sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: CircuitParams,
    pub wavelength: f64,
    /// User distance from the array origin, m.
    pub user_range: f64,
    /// User azimuth from broadside, degrees.
    pub user_azimuth_deg: f64,
    pub scatterers: usize,
    pub cluster_radius: f64,
    pub order: usize,
    pub snr_db: f64,
    pub coupling: CouplingModel,
    pub mm_gain: MismatchGain,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            params: CircuitParams::default(),
            wavelength: crate::geometry::wavelength_from_frequency(30e9),
            user_range: 25.0,
            user_azimuth_deg: -30.0,
            scatterers: 20,
            cluster_radius: 3.0,
            order: 4,
            snr_db: 5.0,
            coupling: CouplingModel::HalfWaveDipole,
            mm_gain: MismatchGain::Complex,
        }
    }
}

/// The swept variable and its grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sweep {
    /// Element spacing in wavelengths at fixed `N`.
    Spacing { elements: usize, spacings: Vec<f64> },
    /// Number of elements at fixed aperture (m).
    Count { aperture: f64, counts: Vec<usize> },
    /// User azimuth in degrees at fixed `N` and aperture.
    Azimuth { elements: usize, aperture: f64, azimuths_deg: Vec<f64> },
    /// One point at fixed `N` and aperture.
    Single { elements: usize, aperture: f64 },
}

impl Sweep {
    pub fn variable(&self) -> &'static str {
        match self {
            Self::Spacing { .. } => "spacing",
            Self::Count { .. } => "count",
            Self::Azimuth { .. } => "azimuth",
            Self::Single { .. } => "single",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Spacing { spacings, .. } => spacings.len(),
            Self::Count { counts, .. } => counts.len(),
            Self::Azimuth { azimuths_deg, .. } => azimuths_deg.len(),
            Self::Single { .. } => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value reported for grid index `i` (d/λ, N, degrees, or N).
    pub fn value(&self, i: usize) -> f64 {
        match self {
            Self::Spacing { spacings, .. } => spacings[i],
            Self::Count { counts, .. } => counts[i] as f64,
            Self::Azimuth { azimuths_deg, .. } => azimuths_deg[i],
            Self::Single { elements, .. } => *elements as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub sweep: Sweep,
    pub scenario: Scenario,
    pub detectors: Vec<Detector>,
    pub trials: u64,
    pub seed: u64,
    /// Seeds scene sampling; defaults to `seed`.
    pub scene_seed: Option<u64>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(Error::invalid("sweep", "grid is empty"));
        }
        if self.detectors.is_empty() {
            return Err(Error::invalid("detectors", "no detectors requested"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "need at least one trial"));
        }
        let s = &self.scenario;
        s.params.validate()?;
        if !(s.wavelength > 0.0) || !s.wavelength.is_finite() {
            return Err(Error::invalid("wavelength", format!("{} must be positive", s.wavelength)));
        }
        if !(s.user_range > 0.0) || !s.user_range.is_finite() {
            return Err(Error::invalid("user_range", format!("{} m must be positive", s.user_range)));
        }
        if !s.snr_db.is_finite() {
            return Err(Error::invalid("snr_db", "must be finite"));
        }
        if s.order < 2 {
            return Err(Error::invalid("order", format!("{}: need at least two symbols", s.order)));
        }
        if s.scatterers == 0 {
            return Err(Error::invalid("scatterers", "need at least one scatterer"));
        }
        if !(s.cluster_radius > 0.0) || !(s.cluster_radius < s.user_range) {
            return Err(Error::invalid(
                "cluster_radius",
                format!("{} m must be positive and below the user range", s.cluster_radius),
            ));
        }
        Ok(())
    }

    /// Configuration of grid point `i`, including its scene draw.
    pub fn point(&self, i: usize) -> Result<PointConfig> {
        let s = &self.scenario;
        let lam = s.wavelength;
        let (geometry, azimuth) = match &self.sweep {
            Sweep::Spacing { elements, spacings } => {
                (ArrayGeometry::new(*elements, spacings[i] * lam, lam)?, s.user_azimuth_deg)
            }
            Sweep::Count { aperture, counts } => {
                (ArrayGeometry::from_aperture(counts[i], *aperture, lam)?, s.user_azimuth_deg)
            }
            Sweep::Azimuth { elements, aperture, azimuths_deg } => {
                (ArrayGeometry::from_aperture(*elements, *aperture, lam)?, azimuths_deg[i])
            }
            Sweep::Single { elements, aperture } => {
                (ArrayGeometry::from_aperture(*elements, *aperture, lam)?, s.user_azimuth_deg)
            }
        };
        let key = StreamKey {
            seed: self.scene_seed.unwrap_or(self.seed),
            sweep_index: i as u64,
            stream: SCENE_STREAM,
        };
        let scene = sample_scatterers(
            Polar::from_degrees(s.user_range, azimuth),
            s.cluster_radius,
            s.scatterers,
            &mut key.rng(0),
        )?;
        Ok(PointConfig {
            params: s.params,
            geometry,
            scene,
            order: s.order,
            snr_db: s.snr_db,
            coupling: s.coupling,
            mm_gain: s.mm_gain,
        })
    }

    pub fn stream_key(&self, i: usize, detector: Detector) -> StreamKey {
        StreamKey {
            seed: self.seed,
            sweep_index: i as u64,
            stream: detector.id(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub value: f64,
    pub detector: Detector,
    pub estimate: SerEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub index: usize,
    pub value: f64,
    /// `None` when the point failed before any detector ran.
    pub detector: Option<Detector>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variable: String,
    pub rows: Vec<SweepPoint>,
    pub failures: Vec<PointFailure>,
}

/// Runs every grid point and detector. Failing points are recorded and the
/// sweep continues. `workers = None` uses rayon's default thread count.
pub fn run_sweep(spec: &ExperimentSpec, workers: Option<usize>) -> Result<SweepResult> {
    spec.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::numerical("thread_pool", e.to_string()))?;

    let variable = spec.sweep.variable();
    let mut result = SweepResult {
        variable: variable.to_owned(),
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for i in 0..spec.sweep.len() {
        let value = spec.sweep.value(i);
        let wrap = |e: Error| {
            Error::SweepPoint {
                index: i,
                variable,
                value,
                source: Box::new(e),
            }
            .to_string()
        };
        let cfg = match spec.point(i) {
            Ok(c) => c,
            Err(e) => {
                result.failures.push(PointFailure { index: i, value, detector: None, message: wrap(e) });
                continue;
            }
        };
        let mut models: Vec<(CouplingModel, Result<PointModel, String>)> = Vec::new();
        for &detector in &spec.detectors {
            let model = truth_model(&cfg, detector.mode);
            if !models.iter().any(|(m, _)| *m == model) {
                let built = pool.install(|| PointModel::build(&cfg, model)).map_err(wrap);
                models.push((model, built));
            }
            let truth = match &models.iter().find(|(m, _)| *m == model).expect("just inserted").1 {
                Ok(t) => t,
                Err(msg) => {
                    result.failures.push(PointFailure { index: i, value, detector: Some(detector), message: msg.clone() });
                    continue;
                }
            };
            let link = match Link::build(truth, detector.kind, detector.mode, cfg.mm_gain) {
                Ok(l) => l,
                Err(e) => {
                    result.failures.push(PointFailure { index: i, value, detector: Some(detector), message: wrap(e) });
                    continue;
                }
            };
            let key = spec.stream_key(i, detector);
            let errors = pool.install(|| count_errors(&link, spec.trials, key));
            result.rows.push(SweepPoint {
                index: i,
                value,
                detector,
                estimate: SerEstimate::new(errors, spec.trials),
            });
        }
    }
    Ok(result)
}
