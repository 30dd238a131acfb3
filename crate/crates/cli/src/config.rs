//! Run configuration: built-in defaults, then a TOML file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use clap::{Args, ValueEnum};
use densecoupling_core::geometry::wavelength_from_frequency;
use densecoupling_core::mc::{Scenario, Sweep};
use densecoupling_core::multiport::default_current_noise_variance;
use densecoupling_core::{CircuitParams, Complex64, CouplingModel, Detector, ExperimentSpec, MismatchGain};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 42;
pub const WORKERS_ENV: &str = "DENSECOUPLING_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// SER vs user azimuth at fixed N and aperture.
    Azimuth,
    /// SER vs element spacing at fixed N.
    Spacing,
    /// SER vs N at fixed aperture.
    Count,
    /// One point at fixed N and aperture.
    Single,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CouplingArg {
    Dipole,
    None,
}

impl From<CouplingArg> for CouplingModel {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::Dipole => CouplingModel::HalfWaveDipole,
            CouplingArg::None => CouplingModel::Uncoupled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GainArg {
    Complex,
    Real,
}

impl From<GainArg> for MismatchGain {
    fn from(g: GainArg) -> Self {
        match g {
            GainArg::Complex => MismatchGain::Complex,
            GainArg::Real => MismatchGain::Real,
        }
    }
}

/// Every user-settable value. Unset fields fall through to the next layer.
///
/// Complex impedances are written `a+bj`. Lengths are meters unless they
/// end in `lam` (multiples of the wavelength). Grids are `start:step:stop`
/// or a comma-separated list; spacing grids are in wavelengths.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Experiment to run
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,

    /// Carrier frequency, Hz
    #[arg(long)]
    pub frequency_hz: Option<f64>,
    /// Noise bandwidth B_W, Hz
    #[arg(long)]
    pub bandwidth_hz: Option<f64>,
    /// Generator impedance Z_G, Ω
    #[arg(long)]
    pub zg: Option<String>,
    /// Load impedance Z_L, Ω
    #[arg(long)]
    pub zl: Option<String>,
    /// Antenna self-impedance Z_A (also used for the transmitter), Ω
    #[arg(long)]
    pub za: Option<String>,
    /// Antenna temperature T_A, K
    #[arg(long)]
    pub temperature_k: Option<f64>,
    /// LNA noise resistance R_N, Ω
    #[arg(long)]
    pub rn: Option<f64>,
    /// LNA noise correlation ρ, |ρ| ≤ 1
    #[arg(long)]
    pub rho: Option<String>,
    /// LNA current noise variance σ_i², A² [default: 2 k_B B_W T_A / R_N]
    #[arg(long)]
    pub sigma_i2: Option<f64>,
    /// Normalization constant c, V²
    #[arg(long)]
    pub normalization: Option<f64>,

    /// User range r, m
    #[arg(long)]
    pub range_m: Option<f64>,
    /// User azimuth from broadside, degrees
    #[arg(long, allow_negative_numbers = true)]
    pub azimuth_deg: Option<f64>,
    /// Number of scatterers L
    #[arg(long)]
    pub scatterers: Option<usize>,
    /// Scatterer cluster radius r_c, m
    #[arg(long)]
    pub cluster_radius_m: Option<f64>,
    /// PAM order M
    #[arg(long)]
    pub order: Option<usize>,
    /// Target average SNR, dB
    #[arg(long, allow_negative_numbers = true)]
    pub snr_db: Option<f64>,

    /// Number of antennas N (azimuth, spacing, single)
    #[arg(long)]
    pub elements: Option<usize>,
    /// Array aperture D (azimuth, count, single), meters or `<x>lam`
    #[arg(long)]
    pub aperture: Option<String>,
    /// Sweep grid, `start:step:stop` or `a,b,c`
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,

    /// Monte Carlo trials per point and detector
    #[arg(long)]
    pub trials: Option<u64>,
    /// Master seed for symbols, gains and noise
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed for scatterer placement [default: --seed]
    #[arg(long)]
    pub scene_seed: Option<u64>,
    /// Detectors, comma-separated from NC-M, C-M, NC-MM, C-MM, NC-U, C-U
    #[arg(long)]
    pub detectors: Option<String>,
    /// Gain assumed by the mismatched coherent detector
    #[arg(long, value_enum)]
    pub mm_gain: Option<GainArg>,
    /// Coupling model of the physical array
    #[arg(long, value_enum)]
    pub coupling: Option<CouplingArg>,

    /// Output directory
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Also write coupling.csv (normalized mutual resistance vs d/λ)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub emit_coupling_curve: Option<bool>,
    /// Worker threads [default: all cores]
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
}

macro_rules! layer {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        Overrides { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Overrides {
    /// Values in `top` win over `self`.
    pub fn layered(self, top: Overrides) -> Overrides {
        let base = self;
        layer!(base, top;
            experiment, frequency_hz, bandwidth_hz, zg, zl, za, temperature_k, rn, rho,
            sigma_i2, normalization, range_m, azimuth_deg, scatterers, cluster_radius_m,
            order, snr_db, elements, aperture, grid, trials, seed, scene_seed, detectors,
            mm_gain, coupling, output_dir, emit_coupling_curve, workers,
        )
    }

    pub fn from_toml_file(path: &Path) -> anyhow::Result<Overrides> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }
}

/// Fully resolved configuration, echoed into `run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub frequency_hz: f64,
    pub scenario: Scenario,
    pub sweep: Sweep,
    pub detectors: Vec<Detector>,
    pub trials: u64,
    pub seed: u64,
    pub scene_seed: Option<u64>,
    pub output_dir: PathBuf,
    pub emit_coupling_curve: bool,
    /// Only affects speed, never results.
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            sweep: self.sweep.clone(),
            scenario: self.scenario.clone(),
            detectors: self.detectors.clone(),
            trials: self.trials,
            seed: self.seed,
            scene_seed: self.scene_seed,
        }
    }
}

fn parse_complex(field: &str, s: &str) -> anyhow::Result<Complex64> {
    let v: Complex64 = s
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{field}: cannot parse {s:?} as a complex number like 186-31.6j"))?;
    ensure!(v.re.is_finite() && v.im.is_finite(), "{field}: {s:?} is not finite");
    Ok(v)
}

/// Meters, or a multiple of `wavelength` with a `lam` suffix.
pub fn parse_length(field: &str, s: &str, wavelength: f64) -> anyhow::Result<f64> {
    let t = s.trim();
    let (num, scale) = match t.strip_suffix("lam") {
        Some(n) => (n, wavelength),
        None => (t.strip_suffix('m').unwrap_or(t), 1.0),
    };
    let v: f64 = num
        .trim()
        .parse()
        .with_context(|| format!("{field}: cannot parse {s:?} as a length (meters or <x>lam)"))?;
    ensure!(v > 0.0 && v.is_finite(), "{field}: {s:?} must be a positive length");
    Ok(v * scale)
}

/// `start:step:stop` (inclusive, tolerant to rounding) or a comma list.
pub fn parse_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let t = s.trim();
    let parts: Vec<&str> = t.split(':').collect();
    let values = if parts.len() == 3 {
        let p = |x: &str| x.trim().parse::<f64>().with_context(|| format!("grid: bad number {x:?}"));
        let (start, step, stop) = (p(parts[0])?, p(parts[1])?, p(parts[2])?);
        ensure!(step > 0.0 && step.is_finite(), "grid: step must be positive in {s:?}");
        ensure!(stop >= start, "grid: stop below start in {s:?}");
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| start + i as f64 * step).collect()
    } else if parts.len() == 1 {
        t.split(',')
            .map(|x| x.trim().parse::<f64>().with_context(|| format!("grid: bad number {x:?}")))
            .collect::<anyhow::Result<Vec<_>>>()?
    } else {
        bail!("grid: expected start:step:stop or a comma list, got {s:?}");
    };
    ensure!(!values.is_empty(), "grid: empty");
    ensure!(values.iter().all(|v| v.is_finite()), "grid: non-finite value in {s:?}");
    Ok(values)
}

pub fn parse_detectors(s: &str) -> anyhow::Result<Vec<Detector>> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let d: Detector = part.parse()?;
        if !out.contains(&d) {
            out.push(d);
        }
    }
    ensure!(!out.is_empty(), "detectors: none given");
    Ok(out)
}

fn positive(field: &str, v: f64) -> anyhow::Result<f64> {
    ensure!(v > 0.0 && v.is_finite(), "{field}: {v} must be positive and finite");
    Ok(v)
}

impl Overrides {
    /// Applies defaults to the unset fields and validates the result.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let experiment = self.experiment.unwrap_or(Experiment::Azimuth);
        let frequency_hz = positive("frequency_hz", self.frequency_hz.unwrap_or(30e9))?;
        let wavelength = wavelength_from_frequency(frequency_hz);

        let d = CircuitParams::default();
        let bandwidth = positive("bandwidth_hz", self.bandwidth_hz.unwrap_or(d.bandwidth))?;
        let temperature = positive("temperature_k", self.temperature_k.unwrap_or(d.antenna_temperature))?;
        let rn = positive("rn", self.rn.unwrap_or(d.noise_resistance))?;
        let za = match &self.za {
            Some(s) => parse_complex("za", s)?,
            None => d.rx_self_impedance,
        };
        let rho = match &self.rho {
            Some(s) => parse_complex("rho", s)?,
            None => d.noise_correlation,
        };
        ensure!(rho.norm() <= 1.0, "rho: |ρ| = {} must be at most 1", rho.norm());
        let params = CircuitParams {
            generator_impedance: match &self.zg {
                Some(s) => parse_complex("zg", s)?,
                None => d.generator_impedance,
            },
            load_impedance: match &self.zl {
                Some(s) => parse_complex("zl", s)?,
                None => d.load_impedance,
            },
            tx_antenna_impedance: za,
            rx_self_impedance: za,
            noise_resistance: rn,
            noise_correlation: rho,
            antenna_temperature: temperature,
            bandwidth,
            current_noise_variance: positive(
                "sigma_i2",
                self.sigma_i2.unwrap_or_else(|| default_current_noise_variance(bandwidth, temperature, rn)),
            )?,
            normalization: positive("normalization", self.normalization.unwrap_or(1.0))?,
        };
        params.validate().map_err(|e| anyhow::anyhow!("{e}"))?;

        let sd = Scenario::default();
        let scenario = Scenario {
            params,
            wavelength,
            user_range: positive("range_m", self.range_m.unwrap_or(sd.user_range))?,
            user_azimuth_deg: self.azimuth_deg.unwrap_or(sd.user_azimuth_deg),
            scatterers: self.scatterers.unwrap_or(sd.scatterers),
            cluster_radius: positive("cluster_radius_m", self.cluster_radius_m.unwrap_or(sd.cluster_radius))?,
            order: self.order.unwrap_or(sd.order),
            snr_db: self.snr_db.unwrap_or(sd.snr_db),
            coupling: self.coupling.map(Into::into).unwrap_or(sd.coupling),
            mm_gain: self.mm_gain.map(Into::into).unwrap_or(sd.mm_gain),
        };

        let elements = self.elements.unwrap_or(128);
        let aperture = match &self.aperture {
            Some(s) => parse_length("aperture", s, wavelength)?,
            None => 0.5,
        };
        let grid = self.grid.as_deref().map(parse_grid).transpose()?;
        let sweep = match experiment {
            Experiment::Azimuth => Sweep::Azimuth {
                elements,
                aperture,
                azimuths_deg: grid.unwrap_or_else(|| (0..10).map(|i| 10.0 * i as f64).collect()),
            },
            Experiment::Spacing => {
                let spacings = grid.unwrap_or_else(|| (1..=20).map(|i| 0.05 * i as f64).collect());
                ensure!(spacings.iter().all(|&s| s > 0.0), "grid: spacings (in wavelengths) must be positive");
                Sweep::Spacing { elements, spacings }
            }
            Experiment::Count => {
                let counts = match grid {
                    Some(g) => g
                        .iter()
                        .map(|&v| {
                            ensure!(v >= 2.0 && v.fract() == 0.0, "grid: element counts must be integers ≥ 2, got {v}");
                            Ok(v as usize)
                        })
                        .collect::<anyhow::Result<Vec<_>>>()?,
                    None => vec![16, 32, 64, 128, 256],
                };
                Sweep::Count { aperture, counts }
            }
            Experiment::Single => Sweep::Single { elements, aperture },
        };

        let detectors = match &self.detectors {
            Some(s) => parse_detectors(s)?,
            None => Detector::ALL.to_vec(),
        };
        let trials = self.trials.unwrap_or(DEFAULT_TRIALS);
        ensure!(trials >= 1, "trials: must be at least 1");
        if let Some(w) = self.workers {
            ensure!(w >= 1, "workers: must be at least 1");
        }

        let cfg = RunConfig {
            experiment,
            frequency_hz,
            scenario,
            sweep,
            detectors,
            trials,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            scene_seed: self.scene_seed,
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            emit_coupling_curve: self.emit_coupling_curve.unwrap_or(false),
            workers: self.workers,
        };
        cfg.spec().validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(cfg)
    }
}
