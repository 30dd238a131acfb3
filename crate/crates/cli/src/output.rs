//! `results.csv`, `run.json` and `coupling.csv`.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use densecoupling_core::coupling::normalized_coupling;
use densecoupling_core::geometry::FREE_SPACE_IMPEDANCE;
use densecoupling_core::mc::{PointFailure, SweepResult};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const RESULTS_HEADER: [&str; 9] = [
    "sweep_var",
    "sweep_value",
    "detector",
    "mode",
    "ser",
    "errors",
    "trials",
    "ci95_lo",
    "ci95_hi",
];

/// `v` rounded to 9 significant digits, printed in shortest round-trip form.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_var: String,
    pub sweep_value: f64,
    pub detector: String,
    pub mode: String,
    pub ser: f64,
    pub errors: u64,
    pub trials: u64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
}

pub fn write_results<W: Write>(result: &SweepResult, out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in &result.rows {
        let e = &r.estimate;
        w.write_record([
            result.variable.clone(),
            format_sig9(r.value),
            r.detector.kind.label().to_owned(),
            r.detector.mode.label().to_owned(),
            format_sig9(e.ser),
            e.errors.to_string(),
            e.trials.to_string(),
            format_sig9(e.ci95_lo),
            format_sig9(e.ci95_hi),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> anyhow::Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    anyhow::ensure!(header == RESULTS_HEADER, "unexpected header {header:?}");
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub git_describe: String,
    pub config: RunConfig,
    pub seed: u64,
    pub scene_seed: u64,
    pub wall_time_s: f64,
    pub jitter_events: u64,
    pub rows: usize,
    pub failures: Vec<PointFailure>,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// `git describe` of the source tree, or `unknown`.
pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_owned())
}

/// Normalized mutual resistance for `d/λ` = 0.01, 0.02, ..., 3.
pub fn write_coupling_curve<W: Write>(out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d_over_lambda", "normalized_re_z"])?;
    for i in 1..=300 {
        let dl = i as f64 / 100.0;
        let v = normalized_coupling(dl, FREE_SPACE_IMPEDANCE)?;
        w.write_record([format_sig9(dl), format_sig9(v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Creates `dir` and checks that a file can be written into it.
pub fn probe_writable(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", dir.display()))?;
    fs::remove_file(&probe).ok();
    Ok(())
}
