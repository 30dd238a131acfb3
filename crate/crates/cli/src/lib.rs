//! Command-line front end: configuration, sweep execution and result files.

pub mod config;
pub mod output;

use std::fs::File;
use std::io::BufWriter;
use std::time::Instant;

use anyhow::Context;
use densecoupling_core::linalg::jitter_events;
use densecoupling_core::mc::{run_sweep, SweepResult};

pub use config::{Experiment, Overrides, RunConfig};

pub struct RunSummary {
    pub result: SweepResult,
    pub metadata: output::RunMetadata,
}

/// Runs the configured sweep and writes every output file.
pub fn run(cfg: &RunConfig) -> anyhow::Result<RunSummary> {
    let dir = &cfg.output_dir;
    output::probe_writable(dir)?;
    if cfg.emit_coupling_curve {
        let path = dir.join("coupling.csv");
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        output::write_coupling_curve(BufWriter::new(f))?;
    }

    let jitter_before = jitter_events();
    let start = Instant::now();
    let result = run_sweep(&cfg.spec(), cfg.workers).map_err(|e| anyhow::anyhow!("{e}"))?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let path = dir.join("results.csv");
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    output::write_results(&result, BufWriter::new(f))?;

    let metadata = output::RunMetadata {
        version: env!("CARGO_PKG_VERSION").to_owned(),
        git_describe: output::git_describe(),
        config: cfg.clone(),
        seed: cfg.seed,
        scene_seed: cfg.scene_seed.unwrap_or(cfg.seed),
        wall_time_s,
        jitter_events: jitter_events() - jitter_before,
        rows: result.rows.len(),
        failures: result.failures.clone(),
    };
    output::write_json(&metadata, &dir.join("run.json"))?;
    Ok(RunSummary { result, metadata })
}
