use std::fs;
use std::path::Path;
use std::process::Command;

use densecoupling_cli::config::{CouplingArg, Experiment, GainArg, Overrides};
use densecoupling_cli::output::{format_sig9, read_results, RunMetadata, RESULTS_HEADER};

fn small(dir: &Path) -> Overrides {
    Overrides {
        elements: Some(8),
        trials: Some(400),
        output_dir: Some(dir.to_path_buf()),
        ..Overrides::default()
    }
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_densecoupling"));
    c.env_remove("DENSECOUPLING_WORKERS");
    c
}

#[test]
fn azimuth_run_writes_sixty_rows_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path()).resolve().unwrap();
    let summary = densecoupling_cli::run(&cfg).unwrap();

    let rows = read_results(&dir.path().join("results.csv")).unwrap();
    assert_eq!(rows.len(), 60);
    assert!(rows.iter().all(|r| r.sweep_var == "azimuth" && r.trials == 400));
    let labels: Vec<String> = rows[..6].iter().map(|r| format!("{}-{}", r.detector, r.mode)).collect();
    assert_eq!(labels, ["NC-M", "C-M", "NC-MM", "C-MM", "NC-U", "C-U"]);

    let meta: RunMetadata = serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(meta.config, cfg);
    assert_eq!(meta.rows, 60);
    assert_eq!(meta.seed, 42);
    assert_eq!(meta.scene_seed, 42);
    assert!(meta.failures.is_empty());
    assert!(!meta.version.is_empty() && !meta.git_describe.is_empty());
    assert_eq!(summary.result.rows.len(), 60);
}

#[test]
fn csv_round_trips_at_nine_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Overrides {
        experiment: Some(Experiment::Spacing),
        grid: Some("0.05,0.15,0.3".into()),
        ..small(dir.path())
    }
    .resolve()
    .unwrap();
    let summary = densecoupling_cli::run(&cfg).unwrap();
    let rows = read_results(&dir.path().join("results.csv")).unwrap();
    assert_eq!(rows.len(), summary.result.rows.len());
    let sig9 = |v: f64| format_sig9(v).parse::<f64>().unwrap().to_bits();
    for (r, s) in rows.iter().zip(&summary.result.rows) {
        let e = &s.estimate;
        assert_eq!(r.sweep_value.to_bits(), sig9(s.value));
        assert_eq!(r.ser.to_bits(), sig9(e.ser));
        assert_eq!(r.ci95_lo.to_bits(), sig9(e.ci95_lo));
        assert_eq!(r.ci95_hi.to_bits(), sig9(e.ci95_hi));
        assert_eq!((r.errors, r.trials), (e.errors, e.trials));
        assert_eq!(r.detector, s.detector.kind.label());
        assert_eq!(r.mode, s.detector.mode.label());
    }
    let text = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER.join(","));
}

#[test]
fn every_option_reaches_the_metadata() {
    let base = Overrides::default().resolve().unwrap();
    let perturbed: Vec<(&str, Overrides)> = vec![
        ("experiment", Overrides { experiment: Some(Experiment::Spacing), ..Default::default() }),
        ("frequency_hz", Overrides { frequency_hz: Some(28e9), ..Default::default() }),
        ("bandwidth_hz", Overrides { bandwidth_hz: Some(2e6), ..Default::default() }),
        ("zg", Overrides { zg: Some("50+0j".into()), ..Default::default() }),
        ("zl", Overrides { zl: Some("100+0j".into()), ..Default::default() }),
        ("za", Overrides { za: Some("70+40j".into()), ..Default::default() }),
        ("temperature_k", Overrides { temperature_k: Some(300.0), ..Default::default() }),
        ("rn", Overrides { rn: Some(10.0), ..Default::default() }),
        ("rho", Overrides { rho: Some("0.1+0.1j".into()), ..Default::default() }),
        ("sigma_i2", Overrides { sigma_i2: Some(1e-20), ..Default::default() }),
        ("normalization", Overrides { normalization: Some(4.0), ..Default::default() }),
        ("range_m", Overrides { range_m: Some(30.0), ..Default::default() }),
        ("azimuth_deg", Overrides { azimuth_deg: Some(10.0), ..Default::default() }),
        ("scatterers", Overrides { scatterers: Some(5), ..Default::default() }),
        ("cluster_radius_m", Overrides { cluster_radius_m: Some(2.0), ..Default::default() }),
        ("order", Overrides { order: Some(8), ..Default::default() }),
        ("snr_db", Overrides { snr_db: Some(0.0), ..Default::default() }),
        ("elements", Overrides { elements: Some(64), ..Default::default() }),
        ("aperture", Overrides { aperture: Some("0.3".into()), ..Default::default() }),
        ("grid", Overrides { grid: Some("0,45".into()), ..Default::default() }),
        ("trials", Overrides { trials: Some(10), ..Default::default() }),
        ("seed", Overrides { seed: Some(7), ..Default::default() }),
        ("scene_seed", Overrides { scene_seed: Some(9), ..Default::default() }),
        ("detectors", Overrides { detectors: Some("C-M".into()), ..Default::default() }),
        ("mm_gain", Overrides { mm_gain: Some(GainArg::Real), ..Default::default() }),
        ("coupling", Overrides { coupling: Some(CouplingArg::None), ..Default::default() }),
        ("output_dir", Overrides { output_dir: Some("elsewhere".into()), ..Default::default() }),
        ("emit_coupling_curve", Overrides { emit_coupling_curve: Some(true), ..Default::default() }),
        ("workers", Overrides { workers: Some(2), ..Default::default() }),
    ];
    let base_json = serde_json::to_value(&base).unwrap();
    for (name, o) in perturbed {
        let cfg = o.resolve().unwrap_or_else(|e| panic!("{name}: {e:#}"));
        assert_ne!(serde_json::to_value(&cfg).unwrap(), base_json, "{name} does not reach run.json");
    }
}

#[test]
fn coupling_curve_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Overrides {
        experiment: Some(Experiment::Single),
        detectors: Some("C-M".into()),
        emit_coupling_curve: Some(true),
        ..small(dir.path())
    }
    .resolve()
    .unwrap();
    densecoupling_cli::run(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("coupling.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "d_over_lambda,normalized_re_z");
    assert_eq!(text.lines().count(), 301);
}

#[test]
fn rejects_correlation_above_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--rho", "2+0j", "--output-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rho"));
    assert!(!dir.path().join("results.csv").exists());
}

#[test]
fn unwritable_output_fails_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"").unwrap();
    // A billion trials would take hours if the sweep started.
    let out = bin()
        .args(["--trials", "1000000000", "--output-dir"])
        .arg(blocker.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("output directory"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let toml = dir.path().join("run.toml");
    fs::write(
        &toml,
        "experiment = \"single\"\nelements = 4\ntrials = 200\nseed = 5\ndetectors = \"C-M,NC-M\"\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("--config")
        .arg(&toml)
        .args(["--seed", "11", "--output-dir"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta: RunMetadata = serde_json::from_str(&fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(meta.seed, 11);
    assert_eq!(meta.config.trials, 200);
    assert_eq!(meta.rows, 2);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let toml = dir.path().join("run.toml");
    fs::write(&toml, "trails = 10\n").unwrap();
    let out = bin().arg("--config").arg(&toml).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
