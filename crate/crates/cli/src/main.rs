use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use densecoupling_cli::{run, Overrides};

/// Monte Carlo symbol error rates of coherent and noncoherent detectors on
/// densely spaced, mutually coupled receive arrays.
#[derive(Parser, Debug)]
#[command(name = "densecoupling", version)]
struct Cli {
    /// TOML file with the same keys as the long flags (snake_case)
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let resolved = (|| {
        let file = match &cli.config {
            Some(p) => Overrides::from_toml_file(p)?,
            None => Overrides::default(),
        };
        file.layered(cli.overrides.clone()).resolve()
    })();
    let cfg = match resolved {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };

    match run(&cfg) {
        Ok(summary) => {
            for r in &summary.result.rows {
                eprintln!(
                    "{} = {:>8}  {:<6} ser = {:.3e}  [{:.3e}, {:.3e}]",
                    summary.result.variable,
                    r.value,
                    r.detector.label(),
                    r.estimate.ser,
                    r.estimate.ci95_lo,
                    r.estimate.ci95_hi
                );
            }
            for f in &summary.result.failures {
                eprintln!("failed: {}", f.message);
            }
            eprintln!(
                "wrote {} rows to {} in {:.1} s",
                summary.metadata.rows,
                cfg.output_dir.display(),
                summary.metadata.wall_time_s
            );
            if summary.result.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
