use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use spa_cli::config::ExperimentConfig;
use spa_cli::{plot, sweep, verify};
use spa_core::synth::{dna_like, DnaLikeConfig};

#[derive(Parser)]
#[command(name = "spa", version, about = "Nyström kernel machines: GSA / LLA / NCR sweeps and error analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a landmark-ratio sweep described by a key = value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// `key=value`, applied after the file; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print one line per finished trial to stderr.
        #[arg(long)]
        progress: bool,
    },
    /// Turn a trials CSV into per-(dataset, strategy) plot tables.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the property suites on synthetic data.
    Verify {
        #[arg(long, default_value_t = 12)]
        instances: u64,
    },
    /// Write the synthetic splice-junction-like dataset in sparse text format.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3125)]
        n: usize,
        #[arg(long, default_value_t = 2021)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            overrides,
            progress,
        } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let out = sweep::run_sweep(&cfg, progress)?;
            let paths = sweep::write_outputs(&cfg, &out)?;
            println!(
                "{} trials, {} rows -> {}",
                out.trials,
                out.rows.len(),
                paths.trials.display()
            );
            println!("aggregates -> {}", paths.aggregates.display());
            println!("manifest   -> {}", paths.manifest.display());
            if out.bound_violations > 0 {
                eprintln!("warning: {} trials violate the LLA error bound", out.bound_violations);
            }
            if out.clamped > 0 {
                eprintln!("warning: {} squared errors fell below -1e-8 before clamping", out.clamped);
            }
            Ok(true)
        }
        Command::Plot { input, out } => {
            let (written, warnings) = plot::emit_plot_data(&input, &out)?;
            for w in &warnings {
                eprintln!("{w}");
            }
            for p in &written {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::Verify { instances } => {
            let checks = verify::run_checks(instances)?;
            let mut ok = true;
            for c in &checks {
                println!("[{}] {} - {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            println!("{}/{} checks passed", checks.iter().filter(|c| c.passed).count(), checks.len());
            Ok(ok)
        }
        Command::Synth { out, n, seed } => {
            let ds = dna_like(&DnaLikeConfig {
                n,
                seed,
                ..DnaLikeConfig::default()
            })?;
            std::fs::write(&out, ds.to_svmlight()).with_context(|| format!("writing {}", out.display()))?;
            println!("{} points, {} features -> {}", ds.len(), ds.dim, out.display());
            Ok(true)
        }
    }
}
