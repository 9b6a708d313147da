//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::harness::{self, ExperimentPlan, Stage};
use crate::scenario::load_config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Largest fraction of failed trials a run may have and still succeed.
pub const MAX_FLAGGED_FRACTION: f64 = 0.10;

#[derive(Debug, Parser)]
#[command(name = "ris-isac", version, about = "Secure ISAC with legitimate and malicious UAV-mounted RIS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Full,
    Sensing,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a preset and write results.csv, aggregates.csv and manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        preset: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// `sensing` skips the phase design; sensing SINR and CRB are unchanged.
        #[arg(long, value_enum, default_value = "full")]
        stage: StageArg,
    },
    /// Check a configuration file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the built-in presets.
    Presets,
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
                return EXIT_OK;
            }
            let _ = write!(err, "{text}");
            return EXIT_USAGE;
        }
    };
    match cli.command {
        Command::Presets => {
            for p in harness::presets() {
                let _ = writeln!(out, "{:<8} {}", p.name, p.description);
            }
            EXIT_OK
        }
        Command::Validate { config } => match load_config(&config) {
            Ok(cfg) => {
                let _ = writeln!(
                    out,
                    "{}: ok (T_x = {}, K = {}, N_L = {}, N_M = {}, P_T = {:.2} dBW)",
                    config.display(),
                    cfg.tx_antennas,
                    cfg.num_users,
                    cfg.n_legit(),
                    cfg.n_malicious(),
                    cfg.total_power_dbw()
                );
                EXIT_OK
            }
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_RUNTIME
            }
        },
        Command::Run {
            config,
            preset,
            trials,
            seed,
            out: dir,
            stage,
        } => {
            let Some(p) = harness::preset(&preset) else {
                let _ = writeln!(
                    err,
                    "error: unknown preset `{preset}`; available presets: {}",
                    harness::preset_names().join(", ")
                );
                return EXIT_USAGE;
            };
            if trials == Some(0) {
                let _ = writeln!(err, "error: --trials must be at least 1");
                return EXIT_USAGE;
            }
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_RUNTIME;
                }
            };
            let mut plan = ExperimentPlan::from_preset(&p, &cfg, trials, seed);
            plan.out_dir = Some(dir.clone());
            let stage = match stage {
                StageArg::Full => Stage::Full,
                StageArg::Sensing => Stage::Sensing,
            };
            let started = Instant::now();
            let result = match harness::run_experiment(&plan, &cfg, stage) {
                Ok(r) => r,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_RUNTIME;
                }
            };
            let manifest = match harness::write_outputs(&dir, &plan, &cfg, &result, started.elapsed().as_secs_f64()) {
                Ok(m) => m,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_RUNTIME;
                }
            };
            let _ = writeln!(
                out,
                "{} rows ({} flagged) written to {}; content hash {}",
                manifest.rows,
                manifest.flagged,
                dir.display(),
                manifest.content_hash
            );
            if result.flagged_fraction() > MAX_FLAGGED_FRACTION {
                let _ = writeln!(
                    err,
                    "error: {:.1}% of trials failed",
                    100.0 * result.flagged_fraction()
                );
                return EXIT_RUNTIME;
            }
            EXIT_OK
        }
    }
}
