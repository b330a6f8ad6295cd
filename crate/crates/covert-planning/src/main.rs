//! Thin CLI over the library: train, evaluate, cross-eval, verify.
//!
//! Exit codes: 0 success, 1 validation/config error, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use covert_planning::config::{load_json, preset, preset_names, ExperimentConfig};
use covert_planning::harness::{cmd_cross_eval, cmd_evaluate, cmd_train};
use covert_planning::verify::verify_suite;
use covert_planning::Error;

#[derive(Parser)]
#[command(name = "covert-planning", version, about = "Covert planning in finite MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment config file (JSON).
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Seed override.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<(ExperimentConfig, Option<String>, PathBuf), Error> {
        let (mut config, name, base) = match (&self.config, &self.preset) {
            (Some(path), None) => {
                let config: ExperimentConfig = load_json(path)?;
                let base = path
                    .parent()
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."));
                (config, None, base)
            }
            (None, Some(name)) => (preset(name)?, Some(name.clone()), PathBuf::from(".")),
            (None, None) => {
                return Err(Error::InvalidConfig(format!(
                    "pass --preset NAME or --config PATH (presets: {})",
                    preset_names().join(", ")
                )))
            }
            (Some(_), Some(_)) => unreachable!("clap rejects --config with --preset"),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok((config, name, base))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a covert policy; writes trace.csv and policy.json.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate a trained policy: value and detection probability.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Policy file produced by `train`.
        #[arg(long, value_name = "PATH")]
        policy: PathBuf,
        /// Number of evaluation trajectories.
        #[arg(long, value_name = "N", default_value_t = 10_000)]
        samples: usize,
        /// Evaluate under a different slip β than the config's.
        #[arg(long, value_name = "B")]
        slip_beta: Option<f64>,
    },
    /// Evaluate several policies across several slip β values.
    CrossEval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Policy files (repeatable).
        #[arg(long = "policy", value_name = "PATH", required = true)]
        policies: Vec<PathBuf>,
        /// Slip β values to evaluate under.
        #[arg(
            long,
            value_name = "B",
            value_delimiter = ',',
            default_value = "0.05,0.1,0.15"
        )]
        betas: Vec<f64>,
        #[arg(long, value_name = "N", default_value_t = 10_000)]
        samples: usize,
        /// Output directory for cross_eval.csv.
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Run a verification suite: oracle, gradients, theorem1, or all.
    Verify {
        /// Suite name.
        suite: String,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train { config, out } => {
            let (config, name, base) = config.load()?;
            let summary = cmd_train(&config, &base, &out, name.as_deref())?;
            println!(
                "finished after {} iterations ({})",
                summary.iterations,
                if summary.converged {
                    "|ΔL| below threshold"
                } else {
                    "iteration cap"
                }
            );
            println!(
                "final trace row: value {:.4}, detection {:.4}, lagrangian {:.4}",
                summary.final_row.value, summary.final_row.detection, summary.final_row.lagrangian
            );
            println!(
                "fresh evaluation: value {:.4} ± {:.4}, detection {:.4} ± {:.4}, lambda {:.4}",
                summary.eval.value_mean,
                summary.eval.value_se,
                summary.eval.detection_mean,
                summary.eval.detection_se,
                summary.final_lambda
            );
            println!("wrote {}", summary.trace_path.display());
            println!("wrote {}", summary.policy_path.display());
            Ok(())
        }
        Command::Evaluate {
            config,
            policy,
            samples,
            slip_beta,
        } => {
            let (config, _, base) = config.load()?;
            let summary = cmd_evaluate(&policy, &config, &base, samples, config.seed, slip_beta)?;
            println!(
                "value {:.4} ± {:.4}, detection {:.4} ± {:.4} ({} samples)",
                summary.value_mean,
                summary.value_se,
                summary.detection_mean,
                summary.detection_se,
                summary.n_samples
            );
            Ok(())
        }
        Command::CrossEval {
            config,
            policies,
            betas,
            samples,
            out,
        } => {
            let (config, _, base) = config.load()?;
            std::fs::create_dir_all(&out)?;
            let csv = out.join("cross_eval.csv");
            let rows = cmd_cross_eval(
                &policies,
                &betas,
                &config,
                &base,
                samples,
                config.seed,
                Some(&csv),
            )?;
            println!("policy_beta  eval_beta  detection            value");
            for row in &rows {
                println!(
                    "{:<12} {:<10} {:.3} ± {:.3}        {:.2} ± {:.2}",
                    row.policy_label,
                    row.eval_beta,
                    row.summary.detection_mean,
                    row.summary.detection_se,
                    row.summary.value_mean,
                    row.summary.value_se
                );
            }
            println!("wrote {}", csv.display());
            Ok(())
        }
        Command::Verify { suite } => {
            let results = verify_suite(&suite)?;
            let mut failures = 0;
            for check in &results {
                let status = if check.passed { "PASS" } else { "FAIL" };
                println!("{status}  {}: {}", check.name, check.detail);
                if !check.passed {
                    failures += 1;
                }
            }
            if failures > 0 {
                return Err(Error::NonFinite(format!(
                    "{failures} of {} checks failed",
                    results.len()
                )));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
