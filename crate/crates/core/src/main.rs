use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use unifconserv::env::{EnvSpec, InventoryParams, RandomMdpParams};
use unifconserv::harness::{check_env, run_experiment, ExperimentConfig, DEFAULT_RANDOM_POLICIES};
use unifconserv::{Error, Result};

/// Shielded UCBVI experiments on tabular MDPs.
#[derive(Parser)]
#[command(name = "unifconserv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (agent, eta, seed) cell of an experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Also write per-step trace CSVs.
        #[arg(long)]
        trace: bool,
        /// Run even if the diameter check fails.
        #[arg(long)]
        force: bool,
        #[arg(long, env = "UNIFCONSERV_WORKERS")]
        workers: Option<usize>,
        #[arg(long, env = "UNIFCONSERV_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Report the diameter and single-step budget checks of an environment.
    Check {
        /// Environment spec or MDP JSON file.
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        eta: f64,
        /// Random deterministic policies sampled for eta_min.
        #[arg(long, default_value_t = DEFAULT_RANDOM_POLICIES)]
        policies: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build an environment and write it as MDP JSON.
    GenEnv {
        #[arg(long, value_enum)]
        kind: EnvKind,
        #[arg(long)]
        out: PathBuf,
        /// Write the environment spec instead of the built MDP.
        #[arg(long)]
        spec_only: bool,
        #[arg(long, default_value_t = 5)]
        states: usize,
        #[arg(long, default_value_t = 2)]
        actions: usize,
        #[arg(long, default_value_t = 20)]
        horizon: usize,
        #[arg(long, default_value_t = 0.05)]
        min_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    Inventory,
    RandomErgodic,
}

fn write_out(path: &PathBuf, text: String) -> Result<()> {
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            trace,
            force,
            workers,
            output_dir,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.trace |= trace;
            cfg.force |= force;
            if workers.is_some() {
                cfg.workers = workers;
            }
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let out = run_experiment(&cfg)?;
            for f in &out.summary.failures {
                eprintln!("{}", json!({ "cell": { "agent": f.agent, "seed": f.seed, "eta": f.eta }, "error": f.error }));
            }
            println!(
                "{}",
                json!({
                    "output_dir": cfg.output_dir,
                    "cells": out.summary.cells.len(),
                    "failed": out.summary.failures.len(),
                })
            );
            Ok(if out.summary.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
        Command::Check {
            env,
            eta,
            policies,
            seed,
        } => {
            if eta.is_nan() || eta <= 0.0 {
                return Err(Error::Config(format!("eta must be positive, got {eta}")));
            }
            let text = fs::read_to_string(&env).map_err(|e| Error::io(&env, e))?;
            let mdp = EnvSpec::from_json(&text)?.build()?;
            let report = check_env(&mdp, eta, policies, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::GenEnv {
            kind,
            out,
            spec_only,
            states,
            actions,
            horizon,
            min_prob,
            seed,
        } => {
            let spec = match kind {
                EnvKind::Inventory => EnvSpec::Inventory(InventoryParams::default()),
                EnvKind::RandomErgodic => {
                    EnvSpec::RandomErgodic(RandomMdpParams::new(states, actions, horizon, min_prob, seed))
                }
            };
            let text = if spec_only {
                serde_json::to_string_pretty(&spec)?
            } else {
                spec.build()?.to_json()?
            };
            write_out(&out, text)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": message.trim() } }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.report() }));
            match e {
                Error::Assumption(_) => ExitCode::from(4),
                _ => ExitCode::from(1),
            }
        }
    }
}
