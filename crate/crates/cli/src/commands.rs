//! Subcommands and their exit-code mapping.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use gclr_core::synth::{gen_type1, gen_type2, write_instance, SyntheticConfig};
use gclr_core::{parse_dataset_with, DatasetOptions};
use thiserror::Error;

use crate::algo::{run_algorithm, Algorithm};
use crate::experiment::{read_records, run_experiment, write_outputs, ExperimentConfig};
use crate::metrics::{improvement_rows, metric_rows};

#[derive(Debug, Parser)]
#[command(name = "gclr", version, about = "Clusterwise linear regression over entities with many observations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic instance (CSV plus a JSON sidecar).
    Gen {
        /// 1: independent entities, 2: planted clusters.
        #[arg(long = "type", default_value_t = 2)]
        kind: u8,
        #[arg(long)]
        entities: usize,
        /// Planted cluster count (type 2).
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5.0)]
        noise_scale: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one instance with one algorithm.
    Solve {
        #[arg(long, value_enum)]
        algo: AlgoName,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seconds; the incumbent is returned when the limit is hit.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long = "in")]
        input: PathBuf,
        /// Result JSON; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Accept instances where a minimum-size cluster fits without error.
        #[arg(long)]
        allow_degenerate: bool,
        #[arg(long, default_value_t = 10)]
        pop_size: usize,
        #[arg(long, default_value_t = 0.01)]
        mutation_prob: f64,
        #[arg(long, default_value_t = 50)]
        max_stall: usize,
        /// Use the literal GA replacement condition.
        #[arg(long)]
        literal_replacement: bool,
        #[arg(long, default_value_t = gclr_core::heuristics::DEFAULT_GROUPS)]
        groups: usize,
        #[arg(long, default_value_t = 0)]
        discount_col: usize,
    },
    /// Run an experiment grid from a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for records.csv, traces.csv and manifest.json.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Gap tables from a records file, written as CSV to stdout.
    Metrics {
        #[arg(long)]
        records: PathBuf,
        /// Print relative improvements `FIRST,SECOND` instead of gaps.
        #[arg(long, value_name = "FIRST,SECOND")]
        ri: Option<String>,
        /// Recompute each objective from its stored partition.
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoName {
    Cg,
    CgPlain,
    CgHeur,
    GaLloyd,
    Spaeth,
    TwoStage,
    Brute,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0:#}")]
    Input(anyhow::Error),
    #[error("no convergence within the time limit (incumbent SSE {sse})")]
    NotConverged { sse: f64 },
    #[error("{0:#}")]
    Failure(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::NotConverged { .. } => 3,
            CliError::Failure(_) => 1,
        }
    }
}

/// Problems with the instance or arguments are input errors; the rest are failures.
fn classify(e: anyhow::Error) -> CliError {
    use gclr_core::Error as E;
    let input = e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some()
            || c.downcast_ref::<serde_json::Error>().is_some()
            || c.downcast_ref::<csv::Error>().is_some()
            || matches!(
                c.downcast_ref::<E>(),
                Some(E::Parse { .. } | E::Infeasible { .. } | E::Degenerate { .. } | E::Contract(_) | E::TooLarge(_) | E::Io(_) | E::Csv(_) | E::Json(_))
            )
    });
    if input { CliError::Input(e) } else { CliError::Failure(e) }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { kind, entities, k, n, seed, noise_scale, out } => {
            let mut cfg = SyntheticConfig::new(entities, k, seed);
            cfg.noise_scale = noise_scale;
            cfg.n = n;
            let inst = match kind {
                1 => gen_type1(&cfg),
                2 => gen_type2(&cfg),
                other => return Err(CliError::Input(anyhow::anyhow!("unknown generator type {other}"))),
            }
            .map_err(|e| classify(e.into()))?;
            write_instance(&inst, &out).map_err(|e| classify(e.into()))?;
            Ok(())
        }
        Command::Solve {
            algo,
            k,
            n,
            seed,
            time_limit,
            input,
            out,
            allow_degenerate,
            pop_size,
            mutation_prob,
            max_stall,
            literal_replacement,
            groups,
            discount_col,
        } => {
            let algorithm = match algo {
                AlgoName::Cg => Algorithm::Cg,
                AlgoName::CgPlain => Algorithm::CgPlain,
                AlgoName::CgHeur => Algorithm::CgHeur { groups },
                AlgoName::GaLloyd => Algorithm::GaLloyd { pop_size, mutation_prob, max_stall, literal_replacement },
                AlgoName::Spaeth => Algorithm::Spaeth,
                AlgoName::TwoStage => Algorithm::TwoStage { discount_col },
                AlgoName::Brute => Algorithm::Brute,
            };
            let limit = match time_limit {
                Some(s) if !(s > 0.0 && s.is_finite()) => {
                    return Err(CliError::Input(anyhow::anyhow!("--time-limit must be positive")));
                }
                other => other.map(Duration::from_secs_f64),
            };
            solve(&input, out.as_deref(), &algorithm, k, n, seed, limit, allow_degenerate)
        }
        Command::Bench { config, out } => {
            let cfg = ExperimentConfig::from_path(&config).map_err(CliError::Input)?;
            let result = run_experiment(&cfg).map_err(classify)?;
            write_outputs(&out, &cfg, &result).map_err(CliError::Failure)?;
            let failed = result.records.iter().filter(|r| !r.error.is_empty()).count();
            eprintln!("{} runs, {failed} failed, written to {}", result.records.len(), out.display());
            Ok(())
        }
        Command::Metrics { records, ri, verify } => {
            let pair = match ri.as_deref().map(|s| s.split_once(',')) {
                None => None,
                Some(Some((a, b))) if !a.is_empty() && !b.is_empty() => Some((a.to_string(), b.to_string())),
                Some(_) => return Err(CliError::Input(anyhow::anyhow!("--ri expects FIRST,SECOND"))),
            };
            let records = read_records(&records).map_err(CliError::Input)?;
            if verify {
                for r in records.iter().filter(|r| r.sse.is_some()) {
                    let again = r.recompute_sse(DatasetOptions { allow_degenerate: true }).map_err(CliError::Input)?;
                    let sse = r.sse.expect("filtered");
                    if (again - sse).abs() > 1e-9 * again.abs().max(1.0) {
                        return Err(CliError::Input(anyhow::anyhow!(
                            "{} {} seed {}: stored SSE {sse} but partition gives {again}",
                            r.instance_id,
                            r.algorithm,
                            r.seed
                        )));
                    }
                }
            }
            let stdout = std::io::stdout();
            let mut w = csv::Writer::from_writer(stdout.lock());
            let written: anyhow::Result<()> = (|| {
                match &pair {
                    Some((first, second)) => {
                        for row in improvement_rows(&records, first, second)? {
                            w.serialize(row)?;
                        }
                    }
                    None => {
                        for row in metric_rows(&records)? {
                            w.serialize(row)?;
                        }
                    }
                }
                w.flush()?;
                Ok(())
            })();
            written.map_err(classify)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn solve(
    input: &Path,
    out: Option<&Path>,
    algorithm: &Algorithm,
    k: usize,
    n: usize,
    seed: u64,
    limit: Option<Duration>,
    allow_degenerate: bool,
) -> Result<(), CliError> {
    let file = File::open(input)
        .with_context(|| format!("opening {}", input.display()))
        .map_err(CliError::Input)?;
    let ds = parse_dataset_with(BufReader::new(file), n, k, DatasetOptions { allow_degenerate })
        .with_context(|| format!("reading {}", input.display()))
        .map_err(classify)?;
    let result = run_algorithm(&ds, algorithm, seed, limit).map_err(|e| classify(e.into()))?;
    let partition: serde_json::Map<String, serde_json::Value> = ds
        .entities()
        .iter()
        .zip(result.partition.labels())
        .map(|(e, &c)| (e.id.clone(), c.into()))
        .collect();
    let doc = serde_json::json!({
        "algorithm": algorithm.name(),
        "params": serde_json::from_str::<serde_json::Value>(&algorithm.params_json()).expect("json"),
        "k": k,
        "n": n,
        "seed": seed,
        "sse": result.sse,
        "converged": result.converged,
        "iterations": result.iterations,
        "wall_time_ms": result.wall_time.as_secs_f64() * 1e3,
        "partition": partition,
        "trace": result.trace,
    });
    let text = serde_json::to_string_pretty(&doc).expect("json");
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))
            .map_err(CliError::Failure)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| CliError::Failure(e.into()))?;
        }
    }
    if result.converged { Ok(()) } else { Err(CliError::NotConverged { sse: result.sse }) }
}
