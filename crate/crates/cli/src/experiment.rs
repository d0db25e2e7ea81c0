//! Experiment grids: configuration, run records and their files.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use gclr_core::synth::{gen_type1, gen_type2, SyntheticConfig};
use gclr_core::{parse_dataset_with, partition_sse, Dataset, DatasetOptions, Partition, TracePoint};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algo::{run_algorithm, Algorithm};

/// Where an instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    File {
        path: PathBuf,
    },
    Generate {
        /// 1 for independent entities, 2 for planted clusters.
        kind: u8,
        entities: usize,
        seed: u64,
        /// Planted cluster count; defaults to the K of each cell.
        #[serde(default)]
        k: Option<usize>,
        #[serde(default = "default_noise_scale")]
        noise_scale: f64,
    },
}

fn default_noise_scale() -> f64 {
    5.0
}

impl InstanceSpec {
    /// `I_K` style name for generated instances, file stem otherwise.
    pub fn id(&self, k: usize) -> String {
        match self {
            InstanceSpec::File { path } => {
                path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
            }
            InstanceSpec::Generate { kind, entities, seed, k: planted, .. } => {
                format!("{entities}_{}_t{kind}_s{seed}", planted.unwrap_or(k))
            }
        }
    }

    pub fn load(&self, k: usize, n: usize, options: DatasetOptions) -> anyhow::Result<Dataset> {
        match self {
            InstanceSpec::File { path } => {
                let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                Ok(parse_dataset_with(BufReader::new(file), n, k, options)
                    .with_context(|| format!("reading {}", path.display()))?)
            }
            InstanceSpec::Generate { kind, entities, seed, k: planted, noise_scale } => {
                let mut cfg = SyntheticConfig::new(*entities, planted.unwrap_or(k), *seed);
                cfg.noise_scale = *noise_scale;
                cfg.n = n;
                let inst = match kind {
                    1 => gen_type1(&cfg)?,
                    2 => gen_type2(&cfg)?,
                    other => bail!("unknown generator type {other}"),
                };
                Ok(inst.dataset.retarget_with(k, n, DatasetOptions {
                    allow_degenerate: options.allow_degenerate || inst.dataset.options().allow_degenerate,
                })?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instances: Vec<InstanceSpec>,
    pub algorithms: Vec<Algorithm>,
    pub k_values: Vec<usize>,
    pub n: usize,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Repetition `r` uses seed `base_seed + r`.
    #[serde(default)]
    pub base_seed: u64,
    pub time_limit_secs: f64,
    #[serde(default)]
    pub allow_degenerate: bool,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.repetitions == 0 {
            bail!("repetitions must be at least 1");
        }
        if !(self.time_limit_secs > 0.0 && self.time_limit_secs.is_finite()) {
            bail!("time_limit_secs must be positive");
        }
        if self.instances.is_empty() || self.algorithms.is_empty() || self.k_values.is_empty() {
            bail!("instances, algorithms and k_values must be nonempty");
        }
        Ok(())
    }

    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let cfg: Self = serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("serializable");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance_id: String,
    /// The instance spec as JSON, so the run can be rebuilt.
    pub source: String,
    pub algorithm: String,
    pub params: String,
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub sse: Option<f64>,
    pub wall_time_ms: f64,
    pub converged: bool,
    /// Cluster labels in entity order, separated by spaces.
    pub partition: String,
    pub error: String,
}

impl RunRecord {
    pub fn labels(&self) -> anyhow::Result<Vec<usize>> {
        self.partition
            .split_whitespace()
            .map(|s| s.parse().with_context(|| format!("bad label {s:?}")))
            .collect()
    }

    /// Rebuilds the instance and recomputes the objective of the stored partition.
    pub fn recompute_sse(&self, options: DatasetOptions) -> anyhow::Result<f64> {
        let spec: InstanceSpec = serde_json::from_str(&self.source)?;
        let ds = spec.load(self.k, self.n, options)?;
        let labels = self.labels()?;
        if labels.len() != ds.len() {
            bail!("{} labels for {} entities", labels.len(), ds.len());
        }
        Ok(partition_sse(&ds, &Partition::new(labels, self.k))?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub instance_id: String,
    pub algorithm: String,
    pub k: usize,
    pub seed: u64,
    pub elapsed_ms: f64,
    pub sse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub version: String,
    pub records: usize,
    pub failures: usize,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<RunRecord>,
    pub traces: Vec<TraceRow>,
}

struct Cell<'c> {
    spec: &'c InstanceSpec,
    algorithm: &'c Algorithm,
    k: usize,
    seed: u64,
}

/// Runs every (instance, K, algorithm, seed) cell. Cells run in parallel and
/// come back in grid order. A failing cell becomes a row with its error.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentOutput> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for spec in &cfg.instances {
        for &k in &cfg.k_values {
            for algorithm in &cfg.algorithms {
                for r in 0..cfg.repetitions {
                    cells.push(Cell { spec, algorithm, k, seed: cfg.base_seed + r as u64 });
                }
            }
        }
    }
    let limit = Duration::from_secs_f64(cfg.time_limit_secs);
    let options = DatasetOptions { allow_degenerate: cfg.allow_degenerate };
    let results: Vec<(RunRecord, Vec<TracePoint>)> = cells.par_iter().map(|c| run_cell(c, cfg.n, limit, options)).collect();

    let mut records = Vec::with_capacity(results.len());
    let mut traces = Vec::new();
    for (record, trace) in results {
        traces.extend(trace.into_iter().map(|t| TraceRow {
            instance_id: record.instance_id.clone(),
            algorithm: record.algorithm.clone(),
            k: record.k,
            seed: record.seed,
            elapsed_ms: t.elapsed_ms,
            sse: t.sse,
        }));
        records.push(record);
    }
    Ok(ExperimentOutput { records, traces })
}

fn run_cell(c: &Cell, n: usize, limit: Duration, options: DatasetOptions) -> (RunRecord, Vec<TracePoint>) {
    let mut record = RunRecord {
        instance_id: c.spec.id(c.k),
        source: serde_json::to_string(c.spec).expect("serializable"),
        algorithm: c.algorithm.name().to_string(),
        params: c.algorithm.params_json(),
        k: c.k,
        n,
        seed: c.seed,
        sse: None,
        wall_time_ms: 0.0,
        converged: false,
        partition: String::new(),
        error: String::new(),
    };
    let outcome = c
        .spec
        .load(c.k, n, options)
        .and_then(|ds| Ok(run_algorithm(&ds, c.algorithm, c.seed, Some(limit))?));
    match outcome {
        Ok(out) => {
            record.sse = Some(out.sse);
            record.wall_time_ms = out.wall_time.as_secs_f64() * 1e3;
            record.converged = out.converged;
            record.partition = out.partition.labels().iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ");
            (record, out.trace)
        }
        Err(e) => {
            log::warn!("{} {} K={} seed {}: {e:#}", record.instance_id, record.algorithm, c.k, c.seed);
            record.error = format!("{e:#}");
            (record, Vec::new())
        }
    }
}

/// Writes `records.csv`, `traces.csv` and `manifest.json` into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut w = csv::Writer::from_path(dir.join("records.csv"))?;
    for r in &out.records {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("traces.csv"))?;
    for t in &out.traces {
        w.serialize(t)?;
    }
    w.flush()?;
    let manifest = Manifest {
        config_sha256: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        records: out.records.len(),
        failures: out.records.iter().filter(|r| !r.error.is_empty()).count(),
        config: cfg.clone(),
    };
    serde_json::to_writer_pretty(File::create(dir.join("manifest.json"))?, &manifest)?;
    Ok(())
}

pub fn read_records(path: &Path) -> anyhow::Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let records = r.deserialize().collect::<Result<Vec<RunRecord>, _>>()?;
    Ok(records)
}
