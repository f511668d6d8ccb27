//! Config-driven runner behind the `shearmix` binary.
//!
//! A run is planned first (config read, every parameter block parsed and
//! checked) and only then executed, so a malformed config never leaves an
//! output directory behind. Each task returns its artifacts in memory; they
//! are written together with a `manifest.json` holding their SHA-256 hashes.

mod report;
mod tasks;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::velocity::VelocityField;

pub use report::ReportParams;
pub use tasks::{EvolveParams, InitialField, SimulateParams, SpectrumParams, ValidateParams};

pub const DEFAULT_SEED: u64 = 20240607;
pub const DEFAULT_OUT: &str = "out";

pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const MISSING_INPUT: i32 = 3;
    pub const NUMERIC: i32 = 4;
    pub const IO: i32 = 5;
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) | Error::Json(_) => exit::CONFIG,
            Error::MissingInput(_) => exit::MISSING_INPUT,
            Error::Io(_) => exit::IO,
            Error::OutOfDomain { .. }
            | Error::Undefined(_)
            | Error::Precondition(_)
            | Error::Numeric(_) => exit::NUMERIC,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Bounds,
    Spectrum,
    Evolve,
    Simulate,
    Validate,
    Report,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Bounds => "bounds",
            Task::Spectrum => "spectrum",
            Task::Evolve => "evolve",
            Task::Simulate => "simulate",
            Task::Validate => "validate",
            Task::Report => "report",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The on-disk config file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub velocity: Option<Value>,
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default)]
    pub params: Option<Value>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Command-line flags that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum TaskParams {
    Bounds(crate::functionals::BoundsOptions),
    Spectrum(SpectrumParams),
    Evolve(EvolveParams),
    Simulate(SimulateParams),
    Validate(ValidateParams),
    Report(ReportParams),
}

/// A fully checked run, ready to execute.
#[derive(Clone, Debug)]
pub struct Plan {
    pub task: Task,
    pub velocity: Option<VelocityField>,
    pub params: TaskParams,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: Option<usize>,
}

fn parse_block<T: serde::de::DeserializeOwned + Default>(params: &Option<Value>, what: &str) -> Result<T> {
    match params {
        None | Some(Value::Null) => Ok(T::default()),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| Error::Config(format!("{what} params: {e}"))),
    }
}

impl Plan {
    pub fn new(task: Task, cfg: ExperimentConfig, ov: Overrides) -> Result<Plan> {
        if let Some(t) = cfg.task {
            if t != task {
                return Err(Error::Config(format!("config is for task `{t}`, not `{task}`")));
            }
        }
        let velocity = match cfg.velocity {
            None => None,
            Some(v) => Some(
                serde_json::from_value::<VelocityField>(v)
                    .map_err(|e| Error::Config(format!("velocity: {e}")))?,
            ),
        };
        let params = match task {
            Task::Bounds => TaskParams::Bounds(parse_block(&cfg.params, "bounds")?),
            Task::Spectrum => TaskParams::Spectrum(parse_block(&cfg.params, "spectrum")?),
            Task::Evolve => TaskParams::Evolve(parse_block(&cfg.params, "evolve")?),
            Task::Simulate => match &cfg.params {
                None | Some(Value::Null) => {
                    return Err(Error::Config("simulate needs a params block".into()))
                }
                Some(v) => TaskParams::Simulate(
                    serde_json::from_value(v.clone())
                        .map_err(|e| Error::Config(format!("simulate params: {e}")))?,
                ),
            },
            Task::Validate => TaskParams::Validate(parse_block(&cfg.params, "validate")?),
            Task::Report => TaskParams::Report(parse_block(&cfg.params, "report")?),
        };
        let workers = ov.workers.or(cfg.workers);
        if workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let plan = Plan {
            task,
            velocity,
            params,
            out: ov
                .out
                .or(cfg.output_dir)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            seed: ov.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
            workers,
        };
        plan.check()?;
        Ok(plan)
    }

    /// Read and plan from a config file, or from defaults when `path` is `None`.
    pub fn from_path(task: Task, path: Option<&Path>, ov: Overrides) -> Result<Plan> {
        let cfg = match path {
            None => ExperimentConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::MissingInput(format!("config {}: {e}", p.display()))
                })?;
                ExperimentConfig::from_json(&text)?
            }
        };
        Plan::new(task, cfg, ov)
    }

    fn needs_velocity(&self) -> bool {
        match &self.params {
            TaskParams::Bounds(_) | TaskParams::Spectrum(_) | TaskParams::Evolve(_) => true,
            TaskParams::Simulate(s) => s.needs_velocity(),
            TaskParams::Validate(_) | TaskParams::Report(_) => false,
        }
    }

    pub fn velocity(&self) -> Result<&VelocityField> {
        self.velocity
            .as_ref()
            .ok_or_else(|| Error::Config(format!("task `{}` needs a `velocity` block", self.task)))
    }

    fn check(&self) -> Result<()> {
        if self.needs_velocity() {
            self.velocity()?;
        }
        let as_config = |e: Error| match e {
            Error::InvalidInput(m) | Error::Precondition(m) => Error::Config(m),
            other => other,
        };
        match &self.params {
            TaskParams::Spectrum(p) => p.check().map_err(as_config),
            TaskParams::Evolve(p) => p.check(self.velocity()?).map_err(as_config),
            TaskParams::Simulate(p) => p.check().map_err(as_config),
            TaskParams::Validate(p) => p.check().map_err(as_config),
            TaskParams::Bounds(_) | TaskParams::Report(_) => Ok(()),
        }
    }

    /// Everything needed to regenerate the run, recorded in the manifest.
    pub fn metadata(&self) -> Value {
        serde_json::json!({
            "task": self.task,
            "seed": self.seed,
            "velocity": self.velocity,
            "params": self.params,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// What a task hands back: named files plus a console summary.
#[derive(Clone, Debug, Default)]
pub struct TaskOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub message: String,
    pub warnings: Vec<String>,
    pub exit: i32,
}

impl TaskOutput {
    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write the files and the manifest into `dir`.
pub fn write_artifacts(dir: &Path, metadata: Value, files: &[(String, Vec<u8>)]) -> Result<Vec<ManifestEntry>> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        std::fs::write(dir.join(name), bytes)?;
        entries.push(ManifestEntry {
            path: name.clone(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }
    let manifest = serde_json::json!({ "run": metadata, "artifacts": entries });
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(entries)
}

/// Run the task's computation without touching the filesystem (except to read report inputs).
pub fn compute(plan: &Plan) -> Result<TaskOutput> {
    let body = || match &plan.params {
        TaskParams::Bounds(opts) => tasks::bounds(plan, opts),
        TaskParams::Spectrum(p) => tasks::spectrum(plan, p),
        TaskParams::Evolve(p) => tasks::evolve(plan, p),
        TaskParams::Simulate(p) => tasks::simulate(plan, p),
        TaskParams::Validate(p) => tasks::validate(plan, p),
        TaskParams::Report(p) => report::report(plan, p),
    };
    match plan.workers {
        None => body(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?
            .install(body),
    }
}

/// Compute, then write artifacts and the manifest. Returns the output and the manifest entries.
pub fn execute(plan: &Plan) -> Result<(TaskOutput, Vec<ManifestEntry>)> {
    let output = compute(plan)?;
    let entries = write_artifacts(&plan.out, plan.metadata(), &output.files)?;
    Ok((output, entries))
}

/// Entry point used by the binary: plans, executes and maps failures to exit codes.
pub fn run(task: Task, config: Option<&Path>, ov: Overrides) -> i32 {
    let plan = match Plan::from_path(task, config, ov) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match execute(&plan) {
        Ok((output, entries)) => {
            for w in &output.warnings {
                eprintln!("warning: {w}");
            }
            if !output.message.is_empty() {
                print!("{}", output.message);
            }
            println!(
                "wrote {} artifact(s) and manifest.json to {}",
                entries.len(),
                plan.out.display()
            );
            output.exit
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
