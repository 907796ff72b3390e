use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use holosched_core::config::{self, ConfigError};
use holosched_core::sim::{self, SimError};
use holosched_core::{BatchResult, PolicyKind, ScenarioTemplate};
use thiserror::Error;

use crate::output;
use crate::{EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OutputFormat {
    Csv,
    Md,
    Json,
}

impl OutputFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "latency.csv",
            OutputFormat::Md => "summary.md",
            OutputFormat::Json => "series.json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "md" | "markdown" => Ok(OutputFormat::Md),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!(
                "unknown format `{other}` (expected csv, md or json)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// `None` selects the shipped default template.
    pub template: Option<PathBuf>,
    pub policies: Vec<PolicyKind>,
    pub out_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            template: None,
            policies: vec![
                PolicyKind::Proposed,
                PolicyKind::JoinShortestQueue,
                PolicyKind::AlwaysSplitEvenly,
                PolicyKind::LocalComputation,
            ],
            out_dir: out_dir.into(),
            formats: vec![OutputFormat::Csv, OutputFormat::Md, OutputFormat::Json],
            seed: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("invalid template:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Template(Vec<sim::Violation>),
    #[error(transparent)]
    Sim(SimError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Usage(_) | RunError::Template(_) => EXIT_USAGE,
            RunError::Sim(_) | RunError::Write { .. } => EXIT_FAILURE,
        }
    }
}

impl From<SimError> for RunError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Template(v) => RunError::Template(v),
            SimError::NoPolicies | SimError::MissingLocalCapacity => RunError::Usage(e.to_string()),
            other => RunError::Sim(other),
        }
    }
}

pub struct RunOutcome {
    pub template: ScenarioTemplate,
    pub batch: BatchResult,
    pub written: Vec<PathBuf>,
}

fn load(path: Option<&Path>) -> Result<ScenarioTemplate, RunError> {
    Ok(match path {
        Some(p) => config::load_template(p)?,
        None => config::default_template(),
    })
}

fn dedup<T: Ord + Copy>(items: &[T]) -> Vec<T> {
    let mut seen = BTreeSet::new();
    items.iter().copied().filter(|x| seen.insert(*x)).collect()
}

/// Loads the template, runs the batch and writes the requested files.
pub fn execute_run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let mut template = load(config.template.as_deref())?;
    if let Some(seed) = config.seed {
        template.rng_seed = seed;
    }
    let kinds = dedup(&config.policies);
    let formats = dedup(&config.formats);
    if kinds.is_empty() {
        return Err(RunError::Usage("no policies selected".into()));
    }
    if formats.is_empty() {
        return Err(RunError::Usage("no output formats selected".into()));
    }
    template.validate()?;
    let policies = kinds
        .iter()
        .map(|&k| template.policy(k))
        .collect::<Result<Vec<_>, _>>()?;

    let started = Instant::now();
    let batch = sim::run_batch(&template, &policies)?;
    log::info!(
        "{} runs x {} policies in {:?}",
        batch.n_runs,
        policies.len(),
        started.elapsed()
    );

    std::fs::create_dir_all(&config.out_dir).map_err(|source| RunError::Write {
        path: config.out_dir.clone(),
        source,
    })?;
    let mut written = Vec::new();
    for format in formats {
        let bytes = match format {
            OutputFormat::Csv => output::latency_csv(&batch),
            OutputFormat::Md => output::summary_md(&template, &batch).into_bytes(),
            OutputFormat::Json => output::series_json(&template, &batch),
        };
        let path = config.out_dir.join(format.file_name());
        output::write_atomic(&path, &bytes).map_err(|source| RunError::Write {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(RunOutcome {
        template,
        batch,
        written,
    })
}

pub fn cmd_run(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match execute_run(config) {
        Ok(outcome) => {
            for r in output::ranked(&outcome.batch) {
                let _ = writeln!(
                    out,
                    "{:<22} {:>8.1} ± {:>6.1} ms   likability {:+.3}",
                    r.policy.label(),
                    r.mean_latency_ms,
                    r.std_latency_ms,
                    r.mean_likability
                );
            }
            for p in &outcome.written {
                let _ = writeln!(out, "wrote {}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Exit 0 when the template is clean, 1 with one line per violation, 2 when
/// it cannot be read or parsed.
pub fn cmd_validate(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let template = match config::load_template(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let violations = template.violations();
    if violations.is_empty() {
        let _ = writeln!(out, "{}: ok", path.display());
        return EXIT_OK;
    }
    for v in &violations {
        let _ = writeln!(out, "{v}");
    }
    let _ = writeln!(err, "{}: {} violation(s)", path.display(), violations.len());
    EXIT_FAILURE
}
