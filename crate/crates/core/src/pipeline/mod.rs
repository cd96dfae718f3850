//! Staged command pipeline: ingest, features, experiment, stats, report.
//!
//! Each stage reads the previous stage's files from the output directory,
//! checks their config hash against the current configuration and writes
//! its own stamped artifacts atomically.

mod config;
mod experiment;
mod features;
mod ingest;
mod io;
mod report;
mod stats;

pub use config::{ProtocolKind, RunConfig, TagSource};
pub use experiment::{run_experiment, ExperimentSummary, RunSummary};
pub use features::{run_features, FeaturesSummary};
pub use ingest::{read_corpus, run_ingest, FileError, IngestSummary};
pub use io::{read_stamped_json, read_stamped_text, stamped_json, write_atomic};
pub use report::{run_report, ReportSummary};
pub use stats::{run_stats, StatsSummary};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::features::Representation;
use crate::models::ModelKind;
use crate::stats::StatsLevel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("{} file(s) failed:{}", .0.len(), list_files(.0))]
    BadFiles(Vec<FileError>),
    #[error("{} was written under config {found}, current config is {expected}; rerun the producing stage", artifact.display())]
    ConfigMismatch {
        artifact: PathBuf,
        expected: String,
        found: String,
    },
    #[error("missing input(s):{}", list_paths(.0))]
    MissingInputs(Vec<PathBuf>),
    #[error("annotation quality gate: {0}")]
    AnnotationGate(String),
    #[error("leakage guard: {0}")]
    Leakage(String),
    #[error("statistics precondition: {0}")]
    StatsPrecondition(String),
}

fn list_files(v: &[FileError]) -> String {
    v.iter().fold(String::new(), |mut s, f| {
        let _ = write!(s, "\n  {}: {}", f.path, f.message);
        s
    })
}

fn list_paths(v: &[PathBuf]) -> String {
    v.iter().fold(String::new(), |mut s, p| {
        let _ = write!(s, "\n  {}", p.display());
        s
    })
}

impl PipelineError {
    /// Process exit status for the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 64,
            PipelineError::AnnotationGate(_) => 3,
            PipelineError::Leakage(_) => 4,
            PipelineError::StatsPrecondition(_) => 5,
            _ => 2,
        }
    }
}

/// File locations under the output directory.
pub struct Layout<'a>(pub &'a Path);

impl Layout<'_> {
    pub fn manifest(&self) -> PathBuf {
        self.0.join("corpus/manifest.tsv")
    }
    pub fn corpus_summary(&self) -> PathBuf {
        self.0.join("corpus/summary.json")
    }
    pub fn transcripts(&self) -> PathBuf {
        self.0.join("corpus/transcripts.lmt")
    }
    pub fn annotation(&self) -> PathBuf {
        self.0.join("features/annotation.json")
    }
    pub fn matrix(&self, r: Representation) -> PathBuf {
        self.0.join(format!("features/{r}.csv"))
    }
    pub fn matrix_meta(&self, r: Representation) -> PathBuf {
        self.0.join(format!("features/{r}.json"))
    }
    pub fn experiment(&self, r: Representation, m: ModelKind, p: ProtocolKind) -> PathBuf {
        self.0.join(format!(
            "experiments/{r}.{}.{}.json",
            m.as_str(),
            p.as_str()
        ))
    }
    pub fn importance(&self, r: Representation, m: ModelKind, p: ProtocolKind) -> PathBuf {
        self.0.join(format!(
            "experiments/{r}.{}.{}.importance.tsv",
            m.as_str(),
            p.as_str()
        ))
    }
    pub fn experiment_summary(&self) -> PathBuf {
        self.0.join("experiments/summary.tsv")
    }
    pub fn association(&self, l: StatsLevel) -> PathBuf {
        self.0
            .join(format!("stats/association_{}.tsv", level_name(l)))
    }
    pub fn association_json(&self, l: StatsLevel) -> PathBuf {
        self.0
            .join(format!("stats/association_{}.json", level_name(l)))
    }
    pub fn plot(&self, l: StatsLevel) -> PathBuf {
        self.0.join(format!("stats/plot_{}.tsv", level_name(l)))
    }
    pub fn report(&self) -> PathBuf {
        self.0.join("report.md")
    }
}

pub(crate) fn level_name(l: StatsLevel) -> &'static str {
    match l {
        StatsLevel::Transcript => "transcript",
        StatsLevel::Subject => "subject",
    }
}
