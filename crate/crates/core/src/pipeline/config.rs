use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::chat::CleaningPolicy;
use crate::eval::Protocol;
use crate::features::{FeatureConfig, Representation};
use crate::models::{ClassWeighting, ForestConfig, LogisticConfig, MaxFeatures, ModelKind};
use crate::stats::{StatsLevel, SubjectAggregation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TagSource {
    /// Map the `%mor` tier through the bundled or configured table.
    Mor,
    /// Read `<stem>.tags` files from `tag_dir`.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    TranscriptSplit,
    SubjectCv,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::TranscriptSplit => "transcript_split",
            ProtocolKind::SubjectCv => "subject_cv",
        }
    }
}

/// Every setting of a run. Stage hashes cover only the settings that
/// influence that stage's output, so paths and thread counts never change them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub strict: bool,
    pub skip_bad: bool,

    pub cleaning: CleaningPolicy,

    pub tagger: TagSource,
    pub tag_dir: Option<PathBuf>,
    pub mor_table: Option<PathBuf>,
    pub max_x_rate: f64,

    pub representations: Vec<Representation>,
    pub features: FeatureConfig,

    pub models: Vec<ModelKind>,
    pub protocols: Vec<ProtocolKind>,
    pub test_fraction: f64,
    pub folds: usize,
    pub logistic: LogisticConfig,
    pub forest: ForestConfig,
    pub top_k: usize,

    pub stats_representation: Representation,
    pub stats_levels: Vec<StatsLevel>,
    pub subject_aggregation: SubjectAggregation,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            labels: None,
            out_dir: PathBuf::from("lingmark-out"),
            seed: 42,
            threads: None,
            strict: false,
            skip_bad: false,
            cleaning: CleaningPolicy::default(),
            tagger: TagSource::Mor,
            tag_dir: None,
            mor_table: None,
            max_x_rate: 0.02,
            representations: Representation::ALL.to_vec(),
            features: FeatureConfig::default(),
            models: vec![ModelKind::Logistic, ModelKind::Forest],
            protocols: vec![ProtocolKind::TranscriptSplit, ProtocolKind::SubjectCv],
            test_fraction: 0.2,
            folds: 5,
            logistic: LogisticConfig::default(),
            forest: ForestConfig::default(),
            top_k: crate::models::DEFAULT_TOP_K,
            stats_representation: Representation::PosEnhanced,
            stats_levels: vec![StatsLevel::Transcript, StatsLevel::Subject],
            subject_aggregation: SubjectAggregation::Mean,
        }
    }
}

fn bad(key: &str, value: &str, expected: &str) -> PipelineError {
    PipelineError::Usage(format!(
        "`{key}`: cannot use `{value}` (expected {expected})"
    ))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, PipelineError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, v, "true or false")),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str, expected: &str) -> Result<T, PipelineError> {
    v.parse().map_err(|_| bad(key, v, expected))
}

fn parse_list<T>(
    key: &str,
    v: &str,
    one: impl Fn(&str) -> Result<T, String>,
) -> Result<Vec<T>, PipelineError> {
    let items = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| one(s).map_err(|e| PipelineError::Usage(format!("`{key}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if items.is_empty() {
        return Err(bad(key, v, "a non-empty list"));
    }
    Ok(items)
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "lr" | "logistic" => Ok(ModelKind::Logistic),
        "rf" | "forest" => Ok(ModelKind::Forest),
        other => Err(format!("unknown model `{other}` (expected lr or rf)")),
    }
}

fn parse_protocol(s: &str) -> Result<ProtocolKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "transcript_split" | "split" => Ok(ProtocolKind::TranscriptSplit),
        "subject_cv" | "cv" => Ok(ProtocolKind::SubjectCv),
        other => Err(format!(
            "unknown protocol `{other}` (expected transcript_split or subject_cv)"
        )),
    }
}

impl RunConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let v = value.trim();
        let k = key.trim();
        match k {
            "input" => self.input = Some(PathBuf::from(v)),
            "labels" => self.labels = Some(PathBuf::from(v)),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "seed" => self.seed = parse_num(k, v, "an unsigned integer")?,
            "threads" => self.threads = Some(parse_num(k, v, "a positive integer")?),
            "strict" => self.strict = parse_bool(k, v)?,
            "skip_bad" => self.skip_bad = parse_bool(k, v)?,
            "target_speaker" => self.cleaning.target_speaker = v.to_string(),
            "keep_fillers" => self.cleaning.keep_fillers = parse_bool(k, v)?,
            "keep_repetitions" => self.cleaning.keep_repetitions = parse_bool(k, v)?,
            "keep_retracings" => self.cleaning.keep_retracings = parse_bool(k, v)?,
            "drop_unintelligible" => self.cleaning.drop_unintelligible = parse_bool(k, v)?,
            "count_pauses" => self.cleaning.count_pauses = parse_bool(k, v)?,
            "apply_replacements" => self.cleaning.apply_replacements = parse_bool(k, v)?,
            "tagger" => {
                self.tagger = match v {
                    "mor" => TagSource::Mor,
                    "external" => TagSource::External,
                    _ => return Err(bad(k, v, "mor or external")),
                }
            }
            "tag_dir" => self.tag_dir = Some(PathBuf::from(v)),
            "mor_table" => self.mor_table = Some(PathBuf::from(v)),
            "max_x_rate" => self.max_x_rate = parse_num(k, v, "a number")?,
            "representation" | "representations" => {
                self.representations = parse_list(k, v, |s| s.parse())?
            }
            "mattr_window" => self.features.mattr_window = parse_num(k, v, "a positive integer")?,
            "propn_is_content" => self.features.propn_is_content = parse_bool(k, v)?,
            "model" | "models" => self.models = parse_list(k, v, parse_model)?,
            "protocol" | "protocols" => self.protocols = parse_list(k, v, parse_protocol)?,
            "test_fraction" => self.test_fraction = parse_num(k, v, "a number in (0, 1)")?,
            "folds" => self.folds = parse_num(k, v, "an integer ≥ 2")?,
            "lambda" => self.logistic.lambda = parse_num(k, v, "a positive number")?,
            "max_iter" => self.logistic.max_iter = parse_num(k, v, "a positive integer")?,
            "tol" => self.logistic.tol = parse_num(k, v, "a positive number")?,
            "class_weighting" => {
                let cw = match v {
                    "balanced" => ClassWeighting::Balanced,
                    "none" => ClassWeighting::None,
                    _ => return Err(bad(k, v, "balanced or none")),
                };
                self.logistic.class_weighting = cw;
                self.forest.class_weighting = cw;
            }
            "n_trees" => self.forest.n_trees = parse_num(k, v, "a positive integer")?,
            "max_features" => {
                self.forest.max_features = match v {
                    "sqrt" => MaxFeatures::Sqrt,
                    "all" => MaxFeatures::All,
                    n => MaxFeatures::Count(parse_num(k, n, "sqrt, all or an integer")?),
                }
            }
            "min_leaf" => self.forest.min_leaf = parse_num(k, v, "a positive integer")?,
            "max_depth" => {
                self.forest.max_depth = match v {
                    "none" => None,
                    n => Some(parse_num(k, n, "none or an integer")?),
                }
            }
            "top_k" => self.top_k = parse_num(k, v, "a positive integer")?,
            "stats_representation" => {
                self.stats_representation =
                    v.parse().map_err(|e: String| PipelineError::Usage(e))?
            }
            "stats_level" | "stats_levels" => self.stats_levels = parse_list(k, v, |s| s.parse())?,
            "subject_aggregation" => {
                self.subject_aggregation = v.parse().map_err(|e: String| PipelineError::Usage(e))?
            }
            _ => return Err(PipelineError::Usage(format!("unknown config key `{k}`"))),
        }
        Ok(())
    }

    /// Apply a plain-text `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), PipelineError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                PipelineError::Usage(format!("config line {}: expected key = value", i + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let usage = |m: &str| Err(PipelineError::Usage(m.to_string()));
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return usage("test_fraction must lie in (0, 1)");
        }
        if self.folds < 2 {
            return usage("folds must be at least 2");
        }
        if self.features.mattr_window == 0 {
            return usage("mattr_window must be positive");
        }
        if !(self.logistic.lambda >= 0.0) || !(self.logistic.tol > 0.0) {
            return usage("lambda must be ≥ 0 and tol > 0");
        }
        if self.forest.n_trees == 0 || self.forest.min_leaf == 0 || self.top_k == 0 {
            return usage("n_trees, min_leaf and top_k must be positive");
        }
        if self.threads == Some(0) {
            return usage("threads must be positive");
        }
        if self.tagger == TagSource::External && self.tag_dir.is_none() {
            return usage("tagger = external needs tag_dir");
        }
        Ok(())
    }

    pub fn protocol(&self, kind: ProtocolKind) -> Protocol {
        match kind {
            ProtocolKind::TranscriptSplit => Protocol::TranscriptStratified {
                test_fraction: self.test_fraction,
                seed: self.seed,
            },
            ProtocolKind::SubjectCv => Protocol::SubjectGrouped { k: self.folds },
        }
    }

    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig {
            seed: self.seed,
            ..self.forest.clone()
        }
    }

    pub fn ingest_hash(&self) -> String {
        #[derive(Serialize)]
        struct S<'a> {
            stage: &'static str,
            cleaning: &'a CleaningPolicy,
            labels: Option<String>,
        }
        stamp(&S {
            stage: "ingest",
            cleaning: &self.cleaning,
            labels: self.labels.as_ref().map(|p| p.display().to_string()),
        })
    }

    pub fn features_hash(&self) -> String {
        #[derive(Serialize)]
        struct S<'a> {
            stage: &'static str,
            upstream: String,
            tagger: TagSource,
            tag_dir: Option<String>,
            mor_table: Option<String>,
            max_x_rate: f64,
            features: &'a FeatureConfig,
        }
        stamp(&S {
            stage: "features",
            upstream: self.ingest_hash(),
            tagger: self.tagger,
            tag_dir: self.tag_dir.as_ref().map(|p| p.display().to_string()),
            mor_table: self.mor_table.as_ref().map(|p| p.display().to_string()),
            max_x_rate: self.max_x_rate,
            features: &self.features,
        })
    }

    pub fn experiment_hash(&self) -> String {
        #[derive(Serialize)]
        struct S<'a> {
            stage: &'static str,
            upstream: String,
            seed: u64,
            test_fraction: f64,
            folds: usize,
            logistic: &'a LogisticConfig,
            forest: &'a ForestConfig,
            top_k: usize,
        }
        stamp(&S {
            stage: "experiment",
            upstream: self.features_hash(),
            seed: self.seed,
            test_fraction: self.test_fraction,
            folds: self.folds,
            logistic: &self.logistic,
            forest: &self.forest,
            top_k: self.top_k,
        })
    }

    pub fn stats_hash(&self) -> String {
        #[derive(Serialize)]
        struct S {
            stage: &'static str,
            upstream: String,
            aggregation: SubjectAggregation,
        }
        stamp(&S {
            stage: "stats",
            upstream: self.features_hash(),
            aggregation: self.subject_aggregation,
        })
    }
}

impl RunConfig {
    pub fn report_hash(&self) -> String {
        stamp(&(
            "report",
            self.experiment_hash(),
            self.stats_hash(),
            &self.representations,
            &self.models,
            &self.protocols,
            &self.stats_levels,
            self.stats_representation,
        ))
    }
}

/// First 16 hex digits of the SHA-256 of the JSON encoding.
fn stamp<T: Serialize>(v: &T) -> String {
    let json = serde_json::to_vec(v).expect("config serialises");
    hex::encode(&Sha256::digest(&json)[..8])
}
