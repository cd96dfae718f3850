//! Standardisation, L2 logistic regression, random forest and global importance.

mod forest;
mod importance;
mod logistic;
mod standardize;

pub use forest::{
    fit_forest, DecisionTree, ForestConfig, ForestModel, MaxFeatures, Split, TreeNode,
};
pub use importance::{
    forest_mdi_importance, logistic_importance, ImportanceEntry, ImportanceReport, ModelKind,
    DEFAULT_TOP_K,
};
pub use logistic::{fit_logistic, LogisticConfig, LogisticModel, LogisticObjective};
pub use standardize::{fit_standardizer, StandardizerParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version stamped into serialised model artifacts.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("need at least 2 rows to fit, got {0}")]
    InsufficientRows(usize),
    #[error("expected {expected} features, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("loss became non-finite")]
    NonFiniteLoss,
    #[error("model artifact: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    /// Weight for class `c` is `n / (2 n_c)`.
    #[default]
    Balanced,
    None,
}

/// Per-class sample weights, indexed by class.
pub fn class_weights(y: &[u8], scheme: ClassWeighting) -> Result<[f64; 2], ModelError> {
    let mut counts = [0usize; 2];
    for &c in y {
        if c > 1 {
            return Err(ModelError::BadLabel(c));
        }
        counts[c as usize] += 1;
    }
    if counts[0] == 0 || counts[1] == 0 {
        return Err(ModelError::SingleClass);
    }
    Ok(match scheme {
        ClassWeighting::None => [1.0, 1.0],
        ClassWeighting::Balanced => {
            let n = y.len() as f64;
            [n / (2.0 * counts[0] as f64), n / (2.0 * counts[1] as f64)]
        }
    })
}

fn check_training(rows: &[Vec<Option<f64>>], y: &[u8], names: &[String]) -> Result<(), ModelError> {
    if rows.len() != y.len() {
        return Err(ModelError::LengthMismatch {
            rows: rows.len(),
            labels: y.len(),
        });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != names.len()) {
        return Err(ModelError::ArityMismatch {
            expected: names.len(),
            found: r.len(),
        });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct Artifact<T> {
    format_version: u32,
    kind: ModelKind,
    model: T,
}

fn to_artifact_json<T: Serialize>(kind: ModelKind, model: &T) -> String {
    serde_json::to_string_pretty(&Artifact {
        format_version: MODEL_FORMAT_VERSION,
        kind,
        model,
    })
    .expect("model serialisation cannot fail")
}

fn from_artifact_json<T: for<'de> Deserialize<'de>>(
    kind: ModelKind,
    text: &str,
) -> Result<T, ModelError> {
    let a: Artifact<T> =
        serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
    if a.format_version != MODEL_FORMAT_VERSION {
        return Err(ModelError::Format(format!(
            "unsupported format_version {}",
            a.format_version
        )));
    }
    if a.kind != kind {
        return Err(ModelError::Format(format!(
            "expected a {kind:?} model, found {:?}",
            a.kind
        )));
    }
    Ok(a.model)
}
