//! Per-transcript linguistic features under three token representations.

mod extract;
mod lexical;
mod matrix;

pub use extract::{
    build_token_stream, compute_content_word_ratio, compute_pos_diversity, compute_pos_proportions,
    compute_semantic_coherence, compute_structural, extract_feature_vector, Structural,
};
pub use lexical::{compute_mattr, compute_ttr};
pub use matrix::{build_feature_matrix, FeatureMatrix, FeatureRow, MatrixIoError, TranscriptRef};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pos::Upos;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("transcript has no word tokens")]
    EmptyTranscript,
    #[error("token stream is empty")]
    EmptyStream,
    #[error("MATTR window must be positive")]
    ZeroWindow,
    #[error("no non-punctuation tokens")]
    NoWordTokens,
    #[error("transcript is not fully POS-tagged")]
    NotTagged,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Lower-cased word surfaces.
    Raw,
    /// Content words keep their surface, every other token becomes its tag.
    PosEnhanced,
    /// Every token becomes its tag.
    PosOnly,
}

impl Representation {
    pub const ALL: [Representation; 3] = [
        Representation::Raw,
        Representation::PosEnhanced,
        Representation::PosOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Representation::Raw => "raw",
            Representation::PosEnhanced => "pos_enhanced",
            Representation::PosOnly => "pos_only",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "raw" => Ok(Representation::Raw),
            "pos_enhanced" => Ok(Representation::PosEnhanced),
            "pos_only" => Ok(Representation::PosOnly),
            other => Err(format!(
                "unknown representation `{other}` (expected raw, pos_enhanced or pos_only)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub mattr_window: usize,
    /// Count PROPN as a content word alongside NOUN, VERB, ADJ, ADV.
    pub propn_is_content: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            mattr_window: 50,
            propn_is_content: true,
        }
    }
}

impl FeatureConfig {
    pub fn is_content(&self, tag: Upos) -> bool {
        matches!(tag, Upos::Noun | Upos::Verb | Upos::Adj | Upos::Adv)
            || (self.propn_is_content && tag == Upos::Propn)
    }
}

/// Scalar features shared by every representation, in column order.
pub const SCALAR_FEATURES: [&str; 9] = [
    "num_tokens",
    "num_types",
    "TTR",
    "MATTR",
    "num_sentences",
    "mean_sent_len",
    "content_word_ratio",
    "semantic_coherence",
    "pos_diversity",
];

/// Column names produced for a representation, before dropping all-missing columns.
pub fn feature_names(r: Representation) -> Vec<String> {
    let mut names: Vec<String> = SCALAR_FEATURES.iter().map(|s| s.to_string()).collect();
    if r != Representation::Raw {
        names.extend(Upos::ALL.iter().map(|t| t.as_str().to_string()));
    }
    names
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<Option<f64>>,
    pub transcript: TranscriptRef,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<Option<f64>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}
