//! Mann–Whitney U, Cliff's delta and Benjamini–Hochberg over feature tables.

mod association;
mod bh;
mod cliff;
mod mwu;

pub use association::{
    association_table, AssociationResult, AssociationTable, StatsLevel, SubjectAggregation,
};
pub use bh::benjamini_hochberg;
pub use cliff::cliffs_delta;
pub use mwu::{
    mann_whitney_u, mwu_exact_p, mwu_normal_p, u_null_counts, u_statistic, MwuMethod, MwuResult,
    EXACT_MAX_CELLS,
};

use thiserror::Error;

use crate::chat::Label;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("a sample group is empty")]
    EmptyGroup,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("p-value {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("no {0} rows")]
    EmptyClass(Label),
    #[error("subject {0} has transcripts with different labels")]
    InconsistentLabel(String),
}
