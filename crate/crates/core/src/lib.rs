//! CHAT transcript analysis: parsing and cleaning, POS annotation, feature
//! extraction, interpretable classifiers, evaluation and group statistics.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chat;
pub mod eval;
pub mod features;
pub mod models;
pub mod pipeline;
pub mod pos;
pub mod stats;
pub mod synth;
