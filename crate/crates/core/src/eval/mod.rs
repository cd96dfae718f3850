//! Transcript-level stratified and subject-level grouped evaluation.

mod aggregate;
mod metrics;
mod split;

pub use aggregate::{aggregate_folds, mean_std, FoldAggregate, ImportanceSummary, MeanStd};
pub use metrics::{compute_metrics, ClassMetrics, Confusion, EvalMetrics, METRIC_NAMES};
pub use split::{group_kfold, stratified_split, SplitKind, SplitPlan};

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::models::{
    fit_forest, fit_logistic, forest_mdi_importance, logistic_importance, ForestConfig,
    ForestModel, ImportanceReport, LogisticConfig, LogisticModel, ModelError, ModelKind,
    DEFAULT_TOP_K,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("class {class} has {count} row(s); the split would leave a side empty")]
    ClassTooSmall { class: u8, count: usize },
    #[error("test fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("{subjects} distinct subject(s) cannot fill {folds} folds")]
    TooFewSubjects { subjects: usize, folds: usize },
    #[error("{predicted} predictions for {truth} labels")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("need at least 2 folds to aggregate, got {0}")]
    TooFewFolds(usize),
    #[error("leakage: {0}")]
    Leakage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Protocol {
    TranscriptStratified { test_fraction: f64, seed: u64 },
    SubjectGrouped { k: usize },
}

impl Protocol {
    pub fn split_kind(&self) -> SplitKind {
        match self {
            Protocol::TranscriptStratified { .. } => SplitKind::TranscriptStratified,
            Protocol::SubjectGrouped { .. } => SplitKind::SubjectGrouped,
        }
    }

    pub fn plans(&self, matrix: &FeatureMatrix) -> Result<Vec<SplitPlan>, EvalError> {
        match *self {
            Protocol::TranscriptStratified {
                test_fraction,
                seed,
            } => Ok(vec![stratified_split(
                &matrix.labels(),
                test_fraction,
                seed,
            )?]),
            Protocol::SubjectGrouped { k } => group_kfold(&matrix.subjects(), k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelSpec {
    pub logistic: LogisticConfig,
    pub forest: ForestConfig,
    pub top_k: usize,
}

impl ModelSpec {
    pub fn new() -> Self {
        ModelSpec {
            top_k: DEFAULT_TOP_K,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Logistic(LogisticModel),
    Forest(ForestModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub plan: SplitPlan,
    pub metrics: EvalMetrics,
    pub importance: ImportanceReport,
    /// `(row index, predicted label, probability of class 1)` for test rows.
    pub predictions: Vec<(usize, u8, f64)>,
    #[serde(skip)]
    pub model: Option<FittedModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub protocol: Protocol,
    pub model_kind: ModelKind,
    pub representation: crate::features::Representation,
    pub folds: Vec<FoldResult>,
    /// Present when there are at least two folds.
    pub aggregate: Option<FoldAggregate>,
}

/// Refuse plans whose sides overlap, or whose subject sets intersect for a
/// grouped split.
pub fn check_leakage(matrix: &FeatureMatrix, plan: &SplitPlan) -> Result<(), EvalError> {
    let train: BTreeSet<usize> = plan.train_indices.iter().copied().collect();
    if let Some(i) = plan.test_indices.iter().find(|i| train.contains(i)) {
        return Err(EvalError::Leakage(format!(
            "row {i} is in both train and test"
        )));
    }
    let n = matrix.rows.len();
    if let Some(i) = plan
        .train_indices
        .iter()
        .chain(&plan.test_indices)
        .find(|&&i| i >= n)
    {
        return Err(EvalError::Leakage(format!(
            "row {i} out of range for {n} rows"
        )));
    }
    if plan.kind == SplitKind::SubjectGrouped {
        let subj = |idx: &[usize]| -> BTreeSet<&str> {
            idx.iter()
                .map(|&i| matrix.rows[i].id.subject_id.as_str())
                .collect()
        };
        let (a, b) = (subj(&plan.train_indices), subj(&plan.test_indices));
        if let Some(s) = a.intersection(&b).next() {
            return Err(EvalError::Leakage(format!(
                "subject {s} is in both train and test"
            )));
        }
    }
    Ok(())
}

/// Fit on the plan's training rows only and score its test rows.
pub fn run_fold(
    matrix: &FeatureMatrix,
    plan: &SplitPlan,
    kind: ModelKind,
    spec: &ModelSpec,
) -> Result<FoldResult, EvalError> {
    check_leakage(matrix, plan)?;
    let pick = |idx: &[usize]| -> (Vec<Vec<Option<f64>>>, Vec<u8>) {
        idx.iter()
            .map(|&i| {
                (
                    matrix.rows[i].values.clone(),
                    matrix.rows[i].id.label.as_class(),
                )
            })
            .unzip()
    };
    let (x_train, y_train) = pick(&plan.train_indices);
    let (x_test, y_test) = pick(&plan.test_indices);
    let names = &matrix.feature_names;
    let (model, importance, probs) = match kind {
        ModelKind::Logistic => {
            let m = fit_logistic(&x_train, &y_train, names, &spec.logistic)?;
            let probs = x_test
                .iter()
                .map(|r| m.predict(r))
                .collect::<Result<Vec<_>, _>>()?;
            let imp = logistic_importance(&m, spec.top_k);
            (FittedModel::Logistic(m), imp, probs)
        }
        ModelKind::Forest => {
            let m = fit_forest(&x_train, &y_train, names, &spec.forest)?;
            let probs = x_test
                .iter()
                .map(|r| m.predict(r))
                .collect::<Result<Vec<_>, _>>()?;
            let imp = forest_mdi_importance(&m, spec.top_k);
            (FittedModel::Forest(m), imp, probs)
        }
    };
    let predicted: Vec<u8> = probs.iter().map(|p| p.1).collect();
    let metrics = compute_metrics(&predicted, &y_test)?;
    Ok(FoldResult {
        plan: plan.clone(),
        metrics,
        importance,
        predictions: plan
            .test_indices
            .iter()
            .zip(&probs)
            .map(|(&i, &(p, l))| (i, l, p))
            .collect(),
        model: Some(model),
    })
}

/// Run every fold of a protocol in parallel and aggregate in fold order.
pub fn evaluate(
    matrix: &FeatureMatrix,
    protocol: &Protocol,
    kind: ModelKind,
    spec: &ModelSpec,
) -> Result<EvaluationResult, EvalError> {
    let plans = protocol.plans(matrix)?;
    let folds: Vec<FoldResult> = plans
        .par_iter()
        .map(|p| run_fold(matrix, p, kind, spec))
        .collect::<Result<_, _>>()?;
    let aggregate = if folds.len() >= 2 {
        let m: Vec<EvalMetrics> = folds.iter().map(|f| f.metrics.clone()).collect();
        let i: Vec<ImportanceReport> = folds.iter().map(|f| f.importance.clone()).collect();
        Some(aggregate_folds(&m, &i)?)
    } else {
        None
    };
    Ok(EvaluationResult {
        protocol: protocol.clone(),
        model_kind: kind,
        representation: matrix.representation,
        folds,
        aggregate,
    })
}
