use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::metrics::{EvalMetrics, METRIC_NAMES};
use super::EvalError;
use crate::models::ImportanceReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n − 1).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSummary {
    pub feature: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAggregate {
    pub n_folds: usize,
    pub metrics: BTreeMap<String, MeanStd>,
    /// Sorted by |mean| descending, then name.
    pub importances: Vec<ImportanceSummary>,
}

/// Mean and sample sd. Values are summed in sorted order so the result does
/// not depend on fold order.
pub fn mean_std(values: &[f64]) -> MeanStd {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    dev.sort_by(f64::total_cmp);
    let std = if v.len() < 2 {
        0.0
    } else {
        (dev.iter().sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanStd { mean, std }
}

/// Combine per-fold metrics and importances. Importances are aligned by
/// feature name; a feature missing from a fold counts as 0 there.
pub fn aggregate_folds(
    metrics: &[EvalMetrics],
    importances: &[ImportanceReport],
) -> Result<FoldAggregate, EvalError> {
    if metrics.len() < 2 {
        return Err(EvalError::TooFewFolds(metrics.len()));
    }
    let mut names: Vec<String> = METRIC_NAMES.iter().map(|s| s.to_string()).collect();
    for c in ["control", "dementia"] {
        for m in ["precision", "recall", "f1"] {
            names.push(format!("{c}_{m}"));
        }
    }
    let summary = names
        .into_iter()
        .map(|n| {
            let vals: Vec<f64> = metrics
                .iter()
                .map(|m| m.get(&n).expect("known metric"))
                .collect();
            (n, mean_std(&vals))
        })
        .collect();

    let features: BTreeSet<&str> = importances
        .iter()
        .flat_map(|r| r.entries.iter().map(|e| e.feature.as_str()))
        .collect();
    let mut imp: Vec<ImportanceSummary> = features
        .into_iter()
        .map(|f| {
            let vals: Vec<f64> = importances
                .iter()
                .map(|r| r.score_of(f).unwrap_or(0.0))
                .collect();
            let ms = mean_std(&vals);
            ImportanceSummary {
                feature: f.to_string(),
                mean: ms.mean,
                std: ms.std,
            }
        })
        .collect();
    imp.sort_by(|a, b| {
        b.mean
            .abs()
            .total_cmp(&a.mean.abs())
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(FoldAggregate {
        n_folds: metrics.len(),
        metrics: summary,
        importances: imp,
    })
}
