use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Confusion counts with dementia (1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub control: ClassMetrics,
    pub dementia: ClassMetrics,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub confusion: Confusion,
}

/// Names of the scalar metrics, in report order.
pub const METRIC_NAMES: [&str; 4] = ["accuracy", "macro_precision", "macro_recall", "macro_f1"];

impl EvalMetrics {
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "accuracy" => self.accuracy,
            "macro_precision" => self.macro_precision,
            "macro_recall" => self.macro_recall,
            "macro_f1" => self.macro_f1,
            "control_precision" => self.control.precision,
            "control_recall" => self.control.recall,
            "control_f1" => self.control.f1,
            "dementia_precision" => self.dementia.precision,
            "dementia_recall" => self.dementia.recall,
            "dementia_f1" => self.dementia.f1,
            _ => return None,
        })
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn class_metrics(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: tp + fn_,
    }
}

/// Zero denominators yield 0 (a class never predicted has precision 0).
pub fn compute_metrics(predicted: &[u8], truth: &[u8]) -> Result<EvalMetrics, EvalError> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let dementia = class_metrics(c.tp, c.fp, c.fn_);
    let control = class_metrics(c.tn, c.fn_, c.fp);
    Ok(EvalMetrics {
        accuracy: ratio(c.tp + c.tn, truth.len()),
        macro_precision: (control.precision + dementia.precision) / 2.0,
        macro_recall: (control.recall + dementia.recall) / 2.0,
        macro_f1: (control.f1 + dementia.f1) / 2.0,
        control,
        dementia,
        confusion: c,
    })
}
