use serde::{Deserialize, Serialize};

use super::{ForestModel, LogisticModel};

pub const DEFAULT_TOP_K: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Forest,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Forest => "forest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub score: f64,
    /// Coefficient sign for linear models; positive leans towards dementia.
    pub sign: Option<i8>,
}

/// Importance of every feature, sorted by |score| descending then name.
/// `top_k` marks how many entries are reported; all are kept for aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub model_kind: ModelKind,
    pub entries: Vec<ImportanceEntry>,
    pub top_k: usize,
}

impl ImportanceReport {
    pub fn new(model_kind: ModelKind, mut entries: Vec<ImportanceEntry>, top_k: usize) -> Self {
        entries.sort_by(|a, b| {
            b.score
                .abs()
                .total_cmp(&a.score.abs())
                .then_with(|| a.feature.cmp(&b.feature))
        });
        ImportanceReport {
            model_kind,
            entries,
            top_k,
        }
    }

    pub fn top(&self) -> &[ImportanceEntry] {
        &self.entries[..self.top_k.min(self.entries.len())]
    }

    pub fn score_of(&self, feature: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.feature == feature)
            .map(|e| e.score)
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Signed coefficients in standardised space.
pub fn logistic_importance(m: &LogisticModel, top_k: usize) -> ImportanceReport {
    let entries = m
        .feature_names
        .iter()
        .zip(&m.coefficients)
        .map(|(n, &c)| ImportanceEntry {
            feature: n.clone(),
            score: c,
            sign: Some(sign(c)),
        })
        .collect();
    ImportanceReport::new(ModelKind::Logistic, entries, top_k)
}

/// Mean decrease in impurity. Per tree, each split contributes
/// `W_t g_t − W_L g_L − W_R g_R` divided by the root weight; trees are
/// averaged and the result normalised to sum to 1 (all zeros if no tree splits).
pub fn forest_mdi_importance(m: &ForestModel, top_k: usize) -> ImportanceReport {
    let d = m.feature_names.len();
    let mut total = vec![0.0; d];
    for t in &m.trees {
        let root = t.nodes[0].weight;
        for n in &t.nodes {
            if let Some(s) = n.split {
                let (l, r) = (&t.nodes[s.left], &t.nodes[s.right]);
                let dec = n.weight * n.impurity - l.weight * l.impurity - r.weight * r.impurity;
                total[s.feature] += dec.max(0.0) / root;
            }
        }
    }
    let n_trees = m.trees.len().max(1) as f64;
    total.iter_mut().for_each(|v| *v /= n_trees);
    let sum: f64 = total.iter().sum();
    if sum > 0.0 {
        total.iter_mut().for_each(|v| *v /= sum);
    }
    let entries = m
        .feature_names
        .iter()
        .zip(total)
        .map(|(n, s)| ImportanceEntry {
            feature: n.clone(),
            score: s,
            sign: None,
        })
        .collect();
    ImportanceReport::new(ModelKind::Forest, entries, top_k)
}
