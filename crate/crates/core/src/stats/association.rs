use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{benjamini_hochberg, cliffs_delta, mann_whitney_u, MwuMethod, StatsError};
use crate::chat::Label;
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StatsLevel {
    #[default]
    Transcript,
    Subject,
}

impl std::str::FromStr for StatsLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "transcript" => Ok(StatsLevel::Transcript),
            "subject" => Ok(StatsLevel::Subject),
            other => Err(format!(
                "unknown stats level `{other}` (expected transcript or subject)"
            )),
        }
    }
}

/// How a subject's transcripts collapse to one value per feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubjectAggregation {
    #[default]
    Mean,
    Median,
}

impl std::str::FromStr for SubjectAggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(SubjectAggregation::Mean),
            "median" => Ok(SubjectAggregation::Median),
            other => Err(format!(
                "unknown subject aggregation `{other}` (expected mean or median)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub feature: String,
    pub mean_control: f64,
    pub mean_dementia: f64,
    /// Positive when values are higher in the control group.
    pub cliffs_delta: f64,
    pub u_statistic: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub method: MwuMethod,
    pub n_control: usize,
    pub n_dementia: usize,
    /// Units dropped for a missing value.
    pub n_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationTable {
    pub level: StatsLevel,
    /// Sorted by |δ| descending, then p, then name.
    pub rows: Vec<AssociationResult>,
    /// Features not tested because a group had no observed value.
    pub skipped: Vec<String>,
}

struct Unit {
    label: Label,
    values: Vec<Option<f64>>,
}

fn aggregate(vals: &mut [f64], how: SubjectAggregation) -> Option<f64> {
    if vals.is_empty() {
        return None;
    }
    Some(match how {
        SubjectAggregation::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
        SubjectAggregation::Median => {
            vals.sort_by(f64::total_cmp);
            let n = vals.len();
            if n % 2 == 1 {
                vals[n / 2]
            } else {
                (vals[n / 2 - 1] + vals[n / 2]) / 2.0
            }
        }
    })
}

fn units(
    m: &FeatureMatrix,
    level: StatsLevel,
    how: SubjectAggregation,
) -> Result<Vec<Unit>, StatsError> {
    match level {
        StatsLevel::Transcript => Ok(m
            .rows
            .iter()
            .map(|r| Unit {
                label: r.id.label,
                values: r.values.clone(),
            })
            .collect()),
        StatsLevel::Subject => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, r) in m.rows.iter().enumerate() {
                groups.entry(r.id.subject_id.as_str()).or_default().push(i);
            }
            groups
                .into_iter()
                .map(|(subject, idx)| {
                    let label = m.rows[idx[0]].id.label;
                    if idx.iter().any(|&i| m.rows[i].id.label != label) {
                        return Err(StatsError::InconsistentLabel(subject.to_string()));
                    }
                    let values = (0..m.feature_names.len())
                        .map(|j| {
                            let mut v: Vec<f64> =
                                idx.iter().filter_map(|&i| m.rows[i].values[j]).collect();
                            aggregate(&mut v, how)
                        })
                        .collect();
                    Ok(Unit { label, values })
                })
                .collect()
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Test every feature for a control/dementia difference and adjust the
/// p-values across the table.
pub fn association_table(
    m: &FeatureMatrix,
    level: StatsLevel,
    how: SubjectAggregation,
) -> Result<AssociationTable, StatsError> {
    let units = units(m, level, how)?;
    for label in [Label::Control, Label::Dementia] {
        if !units.iter().any(|u| u.label == label) {
            return Err(StatsError::EmptyClass(label));
        }
    }
    let tested: Vec<Result<Option<AssociationResult>, StatsError>> = m
        .feature_names
        .par_iter()
        .enumerate()
        .map(|(j, name)| {
            let mut a = Vec::new();
            let mut b = Vec::new();
            let mut missing = 0;
            for u in &units {
                match (u.values[j], u.label) {
                    (None, _) => missing += 1,
                    (Some(v), Label::Control) => a.push(v),
                    (Some(v), Label::Dementia) => b.push(v),
                }
            }
            if a.is_empty() || b.is_empty() {
                return Ok(None);
            }
            let mwu = mann_whitney_u(&a, &b)?;
            Ok(Some(AssociationResult {
                feature: name.clone(),
                mean_control: mean(&a),
                mean_dementia: mean(&b),
                cliffs_delta: cliffs_delta(&a, &b)?,
                u_statistic: mwu.u,
                p_value: mwu.p_value,
                p_adjusted: f64::NAN,
                method: mwu.method,
                n_control: a.len(),
                n_dementia: b.len(),
                n_missing: missing,
            }))
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (name, r) in m.feature_names.iter().zip(tested) {
        match r? {
            Some(row) => rows.push(row),
            None => skipped.push(name.clone()),
        }
    }
    let p: Vec<f64> = rows.iter().map(|r| r.p_value).collect();
    for (r, q) in rows.iter_mut().zip(benjamini_hochberg(&p)?) {
        r.p_adjusted = q;
    }
    rows.sort_by(|x, y| {
        y.cliffs_delta
            .abs()
            .total_cmp(&x.cliffs_delta.abs())
            .then(x.p_value.total_cmp(&y.p_value))
            .then_with(|| x.feature.cmp(&y.feature))
    });
    Ok(AssociationTable {
        level,
        rows,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureRow, Representation, TranscriptRef};

    fn matrix(rows: &[(&str, Label, [Option<f64>; 2])]) -> FeatureMatrix {
        FeatureMatrix {
            representation: Representation::Raw,
            feature_names: vec!["flat".into(), "shift".into()],
            rows: rows
                .iter()
                .enumerate()
                .map(|(i, (s, l, v))| FeatureRow {
                    id: TranscriptRef {
                        subject_id: s.to_string(),
                        session_id: i as u32,
                        label: *l,
                        source: String::new(),
                    },
                    values: v.to_vec(),
                })
                .collect(),
            dropped_columns: vec![],
        }
    }

    fn basic() -> FeatureMatrix {
        matrix(&[
            ("a", Label::Control, [Some(1.0), Some(5.0)]),
            ("b", Label::Control, [Some(1.0), Some(6.0)]),
            ("c", Label::Control, [Some(1.0), None]),
            ("d", Label::Dementia, [Some(1.0), Some(1.0)]),
            ("e", Label::Dementia, [Some(1.0), Some(2.0)]),
        ])
    }

    #[test]
    fn flat_feature_last() {
        let t =
            association_table(&basic(), StatsLevel::Transcript, SubjectAggregation::Mean).unwrap();
        assert_eq!(t.rows[0].feature, "shift");
        assert_eq!(t.rows[0].cliffs_delta, 1.0);
        assert_eq!(t.rows[0].n_missing, 1);
        let flat = &t.rows[1];
        assert_eq!((flat.cliffs_delta, flat.p_value), (0.0, 1.0));
        assert!(t.rows.iter().all(|r| r.p_adjusted >= r.p_value));
    }

    #[test]
    fn subject_level_identity_with_single_transcripts() {
        let m = basic();
        let a = association_table(&m, StatsLevel::Transcript, SubjectAggregation::Mean).unwrap();
        let b = association_table(&m, StatsLevel::Subject, SubjectAggregation::Mean).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn subject_level_means() {
        let m = matrix(&[
            ("a", Label::Control, [Some(1.0), Some(4.0)]),
            ("a", Label::Control, [Some(1.0), Some(8.0)]),
            ("b", Label::Dementia, [Some(1.0), Some(1.0)]),
        ]);
        let t = association_table(&m, StatsLevel::Subject, SubjectAggregation::Mean).unwrap();
        assert_eq!(t.rows[0].mean_control, 6.0);
        assert_eq!(t.rows[0].n_control, 1);
    }

    #[test]
    fn errors() {
        let one = matrix(&[("a", Label::Control, [Some(1.0), Some(2.0)])]);
        assert_eq!(
            association_table(&one, StatsLevel::Transcript, SubjectAggregation::Mean),
            Err(StatsError::EmptyClass(Label::Dementia))
        );
        let mixed = matrix(&[
            ("a", Label::Control, [Some(1.0), Some(2.0)]),
            ("a", Label::Dementia, [Some(1.0), Some(2.0)]),
        ]);
        assert_eq!(
            association_table(&mixed, StatsLevel::Subject, SubjectAggregation::Mean),
            Err(StatsError::InconsistentLabel("a".into()))
        );
    }
}
