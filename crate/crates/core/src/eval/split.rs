use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    TranscriptStratified,
    SubjectGrouped,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::TranscriptStratified => "transcript_stratified",
            SplitKind::SubjectGrouped => "subject_grouped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub kind: SplitKind,
    /// Sorted ascending.
    pub train_indices: Vec<usize>,
    /// Sorted ascending.
    pub test_indices: Vec<usize>,
    pub seed: Option<u64>,
    pub fold_id: Option<usize>,
}

/// Hold out `round(n_c · fraction)` rows of each class, chosen by a seeded shuffle.
pub fn stratified_split(
    labels: &[u8],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitPlan, EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::BadFraction(test_fraction));
    }
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    for c in [0u8, 1] {
        by_class.entry(c).or_default();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut idx) in by_class {
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        if n_test == 0 || n_test == idx.len() {
            return Err(EvalError::ClassTooSmall {
                class,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        kind: SplitKind::TranscriptStratified,
        train_indices: train,
        test_indices: test,
        seed: Some(seed),
        fold_id: None,
    })
}

/// Partition subjects into `k` folds. Subjects are placed largest first
/// (ties by id) into the fold with the fewest rows (ties by fold index).
pub fn group_kfold(subjects: &[String], k: usize) -> Result<Vec<SplitPlan>, EvalError> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in subjects.iter().enumerate() {
        groups.entry(s.as_str()).or_default().push(i);
    }
    if k < 2 || groups.len() < k {
        return Err(EvalError::TooFewSubjects {
            subjects: groups.len(),
            folds: k,
        });
    }
    let mut order: Vec<(&str, Vec<usize>)> = groups.into_iter().collect();
    order.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (_, rows) in order {
        let lightest = (0..k).min_by_key(|&f| (folds[f].len(), f)).expect("k >= 2");
        folds[lightest].extend(rows);
    }
    Ok(folds
        .into_iter()
        .enumerate()
        .map(|(f, mut test)| {
            test.sort_unstable();
            let train = (0..subjects.len())
                .filter(|i| test.binary_search(i).is_err())
                .collect();
            SplitPlan {
                kind: SplitKind::SubjectGrouped,
                train_indices: train,
                test_indices: test,
                seed: None,
                fold_id: Some(f),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn balanced_hundred() {
        let y: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let p = stratified_split(&y, 0.2, 7).unwrap();
        assert_eq!(p.test_indices.len(), 20);
        assert_eq!(p.test_indices.iter().filter(|&&i| y[i] == 1).count(), 10);
        assert_eq!(p, stratified_split(&y, 0.2, 7).unwrap());
        assert_ne!(p, stratified_split(&y, 0.2, 8).unwrap());
    }

    #[test]
    fn corpus_sized_split() {
        let mut y = vec![0u8; 243];
        y.extend(vec![1u8; 257]);
        let p = stratified_split(&y, 0.2, 1).unwrap();
        let n1 = p.test_indices.iter().filter(|&&i| y[i] == 1).count();
        assert_eq!((p.test_indices.len() - n1, n1), (49, 51));
    }

    #[test]
    fn class_too_small() {
        assert!(matches!(
            stratified_split(&[0, 0, 0, 0, 0, 1], 0.2, 1),
            Err(EvalError::ClassTooSmall { class: 1, .. })
        ));
        assert!(matches!(
            stratified_split(&[0, 0, 0, 0, 0], 0.2, 1),
            Err(EvalError::ClassTooSmall { class: 1, count: 0 })
        ));
    }

    #[test]
    fn ten_singletons() {
        let s: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let folds = group_kfold(&s, 5).unwrap();
        assert!(folds.iter().all(|f| f.test_indices.len() == 2));
    }

    #[test]
    fn grouped_and_covering() {
        let s: Vec<String> = ["a", "a", "a", "b", "c", "c", "d", "e", "f", "f", "g"]
            .iter()
            .map(|x| x.to_string())
            .collect();
        let folds = group_kfold(&s, 3).unwrap();
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test_indices.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..s.len()).collect::<Vec<_>>());
        for f in &folds {
            let tr: BTreeSet<&String> = f.train_indices.iter().map(|&i| &s[i]).collect();
            let te: BTreeSet<&String> = f.test_indices.iter().map(|&i| &s[i]).collect();
            assert!(tr.is_disjoint(&te));
        }
        let a_fold: BTreeSet<usize> = (0..3)
            .map(|i| {
                folds
                    .iter()
                    .position(|f| f.test_indices.contains(&i))
                    .unwrap()
            })
            .collect();
        assert_eq!(a_fold.len(), 1);
    }

    #[test]
    fn too_few_subjects() {
        let s: Vec<String> = vec!["a".into(), "b".into(), "a".into()];
        assert_eq!(
            group_kfold(&s, 5),
            Err(EvalError::TooFewSubjects {
                subjects: 2,
                folds: 5
            })
        );
    }
}
