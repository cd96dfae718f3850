use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_training, class_weights, fit_standardizer, from_artifact_json, to_artifact_json,
    ClassWeighting, ModelError, ModelKind, StandardizerParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `floor(sqrt(d))`, at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
    pub class_weighting: ClassWeighting,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Draw an n-sized bootstrap per tree; otherwise every tree sees all rows once.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 200,
            max_features: MaxFeatures::Sqrt,
            seed: 42,
            class_weighting: ClassWeighting::Balanced,
            min_leaf: 1,
            max_depth: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Rows with `x[feature] <= threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Total training weight reaching the node.
    pub weight: f64,
    /// Weighted Gini impurity.
    pub impurity: f64,
    /// Class distribution by weight; sums to 1.
    pub value: [f64; 2],
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn leaf_value(&self, x: &[f64]) -> [f64; 2] {
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            i = if x[s.feature] <= s.threshold {
                s.left
            } else {
                s.right
            };
        }
        self.nodes[i].value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub config: ForestConfig,
    pub class_weights: [f64; 2],
    /// Imputation only; trees are scale-invariant.
    pub standardizer: StandardizerParams,
    pub feature_names: Vec<String>,
}

/// Gains closer than this are ties; summation order must not pick the split.
fn tie_tolerance(class_weight: [f64; 2]) -> f64 {
    1e-12 * (class_weight[0] + class_weight[1]).max(1.0)
}

fn gini(w: [f64; 2]) -> f64 {
    let t = w[0] + w[1];
    if t <= 0.0 {
        return 0.0;
    }
    let (a, b) = (w[0] / t, w[1] / t);
    1.0 - a * a - b * b
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    /// Class weight times bootstrap multiplicity, per row.
    w: Vec<f64>,
    k: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    nodes: Vec<TreeNode>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn class_weight(&self, idx: &[usize]) -> [f64; 2] {
        let mut cw = [0.0; 2];
        for &i in idx {
            cw[self.y[i] as usize] += self.w[i];
        }
        cw
    }

    fn best_split_on(&self, idx: &mut [usize], f: usize, parent: f64) -> Option<Candidate> {
        // Stable sort by value then row index keeps sweeps reproducible.
        idx.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
        let total = self.class_weight(idx);
        let tol = tie_tolerance(total);
        let mut left = [0.0; 2];
        let mut best: Option<Candidate> = None;
        for pos in 0..idx.len() - 1 {
            let i = idx[pos];
            left[self.y[i] as usize] += self.w[i];
            let (a, b) = (self.x[i][f], self.x[idx[pos + 1]][f]);
            if a == b || pos + 1 < self.min_leaf || idx.len() - pos - 1 < self.min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let gain =
                parent - (left[0] + left[1]) * gini(left) - (right[0] + right[1]) * gini(right);
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            if best.as_ref().is_none_or(|c| gain > c.gain + tol) {
                best = Some(Candidate {
                    gain,
                    feature: f,
                    threshold,
                });
            }
        }
        best
    }

    /// Evaluate features in random order until `k` non-constant ones have
    /// been scored. Best gain wins; ties go to the lower feature index, then
    /// the lower threshold.
    fn find_split(
        &self,
        idx: &mut [usize],
        parent: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<Candidate> {
        let d = self.x[0].len();
        let mut order: Vec<usize> = (0..d).collect();
        let tol = tie_tolerance(self.class_weight(idx));
        let mut best: Option<Candidate> = None;
        let mut scored = 0;
        for drawn in 0..d {
            if scored == self.k {
                break;
            }
            let j = rng.random_range(drawn..d);
            order.swap(drawn, j);
            let f = order[drawn];
            let first = self.x[idx[0]][f];
            if idx.iter().all(|&i| self.x[i][f] == first) {
                continue;
            }
            scored += 1;
            if let Some(c) = self.best_split_on(idx, f, parent) {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        c.gain > b.gain + tol
                            || ((c.gain - b.gain).abs() <= tol
                                && (c.feature < b.feature
                                    || (c.feature == b.feature && c.threshold < b.threshold)))
                    }
                };
                if better {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let cw = self.class_weight(idx);
        let weight = cw[0] + cw[1];
        let impurity = gini(cw);
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            weight,
            impurity,
            value: [cw[0] / weight, cw[1] / weight],
            split: None,
        });
        let can_split = impurity > 0.0
            && idx.len() >= 2 * self.min_leaf
            && self.max_depth.is_none_or(|m| depth < m);
        if !can_split {
            return id;
        }
        let Some(c) = self.find_split(idx, weight * impurity, rng) else {
            return id;
        };
        idx.sort_by(|&a, &b| {
            (self.x[a][c.feature] > c.threshold)
                .cmp(&(self.x[b][c.feature] > c.threshold))
                .then(a.cmp(&b))
        });
        let n_left = idx
            .iter()
            .filter(|&&i| self.x[i][c.feature] <= c.threshold)
            .count();
        let (l, r) = idx.split_at_mut(n_left);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id].split = Some(Split {
            feature: c.feature,
            threshold: c.threshold,
            left,
            right,
        });
        id
    }
}

fn fit_tree(
    x: &[Vec<f64>],
    y: &[u8],
    cw: [f64; 2],
    cfg: &ForestConfig,
    tree: usize,
) -> DecisionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(tree as u64);
    let n = x.len();
    let mut mult = vec![0u32; n];
    if cfg.bootstrap {
        for _ in 0..n {
            mult[rng.random_range(0..n)] += 1;
        }
    } else {
        mult.fill(1);
    }
    let mut idx: Vec<usize> = (0..n).filter(|&i| mult[i] > 0).collect();
    let mut b = Builder {
        x,
        y,
        w: (0..n).map(|i| mult[i] as f64 * cw[y[i] as usize]).collect(),
        k: cfg.max_features.resolve(x[0].len()),
        min_leaf: cfg.min_leaf.max(1),
        max_depth: cfg.max_depth,
        nodes: Vec::new(),
    };
    b.grow(&mut idx, 0, &mut rng);
    DecisionTree { nodes: b.nodes }
}

/// Fit a random forest. Tree `t` draws from stream `t` of a ChaCha generator
/// seeded with `cfg.seed`, so results do not depend on the thread count.
pub fn fit_forest(
    rows: &[Vec<Option<f64>>],
    y: &[u8],
    feature_names: &[String],
    cfg: &ForestConfig,
) -> Result<ForestModel, ModelError> {
    check_training(rows, y, feature_names)?;
    if feature_names.is_empty() {
        return Err(ModelError::ArityMismatch {
            expected: 1,
            found: 0,
        });
    }
    let cw = class_weights(y, cfg.class_weighting)?;
    let standardizer = StandardizerParams::identity_from(&fit_standardizer(rows)?);
    let x = standardizer.apply_all(rows)?;
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| fit_tree(&x, y, cw, cfg, t))
        .collect();
    Ok(ForestModel {
        trees,
        config: cfg.clone(),
        class_weights: cw,
        standardizer,
        feature_names: feature_names.to_vec(),
    })
}

impl ForestModel {
    /// Mean of the per-tree leaf distributions; label 1 when its share is ≥ 0.5.
    pub fn predict(&self, row: &[Option<f64>]) -> Result<(f64, u8), ModelError> {
        let x = self.standardizer.apply(row)?;
        let p1 =
            self.trees.iter().map(|t| t.leaf_value(&x)[1]).sum::<f64>() / self.trees.len() as f64;
        Ok((p1, (p1 >= 0.5) as u8))
    }

    pub fn predict_labels(&self, rows: &[Vec<Option<f64>>]) -> Result<Vec<u8>, ModelError> {
        rows.iter()
            .map(|r| self.predict(r).map(|(_, l)| l))
            .collect()
    }

    pub fn to_json(&self) -> String {
        to_artifact_json(ModelKind::Forest, self)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        from_artifact_json(ModelKind::Forest, text)
    }
}
