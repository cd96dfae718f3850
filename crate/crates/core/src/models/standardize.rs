use serde::{Deserialize, Serialize};

use super::ModelError;

/// Per-column imputation and scaling fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerParams {
    pub medians: Vec<f64>,
    pub means: Vec<f64>,
    /// Population standard deviation after imputation.
    pub sds: Vec<f64>,
    pub zero_variance: Vec<bool>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Fit medians for imputation, then mean and population sd of the imputed
/// columns. A column with no observed value imputes to 0.
pub fn fit_standardizer(rows: &[Vec<Option<f64>>]) -> Result<StandardizerParams, ModelError> {
    if rows.len() < 2 {
        return Err(ModelError::InsufficientRows(rows.len()));
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(ModelError::ArityMismatch {
            expected: d,
            found: r.len(),
        });
    }
    let n = rows.len() as f64;
    let mut p = StandardizerParams {
        medians: Vec::with_capacity(d),
        means: Vec::with_capacity(d),
        sds: Vec::with_capacity(d),
        zero_variance: Vec::with_capacity(d),
    };
    for j in 0..d {
        let med = median(rows.iter().filter_map(|r| r[j]).collect());
        let col: Vec<f64> = rows.iter().map(|r| r[j].unwrap_or(med)).collect();
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        // Relative threshold so that rounding noise in a constant column is not scaled up.
        let zero = !(sd > 1e-12 * mean.abs().max(1.0));
        p.medians.push(med);
        p.means.push(mean);
        p.sds.push(sd);
        p.zero_variance.push(zero);
    }
    Ok(p)
}

impl StandardizerParams {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, row: &[Option<f64>]) -> Result<Vec<f64>, ModelError> {
        if row.len() != self.dim() {
            return Err(ModelError::ArityMismatch {
                expected: self.dim(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, v)| {
                if self.zero_variance[j] {
                    0.0
                } else {
                    (v.unwrap_or(self.medians[j]) - self.means[j]) / self.sds[j]
                }
            })
            .collect())
    }

    pub fn apply_all(&self, rows: &[Vec<Option<f64>>]) -> Result<Vec<Vec<f64>>, ModelError> {
        rows.iter().map(|r| self.apply(r)).collect()
    }

    /// Pass-through parameters for models that do not need scaling.
    /// Missing values still impute to the fitted medians.
    pub fn identity_from(fitted: &StandardizerParams) -> StandardizerParams {
        let d = fitted.dim();
        StandardizerParams {
            medians: fitted.medians.clone(),
            means: vec![0.0; d],
            sds: vec![1.0; d],
            zero_variance: vec![false; d],
        }
    }
}
