use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    check_training, class_weights, fit_standardizer, from_artifact_json, to_artifact_json,
    ClassWeighting, ModelError, ModelKind, StandardizerParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// L2 strength on the coefficients in standardised space.
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once the gradient norm falls to this value.
    pub tol: f64,
    pub class_weighting: ClassWeighting,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            lambda: 1.0,
            max_iter: 1000,
            tol: 1e-6,
            class_weighting: ClassWeighting::Balanced,
        }
    }
}

// Hash over the bit patterns so configs can feed artifact hashes.
impl std::hash::Hash for LogisticConfig {
    fn hash<H: std::hash::Hasher>(&self, h: &mut H) {
        self.lambda.to_bits().hash(h);
        self.max_iter.hash(h);
        self.tol.to_bits().hash(h);
        self.class_weighting.hash(h);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub bias: f64,
    pub coefficients: Vec<f64>,
    pub regularization_strength: f64,
    pub class_weights: [f64; 2],
    pub standardizer: StandardizerParams,
    pub feature_names: Vec<String>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value before the first step and after every accepted step.
    pub loss_history: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Weighted, L2-penalised logistic loss over standardised rows.
///
/// `L(θ) = (1/W) Σ wᵢ [softplus(zᵢ) − yᵢ zᵢ] + (λ/2) ‖β‖²` with
/// `θ = (β₀, β)`, `zᵢ = β₀ + βᵀxᵢ` and `W = Σ wᵢ`. The bias is not penalised.
pub struct LogisticObjective<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    w: Vec<f64>,
    total_w: f64,
    lambda: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(x: &'a [Vec<f64>], y: &'a [u8], sample_weights: Vec<f64>, lambda: f64) -> Self {
        let total_w = sample_weights.iter().sum();
        LogisticObjective {
            x,
            y,
            w: sample_weights,
            total_w,
            lambda,
        }
    }

    fn margin(&self, theta: &[f64], row: &[f64]) -> f64 {
        theta[0] + row.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        let data: f64 = self
            .x
            .iter()
            .zip(self.y)
            .zip(&self.w)
            .map(|((row, &y), w)| {
                let z = self.margin(theta, row);
                w * (softplus(z) - y as f64 * z)
            })
            .sum();
        let penalty: f64 = theta[1..].iter().map(|b| b * b).sum();
        data / self.total_w + 0.5 * self.lambda * penalty
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        for ((row, &y), w) in self.x.iter().zip(self.y).zip(&self.w) {
            let r = w * (sigmoid(self.margin(theta, row)) - y as f64) / self.total_w;
            g[0] += r;
            for (gj, xj) in g[1..].iter_mut().zip(row) {
                *gj += r * xj;
            }
        }
        for (gj, b) in g[1..].iter_mut().zip(&theta[1..]) {
            *gj += self.lambda * b;
        }
        g
    }

    fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let p = theta.len();
        let mut h = DMatrix::zeros(p, p);
        let mut xt = vec![1.0; p];
        for (row, w) in self.x.iter().zip(&self.w) {
            let s = sigmoid(self.margin(theta, row));
            let c = w * s * (1.0 - s) / self.total_w;
            xt[1..].copy_from_slice(row);
            for a in 0..p {
                for b in 0..=a {
                    h[(a, b)] += c * xt[a] * xt[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        for j in 1..p {
            h[(j, j)] += self.lambda;
        }
        h
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton with Armijo backtracking. Falls back to steepest descent
/// when the Newton system is not positive definite. Every accepted step
/// strictly decreases the objective.
fn minimise(
    obj: &LogisticObjective,
    p: usize,
    cfg: &LogisticConfig,
) -> Result<(Vec<f64>, usize, bool, Vec<f64>), ModelError> {
    let mut theta = vec![0.0; p];
    let mut loss = obj.loss(&theta);
    let mut history = vec![loss];
    for it in 0..cfg.max_iter {
        let g = obj.gradient(&theta);
        if !g.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFiniteLoss);
        }
        if norm(&g) <= cfg.tol {
            return Ok((theta, it, true, history));
        }
        let gv = DVector::from_column_slice(&g);
        let mut dir: Vec<f64> = match obj.hessian(&theta).cholesky() {
            Some(ch) => (-ch.solve(&gv)).iter().copied().collect(),
            None => g.iter().map(|v| -v).collect(),
        };
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, g)| d * g).sum();
        if !(slope < 0.0) {
            dir = g.iter().map(|v| -v).collect();
            slope = -norm(&g).powi(2);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let l = obj.loss(&cand);
            if l.is_finite() && l <= loss + 1e-4 * step * slope && l < loss {
                accepted = Some((cand, l));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand, l)) => {
                theta = cand;
                loss = l;
                history.push(loss);
            }
            // No representable decrease remains: at the optimum to machine precision.
            None => return Ok((theta, it, norm(&g) <= cfg.tol.max(1e-8), history)),
        }
    }
    if !loss.is_finite() {
        return Err(ModelError::NonFiniteLoss);
    }
    let converged = norm(&obj.gradient(&theta)) <= cfg.tol;
    Ok((theta, cfg.max_iter, converged, history))
}

/// Fit on raw rows. The standardiser (median imputation and scaling) is fitted
/// on exactly these rows, so pass training rows only.
pub fn fit_logistic(
    rows: &[Vec<Option<f64>>],
    y: &[u8],
    feature_names: &[String],
    cfg: &LogisticConfig,
) -> Result<LogisticModel, ModelError> {
    check_training(rows, y, feature_names)?;
    let cw = class_weights(y, cfg.class_weighting)?;
    let standardizer = fit_standardizer(rows)?;
    let x = standardizer.apply_all(rows)?;
    let w: Vec<f64> = y.iter().map(|&c| cw[c as usize]).collect();
    let obj = LogisticObjective::new(&x, y, w, cfg.lambda);
    let (theta, iterations, converged, loss_history) =
        minimise(&obj, feature_names.len() + 1, cfg)?;
    Ok(LogisticModel {
        bias: theta[0],
        coefficients: theta[1..].to_vec(),
        regularization_strength: cfg.lambda,
        class_weights: cw,
        standardizer,
        feature_names: feature_names.to_vec(),
        iterations,
        converged,
        loss_history,
    })
}

impl LogisticModel {
    /// Probability of class 1 and the thresholded label (`p ≥ 0.5`).
    pub fn predict(&self, row: &[Option<f64>]) -> Result<(f64, u8), ModelError> {
        let x = self.standardizer.apply(row)?;
        let z = self.bias
            + x.iter()
                .zip(&self.coefficients)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        let p = sigmoid(z);
        Ok((p, (p >= 0.5) as u8))
    }

    pub fn predict_labels(&self, rows: &[Vec<Option<f64>>]) -> Result<Vec<u8>, ModelError> {
        rows.iter()
            .map(|r| self.predict(r).map(|(_, l)| l))
            .collect()
    }

    pub fn to_json(&self) -> String {
        to_artifact_json(ModelKind::Logistic, self)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        from_artifact_json(ModelKind::Logistic, text)
    }
}
