use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::StatsError;

/// Largest `m · n` for which the exact null distribution is enumerated.
pub const EXACT_MAX_CELLS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwuMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwuResult {
    /// `U` for the first sample: `R_A − m(m+1)/2`.
    pub u: f64,
    pub p_value: f64,
    pub method: MwuMethod,
}

/// Average ranks (1-based) of the pooled sample, plus the tie-group sizes.
fn pooled_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for item in &pooled[i..j] {
            ranks[item.1] = avg;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn check(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptyGroup);
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

pub fn u_statistic(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    check(a, b)?;
    let (ranks, _) = pooled_ranks(a, b);
    let m = a.len() as f64;
    Ok(ranks[..a.len()].iter().sum::<f64>() - m * (m + 1.0) / 2.0)
}

/// Null frequencies of `U` for sizes `m`, `n` without ties: coefficients of the
/// Gaussian binomial `[m+n choose m]_q`, built one factor at a time.
pub fn u_null_counts(m: usize, n: usize) -> Vec<u128> {
    let len = m * n + 1;
    let mut c = vec![0i128; len];
    c[0] = 1;
    for i in 1..=m {
        // Multiply by (1 − q^(n+i)).
        for k in (n + i..len).rev() {
            c[k] -= c[k - n - i];
        }
        // Divide by (1 − q^i).
        for k in i..len {
            c[k] += c[k - i];
        }
    }
    c.into_iter().map(|v| v as u128).collect()
}

/// Two-sided exact p for an integer-valued `U` of a tie-free sample.
pub fn mwu_exact_p(u: f64, m: usize, n: usize) -> f64 {
    let counts = u_null_counts(m, n);
    let total: u128 = counts.iter().sum();
    let k = u.round() as usize;
    let lower: u128 = counts[..=k.min(m * n)].iter().sum();
    let upper: u128 = counts[k.min(m * n)..].iter().sum();
    let tail = lower.min(upper) as f64 / total as f64;
    (2.0 * tail).min(1.0)
}

/// Two-sided normal approximation with tie-corrected variance and a 0.5
/// continuity correction. A degenerate variance (all values tied) gives 1.
pub fn mwu_normal_p(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    check(a, b)?;
    let (ranks, ties) = pooled_ranks(a, b);
    let (m, n) = (a.len() as f64, b.len() as f64);
    let big_n = m + n;
    let u = ranks[..a.len()].iter().sum::<f64>() - m * (m + 1.0) / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = m * n / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if !(var > 0.0) {
        return Ok(1.0);
    }
    let z = ((u - m * n / 2.0).abs() - 0.5) / var.sqrt();
    Ok(erfc(z / std::f64::consts::SQRT_2).min(1.0))
}

/// Two-sided Mann–Whitney U test. Exact when `m·n ≤ 400` and there are no
/// ties, otherwise the normal approximation.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MwuResult, StatsError> {
    check(a, b)?;
    let (ranks, ties) = pooled_ranks(a, b);
    let m = a.len() as f64;
    let u = ranks[..a.len()].iter().sum::<f64>() - m * (m + 1.0) / 2.0;
    if ties.is_empty() && a.len() * b.len() <= EXACT_MAX_CELLS {
        Ok(MwuResult {
            u,
            p_value: mwu_exact_p(u, a.len(), b.len()),
            method: MwuMethod::Exact,
        })
    } else {
        Ok(MwuResult {
            u,
            p_value: mwu_normal_p(a, b)?,
            method: MwuMethod::Normal,
        })
    }
}
