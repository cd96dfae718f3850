use std::collections::HashMap;
use std::hash::Hash;

use super::FeatureError;

/// Distinct tokens divided by token count.
pub fn compute_ttr<T: Eq + Hash>(tokens: &[T]) -> Result<f64, FeatureError> {
    compute_mattr(tokens, tokens.len().max(1))
}

/// Moving-average type-token ratio over all contiguous windows of `window`
/// tokens. Streams no longer than the window reduce to plain TTR.
pub fn compute_mattr<T: Eq + Hash>(tokens: &[T], window: usize) -> Result<f64, FeatureError> {
    if tokens.is_empty() {
        return Err(FeatureError::EmptyStream);
    }
    if window == 0 {
        return Err(FeatureError::ZeroWindow);
    }
    let window = window.min(tokens.len());
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for t in &tokens[..window] {
        *counts.entry(t).or_default() += 1;
    }
    let mut distinct_sum = counts.len() as u64;
    let n_windows = tokens.len() - window + 1;
    for i in window..tokens.len() {
        let leaving = &tokens[i - window];
        if let Some(c) = counts.get_mut(leaving) {
            *c -= 1;
            if *c == 0 {
                counts.remove(leaving);
            }
        }
        *counts.entry(&tokens[i]).or_default() += 1;
        distinct_sum += counts.len() as u64;
    }
    Ok(distinct_sum as f64 / (window as f64 * n_windows as f64))
}
