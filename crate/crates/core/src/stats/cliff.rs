use super::StatsError;

/// Cliff's delta `(#(a > b) − #(a < b)) / (m n)`, positive when `a` tends to
/// be larger. Counts are integers, so the result equals the double loop exactly.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptyGroup);
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted = b.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as i64;
    let mut score: i64 = 0;
    for &x in a {
        let below = sorted.partition_point(|&v| v < x) as i64;
        let not_above = sorted.partition_point(|&v| v <= x) as i64;
        score += below - (n - not_above);
    }
    Ok(score as f64 / (a.len() as f64 * b.len() as f64))
}
