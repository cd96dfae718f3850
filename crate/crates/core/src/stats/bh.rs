use super::StatsError;

/// Benjamini–Hochberg step-up adjustment, returned in input order.
pub fn benjamini_hochberg(p: &[f64]) -> Result<Vec<f64>, StatsError> {
    if let Some(&bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(StatsError::OutOfRange(bad));
    }
    let n = p.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| p[i].total_cmp(&p[j]).then(i.cmp(&j)));
    let mut q = vec![0.0; n];
    let mut running = 1.0f64;
    for rank in (0..n).rev() {
        let i = order[rank];
        // n/k ≥ 1 after rounding, so q never falls below p.
        running = running.min(p[i] * (n as f64 / (rank + 1) as f64));
        q[i] = running.min(1.0);
    }
    Ok(q)
}
