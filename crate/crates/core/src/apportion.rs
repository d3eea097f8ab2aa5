//! Largest-remainder (Hamilton) integer apportionment.

use crate::model::normalize;
use crate::num::Real;

/// Splits `total` units proportionally to `weights`.
///
/// Each bin first receives the floor of its quota; the leftover units go to
/// the largest fractional remainders, ties to the lower index. Returns `None`
/// when the weights sum to zero and `total > 0`.
pub fn largest_remainder<T: Real>(weights: &[T], total: u64) -> Option<Vec<u64>> {
    if total == 0 {
        return Some(vec![0; weights.len()]);
    }
    let probs = normalize(weights)?;
    let quotas: Vec<f64> = probs.iter().map(|p| p.as_f64() * total as f64).collect();
    Some(apportion_quotas(&quotas, total))
}

/// Hamilton rounding of real quotas that sum (approximately) to `total`.
pub fn apportion_quotas(quotas: &[f64], total: u64) -> Vec<u64> {
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.max(0.0).floor() as u64).collect();
    let mut assigned: u64 = counts.iter().sum();
    // rounding noise can push the floors over the total
    while assigned > total {
        let i = (0..counts.len())
            .filter(|i| counts[*i] > 0)
            .min_by(|a, b| {
                let ra = quotas[*a] - counts[*a] as f64;
                let rb = quotas[*b] - counts[*b] as f64;
                ra.total_cmp(&rb).then(b.cmp(a))
            })
            .expect("positive count exists");
        counts[i] -= 1;
        assigned -= 1;
    }
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|a, b| {
        let ra = quotas[*a] - counts[*a] as f64;
        let rb = quotas[*b] - counts[*b] as f64;
        rb.total_cmp(&ra).then(a.cmp(b))
    });
    let mut k = 0;
    while assigned < total && !order.is_empty() {
        counts[order[k % order.len()]] += 1;
        assigned += 1;
        k += 1;
    }
    counts
}
