use super::MetricsError;

/// Kendall rank correlation between two equally long value vectors.
///
/// A pair is concordant when both vectors order it the same way strictly,
/// discordant when they order it oppositely. Pairs tied in exactly one
/// vector count as neither. Pairs tied in both vectors carry no order
/// information and are left out of the pair count, so the coefficient is
/// `(C - D) / (n(n-1)/2 - T_joint)`. Without joint ties this is the plain
/// `(C - D) / (n(n-1)/2)`. If every pair is jointly tied the rankings are
/// identical and the result is 1.
///
/// Runs in `O(n log n)` (Knight's merge-sort method).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(MetricsError::TooFewItems { needed: 2, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));

    let pairs = |t: u64| t * t.saturating_sub(1) / 2;
    let n0 = pairs(n as u64);

    let mut ties_a = 0u64;
    let mut ties_joint = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && a[order[j]].total_cmp(&a[order[i]]).is_eq() {
            j += 1;
        }
        ties_a += pairs((j - i) as u64);
        let mut k = i;
        while k < j {
            let mut m = k + 1;
            while m < j && b[order[m]].total_cmp(&b[order[k]]).is_eq() {
                m += 1;
            }
            ties_joint += pairs((m - k) as u64);
            k = m;
        }
        i = j;
    }

    let mut seq: Vec<f64> = order.iter().map(|&i| b[i]).collect();
    let swaps = merge_count(&mut seq);

    let mut ties_b = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && seq[j].total_cmp(&seq[i]).is_eq() {
            j += 1;
        }
        ties_b += pairs((j - i) as u64);
        i = j;
    }

    let numerator =
        n0 as i128 - ties_a as i128 - ties_b as i128 + ties_joint as i128 - 2 * swaps as i128;
    let denominator = n0 - ties_joint;
    if denominator == 0 {
        return Ok(1.0);
    }
    Ok(numerator as f64 / denominator as f64)
}

/// Sorts `v` ascending and returns the number of strictly inverted pairs.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mut buf = v.to_vec();
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if v[j].total_cmp(&v[i]).is_lt() {
                    buf[k] = v[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    buf[k] = v[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
            k += mid - i;
            buf[k..k + (hi - j)].copy_from_slice(&v[j..hi]);
            lo = hi;
        }
        v.copy_from_slice(&buf);
        width *= 2;
    }
    swaps
}
