/// Largest-remainder apportionment of `total` shots by `fractions`.
///
/// Each map first receives `floor(f * total)`; the leftover shots go one each
/// to the largest fractional remainders, lower index first on ties. The
/// result always sums to `total`.
pub fn allocate_shots(fractions: &[f64], total: u64) -> Vec<u64> {
    if fractions.is_empty() {
        return Vec::new();
    }
    let t = total as f64;
    let quotas: Vec<f64> = fractions.iter().map(|f| f.max(0.0) * t).collect();
    let mut shots: Vec<u64> = quotas
        .iter()
        .map(|&q| {
            // quotas within rounding noise of an integer count as that integer
            let r = q.round();
            if (q - r).abs() <= 1e-9 * t.max(1.0) {
                r as u64
            } else {
                q.floor() as u64
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    // stable sort keeps lower indices first among equal remainders
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - shots[a] as f64;
        let rb = quotas[b] - shots[b] as f64;
        rb.total_cmp(&ra)
    });
    let assigned: u64 = shots.iter().sum();
    if assigned <= total {
        for &i in order.iter().cycle().take((total - assigned) as usize) {
            shots[i] += 1;
        }
    } else {
        let mut excess = assigned - total;
        for &i in order.iter().rev().cycle() {
            if excess == 0 {
                break;
            }
            if shots[i] > 0 {
                shots[i] -= 1;
                excess -= 1;
            }
        }
    }
    shots
}

/// `total` split as evenly as possible, remainder to the lowest indices.
pub fn equal_split(count: usize, total: u64) -> Vec<u64> {
    if count == 0 {
        return Vec::new();
    }
    let base = total / count as u64;
    let extra = (total % count as u64) as usize;
    (0..count).map(|i| base + u64::from(i < extra)).collect()
}
