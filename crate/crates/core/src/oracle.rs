//! Brute-force reference for [`crate::allocate`].
//!
//! Shares no code with the model: each uploader's capacity is water-filled
//! by bisecting on the common fill level, and the coupling between rows
//! (potential rates depend on what others upload) is resolved by sweeping all
//! rows until the matrix stops changing. Valid for the default `n = N - 1`.

/// Returns `(u, seed_share)` with `u[i][j]` the rate from `i` to `j`.
pub fn water_fill_matrix(
    counts: &[u32],
    seed_capacity: f64,
    leecher_capacity: f64,
) -> (Vec<Vec<f64>>, f64) {
    let size = counts.len();
    let seed_share = seed_capacity / size as f64;
    let mut u = vec![vec![0.0; size]; size];

    for _sweep in 0..(4 * size + 8) {
        let mut next = vec![vec![0.0; size]; size];
        for (i, next_row) in next.iter_mut().enumerate() {
            let caps: Vec<Option<f64>> = (0..size)
                .map(|j| {
                    if j == i {
                        Some(0.0)
                    } else if counts[i] > counts[j] {
                        None
                    } else {
                        let relayed: f64 = (0..size)
                            .filter(|&k| counts[k] > counts[j])
                            .map(|k| u[k][i])
                            .sum();
                        Some(seed_share + relayed)
                    }
                })
                .collect();
            *next_row = fill(&caps, leecher_capacity);
        }
        let delta = u
            .iter()
            .flatten()
            .zip(next.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        u = next;
        if delta == 0.0 {
            break;
        }
    }
    (u, seed_share)
}

/// Raises every recipient's rate uniformly until it meets its cap or the
/// capacity runs out. `None` caps are unlimited; a `Some(0.0)` cap excludes.
fn fill(caps: &[Option<f64>], capacity: f64) -> Vec<f64> {
    let at_level =
        |level: f64| -> f64 { caps.iter().map(|c| c.map_or(level, |c| c.min(level))).sum() };
    let unlimited = caps.iter().any(Option::is_none);
    let demand: f64 = caps.iter().flatten().sum();
    let level = if !unlimited && demand <= capacity {
        f64::INFINITY
    } else {
        let (mut lo, mut hi) = (0.0, capacity);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at_level(mid) < capacity {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    caps.iter()
        .map(|c| c.map_or(level, |c| c.min(level)))
        .collect()
}
