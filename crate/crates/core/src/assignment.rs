//! Maximum-weight bipartite assignment.
//!
//! Small instances are solved exactly by bitmask dynamic programming (an
//! exhaustive search over all assignments); larger ones by the Hungarian
//! algorithm with potentials. Weights must be nonnegative; zero-weight pairs
//! are treated as non-edges and never reported as matches.

/// Threshold below which the exhaustive bitmask solver is used.
const EXHAUSTIVE_LIMIT: usize = 8;

/// Returns, per row, the matched column maximizing total weight. Zero or
/// negative weights are non-edges.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = weights[0].len();
    if cols == 0 {
        return vec![None; rows];
    }
    debug_assert!(weights.iter().all(|r| r.len() == cols));

    let assignment = if rows <= EXHAUSTIVE_LIMIT && cols <= EXHAUSTIVE_LIMIT {
        exhaustive(weights, rows, cols)
    } else if rows <= cols {
        hungarian_max(weights, rows, cols)
    } else {
        // transpose so rows <= cols, then invert the mapping
        let t: Vec<Vec<f64>> = (0..cols)
            .map(|j| (0..rows).map(|i| weights[i][j]).collect())
            .collect();
        let by_col = hungarian_max(&t, cols, rows);
        let mut out = vec![None; rows];
        for (j, m) in by_col.iter().enumerate() {
            if let Some(i) = m {
                out[*i] = Some(j);
            }
        }
        out
    };

    assignment
        .into_iter()
        .enumerate()
        .map(|(i, m)| m.filter(|&j| weights[i][j] > 0.0))
        .collect()
}

/// Exhaustive optimum by DP over column subsets; rows may stay unmatched.
fn exhaustive(weights: &[Vec<f64>], rows: usize, cols: usize) -> Vec<Option<usize>> {
    let masks = 1usize << cols;
    // dp[i][mask]: best total using rows 0..i with columns `mask` taken
    let mut dp = vec![vec![f64::NEG_INFINITY; masks]; rows + 1];
    let mut choice = vec![vec![usize::MAX; masks]; rows + 1];
    dp[0][0] = 0.0;
    for i in 0..rows {
        for mask in 0..masks {
            let cur = dp[i][mask];
            if cur == f64::NEG_INFINITY {
                continue;
            }
            // leave row i unmatched
            if cur > dp[i + 1][mask] {
                dp[i + 1][mask] = cur;
                choice[i + 1][mask] = cols; // sentinel: skipped
            }
            for j in 0..cols {
                if mask & (1 << j) != 0 {
                    continue;
                }
                let next = cur + weights[i][j].max(0.0);
                let m2 = mask | (1 << j);
                if next > dp[i + 1][m2] {
                    dp[i + 1][m2] = next;
                    choice[i + 1][m2] = j;
                }
            }
        }
    }
    let mut best_mask = 0;
    for mask in 0..masks {
        if dp[rows][mask] > dp[rows][best_mask] {
            best_mask = mask;
        }
    }
    let mut out = vec![None; rows];
    let mut mask = best_mask;
    for i in (1..=rows).rev() {
        let c = choice[i][mask];
        if c < cols {
            out[i - 1] = Some(c);
            mask &= !(1 << c);
        }
    }
    out
}

/// Hungarian algorithm (potentials formulation) for `rows <= cols`,
/// maximizing total weight by minimizing `max_weight - w`.
fn hungarian_max(weights: &[Vec<f64>], rows: usize, cols: usize) -> Vec<Option<usize>> {
    let max_w = weights
        .iter()
        .flat_map(|r| r.iter())
        .cloned()
        .fold(0.0f64, f64::max);
    let cost = |i: usize, j: usize| max_w - weights[i][j].max(0.0);

    let (n, m) = (rows, cols);
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut matched_row = vec![0usize; m + 1]; // 1-based row matched to column j
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = vec![None; n];
    for j in 1..=m {
        if matched_row[j] > 0 {
            out[matched_row[j] - 1] = Some(j - 1);
        }
    }
    out
}
