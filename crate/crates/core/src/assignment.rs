//! Dense rectangular linear assignment (shortest augmenting path, O(n^3)).
//!
//! Shared by association and the metrics. Works on `f64` weights and maximizes.

/// Maximum-weight assignment over a `rows x cols` weight matrix.
///
/// Every row is assigned when `rows <= cols` (and every column otherwise); callers
/// drop pairs whose weight does not meet their own acceptance rule. Returns the
/// column chosen for each row.
pub fn maximize(weights: &[Vec<f64>], cols: usize) -> Vec<Option<usize>> {
    let rows = weights.len();
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    let n = rows.max(cols);
    let max_w = weights
        .iter()
        .flat_map(|r| r.iter().copied())
        .fold(0.0f64, f64::max);
    // Square cost matrix; padding cells cost as much as a zero-weight pair.
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            max_w - weights[i][j]
        } else {
            max_w
        }
    };

    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
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
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = vec![None; rows];
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i <= rows && j <= cols {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

/// Maximum-weight matching restricted to pairs accepted by `allowed`.
/// Returns `(row, col)` pairs sorted by row.
pub fn maximize_allowed(
    weights: &[Vec<f64>],
    cols: usize,
    allowed: impl Fn(usize, usize) -> bool,
) -> Vec<(usize, usize)> {
    let masked: Vec<Vec<f64>> = weights
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &w)| if allowed(i, j) { w } else { 0.0 })
                .collect()
        })
        .collect();
    maximize(&masked, cols)
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| j.filter(|&j| allowed(i, j)).map(|j| (i, j)))
        .collect()
}
