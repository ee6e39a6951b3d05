use nalgebra::DMatrix;

/// Pairs scoring below this are not treated as matches.
pub const DEFAULT_MATCH_FLOOR: f64 = 0.3;

/// Minimum-cost one-to-one assignment of the smaller side into the larger.
///
/// Shortest augmenting paths with row/column potentials (Hungarian /
/// Jonker–Volgenant style), `O(r² c)` for `r ≤ c`. Returns `(row, col)`
/// pairs sorted by row.
pub fn solve_min_cost(cost: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let (m, n) = cost.shape();
    if m == 0 || n == 0 {
        return Vec::new();
    }
    if m > n {
        let mut pairs: Vec<(usize, usize)> = solve_min_cost(&cost.transpose()).into_iter().map(|(j, k)| (k, j)).collect();
        pairs.sort_unstable();
        return pairs;
    }
    // 1-based arrays; column 0 is the virtual source.
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; m + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=m {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=n).filter(|&j| owner[j] != 0).map(|j| (owner[j] - 1, j - 1)).collect();
    pairs.sort_unstable();
    pairs
}

/// Maximum-total-score matching; pairs scoring below `floor` are dropped afterwards.
pub fn linear_assignment(scores: &DMatrix<f64>, floor: f64) -> Vec<(usize, usize)> {
    let cost = scores.map(|s| -s);
    solve_min_cost(&cost).into_iter().filter(|&(k, j)| scores[(k, j)] >= floor).collect()
}
