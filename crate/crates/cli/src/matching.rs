//! Optimal assignment of recovered to true frequencies.

use specline::angle::circular_distance;

/// Minimum-cost assignment for a rectangular cost matrix (Hungarian method
/// with potentials). Returns `(row, col)` pairs, one per row when
/// `rows <= cols`, otherwise one per column.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![];
    }
    if rows > cols {
        let t: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
        return min_cost_assignment(&t).into_iter().map(|(j, i)| (i, j)).collect();
    }

    // 1-based arrays, column 0 is the virtual start
    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
    let mut pairs: Vec<(usize, usize)> = (1..=m).filter(|&j| owner[j] != 0).map(|j| (owner[j] - 1, j - 1)).collect();
    pairs.sort_unstable();
    pairs
}

/// `||theta_hat - theta||` after optimal matching under circular distance.
/// True frequencies left unmatched count as a full half-turn each.
pub fn frequency_error(truth: &[f64], estimate: &[f64]) -> f64 {
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|&t| estimate.iter().map(|&e| circular_distance(t, e).powi(2)).collect())
        .collect();
    let pairs = min_cost_assignment(&cost);
    let matched: f64 = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    let unmatched = truth.len().saturating_sub(pairs.len()) as f64;
    (matched + unmatched * std::f64::consts::PI.powi(2)).sqrt()
}
