//! Exact rectangular assignment.
//!
//! Shortest augmenting path Hungarian method with row/column potentials,
//! `O(n^2 m)` for `n` columns matched into `m >= n` rows.

use crate::transport::CostMatrix;

/// Result of an assignment solve: `matching[j]` is the row assigned to column `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub cost: f64,
    pub matching: Vec<usize>,
}

/// Optimal injective matching of columns into rows, as found by the
/// Hungarian iteration. The cost is summed over columns in index order.
///
/// Panics if `cost` has more columns than rows.
pub fn solve_assignment(cost: &CostMatrix) -> Assignment {
    let m = cost.rows();
    let n = cost.cols();
    assert!(n <= m, "assignment needs at least as many rows ({m}) as columns ({n})");
    if n == 0 {
        return Assignment { cost: 0.0, matching: Vec::new() };
    }
    // Internally: "workers" are our columns 1..=n, "jobs" are our rows 1..=m.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![inf; m + 1];
    let mut used = vec![false; m + 1];
    for worker in 1..=n {
        owner[0] = worker;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost.get(j - 1, i0 - 1) - u[i0] - v[j];
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
    let mut matching = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            matching[owner[j] - 1] = j - 1;
        }
    }
    Assignment { cost: matching_cost(cost, &matching), matching }
}

/// Sum of `cost[matching[j]][j]` in column order.
pub fn matching_cost(cost: &CostMatrix, matching: &[usize]) -> f64 {
    matching.iter().enumerate().map(|(j, &r)| cost.get(r, j)).sum()
}

/// Minimum cost injective matching with deterministic tie-breaking: among all
/// matchings whose cost is within `1e-12 (1 + cost)` of the optimum, returns
/// the lexicographically smallest `matching` vector.
///
/// An empty matrix (no columns) gives cost 0 and an empty matching.
pub fn min_cost_assignment(cost: &CostMatrix) -> Assignment {
    let m = cost.rows();
    let n = cost.cols();
    let best = solve_assignment(cost);
    if n == 0 {
        return best;
    }
    let tol = 1e-12 * (1.0 + best.cost.abs());
    let mut fixed: Vec<usize> = Vec::with_capacity(n);
    let mut fixed_cost = 0.0;
    let mut row_used = vec![false; m];
    for j in 0..n {
        let mut chosen = None;
        for r in 0..m {
            if row_used[r] {
                continue;
            }
            let head = fixed_cost + cost.get(r, j);
            if head > best.cost + tol {
                continue;
            }
            row_used[r] = true;
            let free_rows: Vec<usize> = (0..m).filter(|&k| !row_used[k]).collect();
            let rest = if j + 1 < n {
                let sub = CostMatrix::from_fn(free_rows.len(), n - j - 1, |a, b| cost.get(free_rows[a], j + 1 + b));
                solve_assignment(&sub).cost
            } else {
                0.0
            };
            if head + rest <= best.cost + tol {
                chosen = Some(r);
                break;
            }
            row_used[r] = false;
        }
        // The optimal matching itself always passes, so a choice exists.
        let r = chosen.unwrap_or_else(|| {
            let r = (0..m).find(|&k| !row_used[k]).expect("a free row");
            row_used[r] = true;
            r
        });
        fixed_cost += cost.get(r, j);
        fixed.push(r);
    }
    Assignment { cost: matching_cost(cost, &fixed), matching: fixed }
}
