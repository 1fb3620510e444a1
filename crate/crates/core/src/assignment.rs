//! Rectangular minimum-cost linear assignment (Hungarian method with
//! potentials, shortest augmenting paths).

use nalgebra::DMatrix;

/// Minimum-cost matching of every row to a distinct column, or every column
/// to a distinct row when there are fewer columns. All entries must be
/// finite. Returns `(row, col)` pairs sorted by row.
///
/// Rows are inserted in index order and the first column reaching the
/// smallest reduced cost is taken, so equal-cost optima resolve towards low
/// indices deterministically.
pub fn linear_sum_assignment(cost: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let (n, m) = cost.shape();
    if n == 0 || m == 0 {
        return Vec::new();
    }
    if n > m {
        let mut pairs: Vec<(usize, usize)> = solve_wide(&cost.transpose())
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect();
        pairs.sort_unstable();
        return pairs;
    }
    solve_wide(cost)
}

/// Requires rows ≤ columns.
fn solve_wide(cost: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let (n, m) = cost.shape();
    debug_assert!(n <= m);
    // 1-based arrays; index 0 is the virtual root column/row.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut row_of_col = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
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
            for j in 0..=m {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| row_of_col[j] != 0)
        .map(|j| (row_of_col[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}
