//! Maximum-cardinality, minimum-cost bipartite matching.

/// Match rows to columns using only allowed (`Some`) entries. Among all
/// matchings of maximum size, the total cost is minimal. Returns the column
/// matched to each row.
pub fn max_matching_min_cost(cost: &[Vec<Option<f64>>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    let cols = cost.iter().map(Vec::len).max().unwrap_or(0);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    // A forbidden or padding cell costs more than any set of allowed cells, so
    // every extra allowed pair beats any saving in distance.
    let allowed_sum: f64 = cost.iter().flatten().flatten().map(|c| c.abs()).sum();
    let big = 1.0 + 2.0 * allowed_sum;
    let n = rows.max(cols);
    let at = |i: usize, j: usize| -> f64 {
        cost.get(i)
            .and_then(|r| r.get(j))
            .copied()
            .flatten()
            .unwrap_or(big)
    };
    let col_of_row = hungarian(n, at);
    (0..rows)
        .map(|i| {
            let j = col_of_row[i];
            (j < cols && cost[i].get(j).copied().flatten().is_some()).then_some(j)
        })
        .collect()
}

/// Square assignment by successive shortest paths with potentials.
fn hungarian(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let inf = f64::INFINITY;
    // 1-based arrays; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
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
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}
