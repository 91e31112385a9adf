use super::Complex;

/// Largest size solved exactly; bigger problems use greedy matching.
const EXACT_LIMIT: usize = 64;

/// Minimum-cost perfect assignment for a square cost matrix given row-major.
/// Returns `col_of_row`.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return Vec::new();
    }
    if n > EXACT_LIMIT {
        return greedy(cost, n);
    }
    hungarian(cost, n)
}

fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    let inf = f64::INFINITY;
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
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            col_of_row[p[j] - 1] = j - 1;
        }
    }
    col_of_row
}

fn greedy(cost: &[f64], n: usize) -> Vec<usize> {
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    pairs.sort_by(|a, b| cost[a.0 * n + a.1].total_cmp(&cost[b.0 * n + b.1]));
    let mut col_of_row = vec![usize::MAX; n];
    let mut col_used = vec![false; n];
    for (i, j) in pairs {
        if col_of_row[i] == usize::MAX && !col_used[j] {
            col_of_row[i] = j;
            col_used[j] = true;
        }
    }
    col_of_row
}

pub fn assignment_cost(cost: &[f64], n: usize, col_of_row: &[usize]) -> f64 {
    col_of_row.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum()
}

/// Minimum over matchings of `Σ |a_i − b_σ(i)|²`, with the optimal matching.
pub fn min_cost_matching_distance(a: &[Complex], b: &[Complex]) -> (f64, Vec<usize>) {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let cost: Vec<f64> = (0..n * n).map(|k| (a[k / n] - b[k % n]).norm_sqr()).collect();
    let m = min_cost_assignment(&cost, n);
    (assignment_cost(&cost, n, &m), m)
}
