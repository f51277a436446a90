//! Order-fixed summation and delete-1 jackknife.
//!
//! Every reduction here has a tree shape that depends only on the input
//! length, so results are bitwise reproducible however the inputs were
//! produced.

const LEAF: usize = 8;

/// Sum with a fixed binary tree over blocks of eight.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        return xs.iter().fold(0.0, |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Kahan–Babuška–Neumaier compensated sum.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Column-wise pairwise sums of row-major `rows × dim` data.
pub fn column_sums(rows: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut column = vec![0.0; rows.len()];
    (0..dim)
        .map(|j| {
            for (c, row) in column.iter_mut().zip(rows) {
                *c = row[j];
            }
            pairwise_sum(&column)
        })
        .collect()
}

/// Point estimate and delete-1 jackknife standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jackknife {
    pub estimate: f64,
    pub std_error: f64,
}

/// Jackknife for a smooth function of sample means.
///
/// `stat` receives the vector of column means and the number of rows they
/// were taken over. Leave-one-out means are formed from the full column sums,
/// so the cost is `O(rows · (dim + cost of stat))`.
pub fn jackknife<F>(rows: &[Vec<f64>], dim: usize, stat: F) -> Jackknife
where
    F: Fn(&[f64], usize) -> f64,
{
    let count = rows.len();
    assert!(count >= 2, "jackknife needs at least two rows");
    let sums = column_sums(rows, dim);
    let full: Vec<f64> = sums.iter().map(|s| s / count as f64).collect();
    let estimate = stat(&full, count);
    let mut loo = vec![0.0; dim];
    let thetas: Vec<f64> = rows
        .iter()
        .map(|row| {
            for j in 0..dim {
                loo[j] = (sums[j] - row[j]) / (count - 1) as f64;
            }
            stat(&loo, count - 1)
        })
        .collect();
    let bar = mean(&thetas);
    let squares: Vec<f64> = thetas.iter().map(|t| (t - bar) * (t - bar)).collect();
    let var = (count - 1) as f64 / count as f64 * pairwise_sum(&squares);
    Jackknife { estimate, std_error: var.sqrt() }
}

/// `|a - b| ≤ k · √(se_a² + se_b²)`.
pub fn within_se(a: f64, b: f64, se_a: f64, se_b: f64, k: f64) -> bool {
    (a - b).abs() <= k * se_a.hypot(se_b)
}
