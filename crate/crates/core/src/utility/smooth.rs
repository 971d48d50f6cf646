//! Loess-style local linear smoothing with tricube weights.

/// Fitted values at each input point. `span` is the fraction of points used
/// in each local fit; coordinates are rescaled to unit range per dimension.
pub fn local_linear_smooth(x: &[Vec<f64>], y: &[f64], span: f64) -> Vec<f64> {
    let n = x.len();
    assert_eq!(n, y.len());
    if n == 0 {
        return vec![];
    }
    let d = x[0].len();
    let (lo, hi): (Vec<f64>, Vec<f64>) = (0..d)
        .map(|j| {
            x.iter()
                .map(|p| p[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
        })
        .unzip();
    let scaled: Vec<Vec<f64>> = x
        .iter()
        .map(|p| {
            (0..d)
                .map(|j| {
                    let r = hi[j] - lo[j];
                    if r > 0.0 { (p[j] - lo[j]) / r } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let q = ((span * n as f64).floor() as usize).clamp((d + 2).min(n), n);
    (0..n)
        .map(|i| {
            let dist: Vec<f64> = scaled
                .iter()
                .map(|p| p.iter().zip(&scaled[i]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .collect();
            let mut sorted = dist.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let h = sorted[q - 1].max(1e-12) * if q == n { 1.0 + 1e-9 } else { 1.0 };
            let w: Vec<f64> = dist
                .iter()
                .map(|&t| if t < h { (1.0 - (t / h).powi(3)).powi(3) } else { 0.0 })
                .collect();
            fit_at(&scaled, y, &w, &scaled[i])
        })
        .collect()
}

// Weighted least squares on [1, x − x0]; returns the intercept.
fn fit_at(x: &[Vec<f64>], y: &[f64], w: &[f64], x0: &[f64]) -> f64 {
    let p = x0.len() + 1;
    let mut a = vec![vec![0.0; p + 1]; p];
    for ((xi, yi), wi) in x.iter().zip(y).zip(w) {
        if *wi == 0.0 {
            continue;
        }
        let mut row = Vec::with_capacity(p);
        row.push(1.0);
        row.extend(xi.iter().zip(x0).map(|(a, b)| a - b));
        for r in 0..p {
            for c in 0..p {
                a[r][c] += wi * row[r] * row[c];
            }
            a[r][p] += wi * row[r] * yi;
        }
    }
    let wsum: f64 = w.iter().sum();
    let wmean = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / wsum;
    solve(a).map(|b| b[0]).unwrap_or(wmean)
}

// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let p = a.len();
    let scale = a.iter().map(|r| r[..p].iter().fold(0.0f64, |m, v| m.max(v.abs()))).fold(0.0, f64::max);
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale.max(1e-300) {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..p {
            let f = a[r][col] / a[col][col];
            for c in col..=p {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut b = vec![0.0; p];
    for r in (0..p).rev() {
        let s: f64 = (r + 1..p).map(|c| a[r][c] * b[c]).sum();
        b[r] = (a[r][p] - s) / a[r][r];
    }
    Some(b)
}
