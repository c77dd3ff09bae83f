//! Finite-difference weights on arbitrary nodes (Fornberg's algorithm).

/// Weights for the `m`-th derivative at `x0` from samples at `xs`.
/// Classic recurrence from Fornberg, "Generation of finite difference
/// formulas on arbitrarily spaced grids".
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(n > m, "need more than m+1 nodes");
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Derivative of sampled data at interior index `i` using a centered window
/// of `half` points on each side (clipped at the boundaries).
pub fn derivative_at(xs: &[f64], ys: &[f64], i: usize, m: usize, half: usize) -> f64 {
    let lo = i.saturating_sub(half);
    let hi = (i + half + 1).min(xs.len());
    let w = fd_weights(xs[i], &xs[lo..hi], m);
    w.iter().zip(&ys[lo..hi]).map(|(wi, yi)| wi * yi).sum()
}
