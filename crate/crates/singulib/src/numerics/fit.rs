//! Small dense least-squares fits used by the classification and
//! verification reports.

/// Solve the normal equations for `X beta ~ y` with optional weights.
/// `X` is row-major with `cols` columns. Panics on dimension mismatch;
/// returns `None` when the normal matrix is singular.
pub fn least_squares(x: &[f64], cols: usize, y: &[f64], w: Option<&[f64]>) -> Option<Vec<f64>> {
    let rows = y.len();
    assert_eq!(x.len(), rows * cols);
    let mut ata = vec![0.0; cols * cols];
    let mut atb = vec![0.0; cols];
    for r in 0..rows {
        let wr = w.map(|w| w[r]).unwrap_or(1.0);
        for i in 0..cols {
            let xi = x[r * cols + i];
            atb[i] += wr * xi * y[r];
            for j in 0..cols {
                ata[i * cols + j] += wr * xi * x[r * cols + j];
            }
        }
    }
    solve_dense(&mut ata, &mut atb, cols)
}

/// Gaussian elimination with partial pivoting on a small system.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= factor * a[col * n + c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in col + 1..n {
            acc -= a[col * n + c] * x[c];
        }
        x[col] = acc / a[col * n + col];
    }
    Some(x)
}

/// Fit `log|y| = log c - alpha * log x + beta * log log x` over positive
/// samples. With `log_factor` disabled the beta column is dropped.
/// Returns `(alpha, log_c, beta, rms_residual)`.
pub fn power_law_fit(
    xs: &[f64],
    ys: &[f64],
    log_factor: bool,
) -> Option<(f64, f64, f64, f64)> {
    let mut rows_x = Vec::new();
    let mut rows_y = Vec::new();
    let cols = if log_factor { 3 } else { 2 };
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > 1.0001 && y.abs() > 0.0 && y.is_finite()) {
            continue;
        }
        rows_x.push(1.0);
        rows_x.push(x.ln());
        if log_factor {
            rows_x.push(x.ln().ln());
        }
        rows_y.push(y.abs().ln());
    }
    if rows_y.len() < cols + 1 {
        return None;
    }
    let beta_hat = least_squares(&rows_x, cols, &rows_y, None)?;
    let mut ss = 0.0;
    for r in 0..rows_y.len() {
        let mut pred = 0.0;
        for c in 0..cols {
            pred += rows_x[r * cols + c] * beta_hat[c];
        }
        ss += (rows_y[r] - pred).powi(2);
    }
    let rms = (ss / rows_y.len() as f64).sqrt();
    Some((
        -beta_hat[1],
        beta_hat[0],
        if log_factor { beta_hat[2] } else { 0.0 },
        rms,
    ))
}

/// Log-log slope of `y` against `x` (least squares), for trend statistics.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}
