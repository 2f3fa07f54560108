use nalgebra::{DMatrix, DVector};

/// Ordinary least squares `min ‖A c − b‖` via SVD. Columns are rescaled to
/// unit norm first so mixed-magnitude bases stay well conditioned.
pub(crate) fn solve(columns: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let m = rhs.len();
    let n = columns.len();
    if n == 0 || m < n || columns.iter().any(|c| c.len() != m) {
        return None;
    }
    let scales: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if scales.iter().any(|&s| !(s > 0.0)) {
        return None;
    }
    let a = DMatrix::from_fn(m, n, |i, j| columns[j][i] / scales[j]);
    let b = DVector::from_column_slice(rhs);
    let sol = a.svd(true, true).solve(&b, 1e-14).ok()?;
    Some(sol.iter().zip(&scales).map(|(c, s)| c / s).collect())
}

/// Slope and intercept of the straight-line fit `y ≈ slope·x + intercept`,
/// plus the RMS residual.
pub(crate) fn line(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let ones = vec![1.0; x.len()];
    let c = solve(&[x.to_vec(), ones], y)?;
    let rms = rms(x.iter().zip(y).map(|(xi, yi)| yi - (c[0] * xi + c[1])));
    Some((c[0], c[1], rms))
}

pub(crate) fn rms(residuals: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = residuals.fold((0.0, 0usize), |(s, n), r| (s + r * r, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}
