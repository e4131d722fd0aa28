use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VimError};

const JITTER: f64 = 1e-10;

/// Lower Cholesky factor; retries once with `1e-10` added to the diagonal.
pub fn cholesky_jittered(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if let Some(c) = sigma.clone().cholesky() {
        return Ok(c.l());
    }
    let mut jittered = sigma.clone();
    for i in 0..jittered.nrows() {
        jittered[(i, i)] += JITTER;
    }
    jittered
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| VimError::NumericalRank("matrix is not positive definite after jitter".into()))
}

/// Inverse of a symmetric positive definite matrix, jittered if needed.
pub fn spd_inverse(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let chol = sigma.clone().cholesky().or_else(|| {
        let mut j = sigma.clone();
        for i in 0..j.nrows() {
            j[(i, i)] += JITTER;
        }
        j.cholesky()
    });
    chol.map(|c| c.inverse())
        .ok_or_else(|| VimError::NumericalRank("matrix is not invertible after jitter".into()))
}

/// Solves `a z = b` for symmetric positive definite `a`, jittered if needed.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    let chol = a.clone().cholesky().or_else(|| {
        let mut j = a.clone();
        for i in 0..j.nrows() {
            j[(i, i)] += JITTER;
        }
        j.cholesky()
    });
    chol.map(|c| c.solve(b))
        .ok_or_else(|| VimError::NumericalRank("matrix is not invertible after jitter".into()))
}

/// Sub-matrix with the given rows and columns.
pub fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Columns `cols` of `m`, all rows.
pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

/// `0..p` without `j`.
pub fn complement(p: usize, excluded: &[usize]) -> Vec<usize> {
    (0..p).filter(|k| !excluded.contains(k)).collect()
}

pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Unbiased sample covariance of the columns of `x`.
pub fn sample_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mean = column_means(x);
    let mut centered = x.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
    // exact symmetry
    for i in 0..cov.nrows() {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

/// Least squares with an unpenalized intercept and an optional ridge penalty
/// on the slopes. Solved by Householder QR on the centered (and, for
/// `ridge > 0`, augmented) design. Returns `(intercept, slopes)`.
pub fn least_squares(x: &DMatrix<f64>, y: &[f64], ridge: f64) -> Result<(f64, DVector<f64>)> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(VimError::Dimension {
            context: "least squares target",
            expected: n,
            found: y.len(),
        });
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if k == 0 {
        return Ok((y_mean, DVector::zeros(0)));
    }
    let x_mean = column_means(x);
    let extra = if ridge > 0.0 { k } else { 0 };
    if n + extra < k {
        return Err(VimError::RankDeficient(format!(
            "{n} rows for {k} coefficients"
        )));
    }
    let mut a = DMatrix::zeros(n + extra, k);
    let mut b = DVector::zeros(n + extra);
    for i in 0..n {
        for j in 0..k {
            a[(i, j)] = x[(i, j)] - x_mean[j];
        }
        b[i] = y[i] - y_mean;
    }
    let s = ridge.sqrt();
    for j in 0..extra {
        a[(n + j, j)] = s;
    }
    let qr = a.qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * max_diag) {
        return Err(VimError::RankDeficient(
            "normal equations are singular".into(),
        ));
    }
    let qtb = qr.q().transpose() * b;
    let beta = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| VimError::RankDeficient("triangular solve failed".into()))?;
    let intercept = y_mean - x_mean.dot(&beta);
    Ok((intercept, beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_recovers_exact_map() {
        let x = DMatrix::from_fn(20, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 + j as f64 * 0.5 * i as f64);
        let y: Vec<f64> = (0..20).map(|i| 1.5 + 2.0 * x[(i, 0)] - 0.5 * x[(i, 1)]).collect();
        let (b0, b) = least_squares(&x, &y, 0.0).unwrap();
        assert!((b0 - 1.5).abs() < 1e-9);
        assert!((b[0] - 2.0).abs() < 1e-9);
        assert!((b[1] + 0.5).abs() < 1e-9);
    }

    #[test]
    fn least_squares_detects_collinearity() {
        let x = DMatrix::from_fn(10, 2, |i, j| (i as f64) * (j as f64 + 1.0));
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(least_squares(&x, &y, 0.0), Err(VimError::RankDeficient(_))));
        assert!(least_squares(&x, &y, 1.0).is_ok());
    }

    #[test]
    fn jittered_cholesky_handles_psd() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(cholesky_jittered(&s).is_ok());
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky_jittered(&neg).is_err());
    }
}
