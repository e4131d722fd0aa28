//! Datasets, losses, synthetic generators, CSV ingestion and splitting.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VimError};
use crate::linalg;
use crate::rng;

/// An `n x p` design matrix with its target and feature names.
///
/// Construction rejects non-finite entries and exactly duplicated columns.
/// Instances are immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
    names: Vec<String>,
    standardized: bool,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let (n, p) = x.shape();
        if n < 2 {
            return Err(VimError::InsufficientRows { needed: 2, found: n });
        }
        if p < 1 {
            return Err(VimError::invalid("dataset needs at least one feature"));
        }
        if y.len() != n {
            return Err(VimError::Dimension {
                context: "target length",
                expected: n,
                found: y.len(),
            });
        }
        if names.len() != p {
            return Err(VimError::Dimension {
                context: "feature names",
                expected: p,
                found: names.len(),
            });
        }
        for j in 0..p {
            for i in 0..n {
                if !x[(i, j)].is_finite() {
                    return Err(VimError::NonFinite { row: i, column: j });
                }
            }
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(VimError::NonFinite { row: i, column: p });
        }
        for a in 0..p {
            for b in (a + 1)..p {
                if x.column(a) == x.column(b) {
                    return Err(VimError::DuplicateColumns {
                        first: names[a].clone(),
                        second: names[b].clone(),
                    });
                }
            }
        }
        Ok(Self {
            x,
            y,
            names,
            standardized: false,
        })
    }

    /// Dataset with default names `X0, X1, ...`.
    pub fn from_unnamed(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        let names = default_names(x.ncols());
        Self::new(x, y, names)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.column(j).iter().copied().collect()
    }

    /// Rows `rows` (in that order). The result keeps names but drops the
    /// standardized flag, since a row subset is no longer exactly centered.
    pub fn subset_rows(&self, rows: &[usize]) -> Dataset {
        let p = self.p();
        let x = DMatrix::from_fn(rows.len(), p, |i, j| self.x[(rows[i], j)]);
        let y = rows.iter().map(|&r| self.y[r]).collect();
        Dataset {
            x,
            y,
            names: self.names.clone(),
            standardized: false,
        }
    }

    /// Same covariates with a replaced target.
    pub fn with_target(&self, y: Vec<f64>) -> Result<Dataset> {
        if y.len() != self.n() {
            return Err(VimError::Dimension {
                context: "target length",
                expected: self.n(),
                found: y.len(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(VimError::NonFinite {
                row: i,
                column: self.p(),
            });
        }
        Ok(Dataset {
            y,
            ..self.clone()
        })
    }

    /// Writes a header row (feature names, then `target_name`) followed by one
    /// row per observation, using shortest round-trip float formatting.
    pub fn write_csv(&self, path: &Path, target_name: &str) -> Result<()> {
        let io_err = |e: std::io::Error| VimError::Io {
            path: path.to_path_buf(),
            source: e,
        };
        let mut out = String::new();
        out.push_str(&self.names.join(","));
        out.push(',');
        out.push_str(target_name);
        out.push('\n');
        for i in 0..self.n() {
            for j in 0..self.p() {
                out.push_str(&format!("{},", self.x[(i, j)]));
            }
            out.push_str(&format!("{}\n", self.y[i]));
        }
        std::fs::write(path, out).map_err(io_err)
    }
}

pub(crate) fn default_names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("X{j}")).collect()
}

/// Pointwise loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Quadratic,
    CrossEntropy,
}

impl Loss {
    /// Unchecked evaluation of `l(y, yhat)`.
    #[inline]
    pub fn value(self, y: f64, yhat: f64) -> f64 {
        match self {
            Loss::Quadratic => (y - yhat) * (y - yhat),
            Loss::CrossEntropy => {
                let mut l = 0.0;
                if y != 0.0 {
                    l -= y * yhat.ln();
                }
                if y != 1.0 {
                    l -= (1.0 - y) * (1.0 - yhat).ln();
                }
                l
            }
        }
    }

    pub fn checked(self, y: f64, yhat: f64) -> Result<f64> {
        if self == Loss::CrossEntropy {
            if y != 0.0 && y != 1.0 {
                return Err(VimError::LossDomain(format!(
                    "cross-entropy needs binary targets, got {y}"
                )));
            }
            if !(yhat > 0.0 && yhat < 1.0) {
                return Err(VimError::LossDomain(format!(
                    "cross-entropy needs predictions in (0, 1), got {yhat}"
                )));
            }
        }
        Ok(self.value(y, yhat))
    }

    /// Per-sample losses with domain checking.
    pub fn losses(self, y: &[f64], yhat: &[f64]) -> Result<Vec<f64>> {
        if y.len() != yhat.len() {
            return Err(VimError::Dimension {
                context: "loss inputs",
                expected: y.len(),
                found: yhat.len(),
            });
        }
        y.iter()
            .zip(yhat)
            .map(|(&a, &b)| self.checked(a, b))
            .collect()
    }
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Loss::Quadratic => "quadratic",
            Loss::CrossEntropy => "cross_entropy",
        })
    }
}

/// Linear-Gaussian model `y = beta' X + noise`, `X ~ N(mean, sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLinearSpec {
    pub mean: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub beta: DVector<f64>,
    pub noise_var: f64,
}

impl GaussianLinearSpec {
    pub fn new(
        mean: DVector<f64>,
        sigma: DMatrix<f64>,
        beta: DVector<f64>,
        noise_var: f64,
    ) -> Result<Self> {
        let p = mean.len();
        if sigma.shape() != (p, p) {
            return Err(VimError::Dimension {
                context: "covariance",
                expected: p,
                found: sigma.nrows(),
            });
        }
        if beta.len() != p {
            return Err(VimError::Dimension {
                context: "coefficients",
                expected: p,
                found: beta.len(),
            });
        }
        if !(noise_var >= 0.0) {
            return Err(VimError::invalid("noise variance must be nonnegative"));
        }
        if (&sigma - sigma.transpose()).amax() > 1e-12 {
            return Err(VimError::invalid("covariance is not symmetric"));
        }
        let min_eig = sigma.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -1e-10 {
            return Err(VimError::invalid(format!(
                "covariance is not positive semidefinite (eigenvalue {min_eig})"
            )));
        }
        Ok(Self {
            mean,
            sigma,
            beta,
            noise_var,
        })
    }

    /// Zero-mean, noise-free model with covariance `sigma`.
    pub fn centered(sigma: DMatrix<f64>, beta: Vec<f64>) -> Result<Self> {
        let p = beta.len();
        Self::new(DVector::zeros(p), sigma, DVector::from_vec(beta), 0.0)
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }
}

/// `sigma[i][j] = rho^|i-j|`.
pub fn toeplitz_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| rho.powi((i as i32 - j as i32).abs()))
}

/// Standardizes every column to zero mean and unit sample (n-1) standard
/// deviation. The target is left untouched.
pub fn standardize(d: &Dataset) -> Result<Dataset> {
    let n = d.n() as f64;
    let mut x = d.x.clone();
    for j in 0..d.p() {
        let col = d.x.column(j);
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        if !(sd > 0.0) || sd <= 1e-12 * mean.abs().max(1.0) {
            return Err(VimError::DegenerateColumn {
                column: d.names[j].clone(),
            });
        }
        for v in x.column_mut(j).iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
    Ok(Dataset {
        x,
        y: d.y.clone(),
        names: d.names.clone(),
        standardized: true,
    })
}

/// `n` i.i.d. rows from `N(mean, sigma)` via a Cholesky factor (with a small
/// diagonal jitter when sigma is only positive semidefinite).
pub fn sample_gaussian(
    n: usize,
    mean: &DVector<f64>,
    sigma: &DMatrix<f64>,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let p = mean.len();
    let l = linalg::cholesky_jittered(sigma)?;
    let mut rng = rng::rng_from(seed);
    let mut out = DMatrix::zeros(n, p);
    let mut z = DVector::zeros(p);
    for i in 0..n {
        for k in 0..p {
            z[k] = StandardNormal.sample(&mut rng);
        }
        let row = &l * &z;
        for k in 0..p {
            out[(i, k)] = mean[k] + row[k];
        }
    }
    Ok(out)
}

/// Rows drawn from `N(0, sigma)` with `sigma[i][j] = rho^|i-j|`.
pub fn gen_toeplitz_gaussian(n: usize, p: usize, rho: f64, seed: u64) -> Result<DMatrix<f64>> {
    if n < 1 || p < 1 {
        return Err(VimError::invalid("n and p must be at least 1"));
    }
    if !(rho.abs() < 1.0) {
        return Err(VimError::invalid(format!("|rho| must be < 1, got {rho}")));
    }
    sample_gaussian(n, &DVector::zeros(p), &toeplitz_covariance(p, rho), seed)
}

/// Noise-free part of the polynomial benchmark response.
#[inline]
pub fn poly_mean(row: impl Fn(usize) -> f64) -> f64 {
    row(0) + 2.0 * row(1) - row(4) * row(4) + row(7) * row(8)
}

/// Features of the polynomial benchmark that do not enter the response.
pub const POLY_NULL_FEATURES: [usize; 5] = [2, 3, 5, 6, 9];

/// `y = x0 + 2 x1 - x4^2 + x7 x8 + eps`, `eps ~ N(0, noise_sd^2)`.
pub fn gen_poly_response(x: &DMatrix<f64>, noise_sd: f64, seed: u64) -> Result<Vec<f64>> {
    if x.ncols() < 9 {
        return Err(VimError::Dimension {
            context: "polynomial response needs at least 9 columns",
            expected: 9,
            found: x.ncols(),
        });
    }
    if !(noise_sd >= 0.0) {
        return Err(VimError::invalid("noise_sd must be nonnegative"));
    }
    let mut rng = rng::rng_from(seed);
    Ok((0..x.nrows())
        .map(|i| {
            let eps: f64 = StandardNormal.sample(&mut rng);
            poly_mean(|j| x[(i, j)]) + noise_sd * eps
        })
        .collect())
}

/// Two Gaussian features with correlation `rho`, noise-free `y = beta x0`.
pub fn gen_linear_pair(n: usize, rho: f64, beta: f64, seed: u64) -> Result<Dataset> {
    if n < 1 {
        return Err(VimError::invalid("n must be at least 1"));
    }
    let x = gen_toeplitz_gaussian(n, 2, rho, seed)?;
    let y = x.column(0).iter().map(|v| beta * v).collect();
    Dataset::from_unnamed(x, y)
}

/// Toeplitz design (p = 10) with the polynomial response; the covariates and
/// the noise use independent streams of `seed`.
pub fn gen_poly_dataset(n: usize, rho: f64, noise_sd: f64, seed: u64) -> Result<Dataset> {
    let x = gen_toeplitz_gaussian(n, 10, rho, rng::derive_seed(seed, rng::STREAM_DATA))?;
    let y = gen_poly_response(&x, noise_sd, rng::derive_seed(seed, rng::STREAM_NOISE))?;
    Dataset::from_unnamed(x, y)
}

/// Reads a headed, comma-delimited numeric file. Every column except
/// `target` becomes a feature, in file order.
pub fn load_csv(path: &Path, target: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| VimError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| VimError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| VimError::MissingColumn(target.to_string()))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut y = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| VimError::Csv(e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != headers.len() {
            return Err(VimError::Csv(format!(
                "line {line} has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        let mut feature = 0;
        for (k, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| VimError::Parse {
                row: line,
                column: headers[k].clone(),
                value: cell.to_string(),
            })?;
            if value.is_nan() {
                return Err(VimError::NanCell {
                    row: line,
                    column: headers[k].clone(),
                });
            }
            if k == target_idx {
                y.push(value);
            } else {
                columns[feature].push(value);
                feature += 1;
            }
        }
    }
    let n = y.len();
    let x = DMatrix::from_fn(n, names.len(), |i, j| columns[j][i]);
    Dataset::new(x, y, names)
}

/// Seeded shuffle followed by a partition into consecutive blocks whose sizes
/// follow `fractions` (largest-remainder rounding).
pub fn split(d: &Dataset, fractions: &[f64], seed: u64) -> Result<Vec<Dataset>> {
    Ok(split_indices(d.n(), fractions, seed)?
        .iter()
        .map(|rows| d.subset_rows(rows))
        .collect())
}

/// Row indices of each part produced by [`split`].
pub fn split_indices(n: usize, fractions: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0)) {
        return Err(VimError::invalid("split fractions must be positive"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(VimError::invalid(format!(
            "split fractions sum to {total}, expected 1"
        )));
    }
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        sizes[k] += 1;
    }
    if let Some(k) = sizes.iter().position(|&s| s == 0) {
        return Err(VimError::invalid(format!(
            "split part {k} would be empty (n = {n})"
        )));
    }
    let perm = rng::permutation(n, seed);
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for s in sizes {
        parts.push(perm[start..start + s].to_vec());
        start += s;
    }
    Ok(parts)
}

/// Sample Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn ds(cols: &[&[f64]], y: &[f64]) -> Dataset {
        let n = y.len();
        let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        Dataset::from_unnamed(x, y.to_vec()).unwrap()
    }

    #[test]
    fn standardize_symmetric_column() {
        let d = ds(&[&[1.0, 2.0, 3.0], &[0.0, 5.0, 1.0]], &[1.0, 2.0, 3.0]);
        let s = standardize(&d).unwrap();
        let col = s.column(0);
        for (a, b) in col.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(s.y(), d.y());
        assert!(s.is_standardized());
    }

    #[test]
    fn standardize_is_idempotent() {
        let x = gen_toeplitz_gaussian(200, 3, 0.3, 5).unwrap();
        let d = Dataset::from_unnamed(x, vec![0.0; 200]).unwrap();
        let once = standardize(&d).unwrap();
        let twice = standardize(&once).unwrap();
        assert!((once.x() - twice.x()).amax() < 1e-12);
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let d = ds(&[&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]], &[0.0, 0.0, 1.0]);
        match standardize(&d) {
            Err(VimError::DegenerateColumn { column }) => assert_eq!(column, "X1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn construction_rejects_duplicates_and_nan() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        assert!(matches!(
            Dataset::from_unnamed(x, vec![0.0; 3]),
            Err(VimError::DuplicateColumns { .. })
        ));
        let x = DMatrix::from_row_slice(2, 1, &[1.0, f64::NAN]);
        assert!(matches!(
            Dataset::from_unnamed(x, vec![0.0; 2]),
            Err(VimError::NonFinite { .. })
        ));
    }

    #[test]
    fn toeplitz_rejects_unit_rho() {
        assert!(matches!(
            gen_toeplitz_gaussian(10, 2, 1.0, 0),
            Err(VimError::InvalidParameter(_))
        ));
    }

    #[test]
    fn toeplitz_independent_case() {
        let x = gen_toeplitz_gaussian(10_000, 3, 0.0, 11).unwrap();
        let c0: Vec<f64> = x.column(0).iter().copied().collect();
        let c2: Vec<f64> = x.column(2).iter().copied().collect();
        assert!(correlation(&c0, &c2).abs() < 0.05);
    }

    #[test]
    fn toeplitz_correlation_matches() {
        let x = gen_toeplitz_gaussian(50_000, 2, 0.6, 1).unwrap();
        let c0: Vec<f64> = x.column(0).iter().copied().collect();
        let c1: Vec<f64> = x.column(1).iter().copied().collect();
        assert!((correlation(&c0, &c1) - 0.6).abs() < 0.02);
    }

    #[test]
    fn poly_response_examples() {
        let zero = DMatrix::zeros(1, 10);
        assert_eq!(gen_poly_response(&zero, 0.0, 1).unwrap(), vec![0.0]);
        let row = DMatrix::from_row_slice(1, 10, &[1., 1., 0., 0., 2., 0., 0., 3., 1., 0.]);
        assert_eq!(gen_poly_response(&row, 0.0, 1).unwrap(), vec![2.0]);
        assert!(gen_poly_response(&DMatrix::zeros(1, 8), 0.0, 1).is_err());
    }

    #[test]
    fn poly_null_features_do_not_move_response() {
        let base = [0.3, -1.2, 0.5, 0.7, 1.1, -0.4, 0.9, 0.2, -0.8, 1.5];
        let f0 = poly_mean(|j| base[j]);
        for &j in &POLY_NULL_FEATURES {
            let mut moved = base;
            moved[j] += 3.7;
            assert_eq!(poly_mean(|k| moved[k]), f0);
        }
        for j in [0, 1, 4, 7, 8] {
            let mut moved = base;
            moved[j] += 3.7;
            assert_ne!(poly_mean(|k| moved[k]), f0);
        }
    }

    #[test]
    fn linear_pair_variance() {
        let d = gen_linear_pair(50_000, 0.6, 2.0, 4).unwrap();
        let y = d.y();
        let m = y.iter().sum::<f64>() / y.len() as f64;
        let v = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (y.len() - 1) as f64;
        assert!((v / 4.0 - 1.0).abs() < 0.02);
        let d0 = gen_linear_pair(20_000, 0.0, 1.0, 4).unwrap();
        assert!(correlation(&d0.column(0), &d0.column(1)).abs() < 0.05);
    }

    #[test]
    fn generators_are_pure() {
        assert_eq!(
            gen_toeplitz_gaussian(30, 4, 0.6, 9).unwrap(),
            gen_toeplitz_gaussian(30, 4, 0.6, 9).unwrap()
        );
        assert_eq!(gen_linear_pair(30, 0.6, 1.0, 2).unwrap(), gen_linear_pair(30, 0.6, 1.0, 2).unwrap());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let x = gen_toeplitz_gaussian(10, 2, 0.1, 1).unwrap();
        let d = Dataset::from_unnamed(x, (0..10).map(f64::from).collect()).unwrap();
        let parts = split(&d, &[0.7, 0.3], 3).unwrap();
        assert_eq!(parts[0].n(), 7);
        assert_eq!(parts[1].n(), 3);
        assert_eq!(parts, split(&d, &[0.7, 0.3], 3).unwrap());
        let whole = split(&d, &[1.0], 3).unwrap();
        let mut ys = whole[0].y().to_vec();
        ys.sort_by(f64::total_cmp);
        assert_eq!(ys, d.y());
        assert!(matches!(
            split(&d, &[0.7, 0.2], 3),
            Err(VimError::InvalidParameter(_))
        ));
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_read_back() {
        let f = write_tmp("a,b,t\n1,2,3\n4,5,6\n7,8.5,9\n");
        let d = load_csv(f.path(), "t").unwrap();
        assert_eq!(d.p(), 2);
        assert_eq!(d.names(), ["a", "b"]);
        assert_eq!(d.y(), [3.0, 6.0, 9.0]);
        assert_eq!(d.x()[(2, 1)], 8.5);
    }

    #[test]
    fn csv_errors_are_distinct() {
        let f = write_tmp("a,b,t\n1,2,3\n4,5,6\n");
        assert!(matches!(load_csv(f.path(), "z"), Err(VimError::MissingColumn(_))));
        let f = write_tmp("a,b,t\n1,2,3\n4,abc,6\n");
        match load_csv(f.path(), "t") {
            Err(VimError::Parse { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (3, "b", "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let f = write_tmp("a,b,t\n1,2,3\n4,NaN,6\n");
        assert!(matches!(load_csv(f.path(), "t"), Err(VimError::NanCell { .. })));
        assert!(matches!(
            load_csv(Path::new("/nonexistent/file.csv"), "t"),
            Err(VimError::Io { .. })
        ));
    }

    #[test]
    fn gaussian_spec_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(GaussianLinearSpec::centered(bad, vec![1.0, 0.0]).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianLinearSpec::centered(indefinite, vec![1.0, 0.0]).is_err());
        assert!(GaussianLinearSpec::centered(toeplitz_covariance(2, 0.6), vec![1.0, 0.0]).is_ok());
    }

    #[test]
    fn cross_entropy_domain() {
        assert!((Loss::CrossEntropy.checked(1.0, 0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(Loss::CrossEntropy.checked(1.0, 1.0).is_err());
        assert!(Loss::CrossEntropy.checked(0.5, 0.5).is_err());
        assert_eq!(Loss::Quadratic.value(3.0, 3.0), 0.0);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn split_is_disjoint_and_exhaustive(n in 2usize..200, a in 0.05f64..0.95, seed: u64) {
            let fr = [a, 1.0 - a];
            if let Ok(parts) = split_indices(n, &fr, seed) {
                let mut all: Vec<usize> = parts.concat();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }

        #[test]
        fn toeplitz_generator_is_deterministic(seed: u64, rho in -0.9f64..0.9) {
            let a = gen_toeplitz_gaussian(5, 3, rho, seed).unwrap();
            let b = gen_toeplitz_gaussian(5, 3, rho, seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
