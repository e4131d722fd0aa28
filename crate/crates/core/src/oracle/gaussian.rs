//! Closed forms for `y = beta' X + noise`, `X ~ N(mean, sigma)`, with the
//! regression function `beta' x` as the model and quadratic loss.

use super::exact::{shapley_from_values, Marginalization};
use crate::data::GaussianLinearSpec;
use crate::error::{Result, VimError};
use crate::estimators::IndexTag;
use crate::linalg;

const MAX_SHAPLEY_FEATURES: usize = 20;

fn quad(beta: &[f64], m: &nalgebra::DMatrix<f64>, idx: &[usize]) -> f64 {
    let mut acc = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        for (b, &k) in idx.iter().enumerate() {
            acc += beta[i] * m[(a, b)] * beta[k];
        }
    }
    acc
}

/// `v(S)`: conditional mode gives `beta' S_.S S_SS^-1 S_S. beta`
/// (variance explained by `E[beta' X | X^S]`); marginal mode gives
/// `beta' S beta - beta_-S' S_-S-S beta_-S`.
pub fn gaussian_value(spec: &GaussianLinearSpec, coalition: &[usize], mode: Marginalization) -> Result<f64> {
    let p = spec.p();
    if coalition.iter().any(|&k| k >= p) {
        return Err(VimError::invalid("coalition index out of range"));
    }
    let beta: Vec<f64> = spec.beta.iter().copied().collect();
    let all: Vec<usize> = (0..p).collect();
    let total = quad(&beta, &spec.sigma, &all);
    match mode {
        Marginalization::Conditional => {
            if coalition.is_empty() {
                return Ok(0.0);
            }
            let s_ss = linalg::select(&spec.sigma, coalition, coalition);
            let s_sa = linalg::select(&spec.sigma, coalition, &all);
            let b = nalgebra::DMatrix::from_column_slice(p, 1, &beta);
            let c = &s_sa * &b;
            let z = linalg::spd_solve(&s_ss, &c)?;
            Ok((c.transpose() * z)[(0, 0)])
        }
        Marginalization::Marginal => {
            let rest = linalg::complement(p, coalition);
            let s_rr = linalg::select(&spec.sigma, &rest, &rest);
            let mut beta_r = vec![0.0; p];
            for &r in &rest {
                beta_r[r] = beta[r];
            }
            Ok(total - quad(&beta_r, &s_rr, &rest))
        }
    }
}

/// All Shapley values of the chosen value function.
pub fn gaussian_shapley(spec: &GaussianLinearSpec, mode: Marginalization) -> Result<Vec<f64>> {
    let p = spec.p();
    if p > MAX_SHAPLEY_FEATURES {
        return Err(VimError::Size(format!(
            "exact Shapley values need p <= {MAX_SHAPLEY_FEATURES}, got {p}"
        )));
    }
    let values = (0..1usize << p)
        .map(|mask| {
            let s: Vec<usize> = (0..p).filter(|k| mask >> k & 1 == 1).collect();
            gaussian_value(spec, &s, mode)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(shapley_from_values(&values, p))
}

/// Closed-form population index of feature `j`.
pub fn gaussian_linear_index(spec: &GaussianLinearSpec, j: usize, index: IndexTag) -> Result<f64> {
    let p = spec.p();
    if j >= p {
        return Err(VimError::invalid(format!("feature {j} out of range (p = {p})")));
    }
    let bj = spec.beta[j];
    match index {
        IndexTag::Tsi | IndexTag::ScSage => {
            let precision = strict_inverse(spec)?;
            Ok(bj * bj / precision[(j, j)])
        }
        IndexTag::DTsi => {
            strict_inverse(spec)?;
            Ok(bj * bj)
        }
        IndexTag::Glm => Ok(bj * bj),
        IndexTag::Pfi => Ok(2.0 * bj * bj * spec.sigma[(j, j)]),
        IndexTag::SageVf => gaussian_value(spec, &[j], Marginalization::Conditional),
        IndexTag::MSageVf => gaussian_value(spec, &[j], Marginalization::Marginal),
        IndexTag::Sage => Ok(gaussian_shapley(spec, Marginalization::Conditional)?[j]),
        IndexTag::MSage => Ok(gaussian_shapley(spec, Marginalization::Marginal)?[j]),
    }
}

fn strict_inverse(spec: &GaussianLinearSpec) -> Result<nalgebra::DMatrix<f64>> {
    let chol = spec
        .sigma
        .clone()
        .cholesky()
        .ok_or_else(|| VimError::NumericalRank("covariance is singular".into()))?;
    let diag_min = (0..spec.p()).map(|i| chol.l()[(i, i)]).fold(f64::INFINITY, f64::min);
    let diag_max = (0..spec.p()).map(|i| chol.l()[(i, i)]).fold(0.0, f64::max);
    if !(diag_min > 1e-8 * diag_max) {
        return Err(VimError::NumericalRank("covariance is singular".into()));
    }
    Ok(chol.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::toeplitz_covariance;
    use nalgebra::DMatrix;

    fn fig1() -> GaussianLinearSpec {
        GaussianLinearSpec::centered(toeplitz_covariance(2, 0.6), vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn correlated_pair_truths() {
        let s = fig1();
        let tsi: Vec<f64> = (0..2).map(|j| gaussian_linear_index(&s, j, IndexTag::Tsi).unwrap()).collect();
        assert!((tsi[0] - 0.64).abs() < 1e-12 && tsi[1].abs() < 1e-12);
        let sage: Vec<f64> = (0..2).map(|j| gaussian_linear_index(&s, j, IndexTag::Sage).unwrap()).collect();
        assert!((sage[0] - 0.82).abs() < 1e-12 && (sage[1] - 0.18).abs() < 1e-12);
        assert!((gaussian_linear_index(&s, 1, IndexTag::SageVf).unwrap() - 0.36).abs() < 1e-12);
        assert!((gaussian_linear_index(&s, 0, IndexTag::Pfi).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(gaussian_linear_index(&s, 1, IndexTag::Pfi).unwrap(), 0.0);
        assert!(gaussian_linear_index(&s, 1, IndexTag::MSage).unwrap().abs() < 1e-12);
    }

    #[test]
    fn diagonal_covariance() {
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5, 1.0]));
        let s = GaussianLinearSpec::centered(sigma, vec![1.0, -2.0, 3.0]).unwrap();
        for j in 0..3 {
            let tsi = gaussian_linear_index(&s, j, IndexTag::Tsi).unwrap();
            let expect = s.beta[j] * s.beta[j] * s.sigma[(j, j)];
            assert!((tsi - expect).abs() < 1e-12);
            assert!((gaussian_linear_index(&s, j, IndexTag::Sage).unwrap() - tsi).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_covariance_is_rejected() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let s = GaussianLinearSpec::centered(sigma, vec![1.0, 0.0]).unwrap();
        assert!(gaussian_linear_index(&s, 0, IndexTag::Tsi).is_err());
    }
}
