//! Replacement draws for one coordinate (or a block of coordinates) given the
//! rest: marginal permutation, Gaussian conditional and residual permutation.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VimError};
use crate::linalg;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    MarginalPermutation,
    GaussianConditional,
    ResidualPermutation,
}

impl std::fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PerturbationKind::MarginalPermutation => "marginal_permutation",
            PerturbationKind::GaussianConditional => "gaussian_conditional",
            PerturbationKind::ResidualPermutation => "residual_permutation",
        })
    }
}

/// `x_j ~ intercept + coef . x_{-j}` with residual scale `sd`.
#[derive(Debug, Clone)]
struct LinearCond {
    intercept: f64,
    coef: DVector<f64>,
    sd: f64,
}

impl LinearCond {
    fn predict(&self, x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
        let mut v = self.intercept;
        let mut k = 0;
        for c in 0..x.ncols() {
            if c != j {
                v += self.coef[k] * x[(i, c)];
                k += 1;
            }
        }
        v
    }
}

#[derive(Debug, Clone)]
enum State {
    Marginal,
    Gaussian {
        mean: DVector<f64>,
        sigma: DMatrix<f64>,
        conds: Vec<LinearCond>,
    },
    Residual {
        fits: Vec<LinearCond>,
        residuals: Vec<Vec<f64>>,
    },
}

/// A fitted perturbation engine. Immutable after fitting.
#[derive(Debug, Clone)]
pub struct ConditionalSampler {
    kind: PerturbationKind,
    p: usize,
    state: State,
}

/// Fits a sampler of the given kind on the rows of `x`.
pub fn fit_sampler(kind: PerturbationKind, x: &DMatrix<f64>) -> Result<ConditionalSampler> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(VimError::InsufficientRows { needed: 2, found: n });
    }
    match kind {
        PerturbationKind::MarginalPermutation => Ok(ConditionalSampler {
            kind,
            p,
            state: State::Marginal,
        }),
        PerturbationKind::GaussianConditional => {
            ConditionalSampler::gaussian(linalg::column_means(x), linalg::sample_covariance(x))
        }
        PerturbationKind::ResidualPermutation => {
            let mut fits = Vec::with_capacity(p);
            let mut residuals = Vec::with_capacity(p);
            for j in 0..p {
                let rest = linalg::complement(p, &[j]);
                let xr = linalg::select_columns(x, &rest);
                let target: Vec<f64> = x.column(j).iter().copied().collect();
                let (intercept, coef) = linalg::least_squares(&xr, &target, 0.0)?;
                let fit = LinearCond {
                    intercept,
                    coef,
                    sd: 0.0,
                };
                residuals.push((0..n).map(|i| x[(i, j)] - fit.predict(x, i, j)).collect());
                fits.push(fit);
            }
            Ok(ConditionalSampler {
                kind,
                p,
                state: State::Residual { fits, residuals },
            })
        }
    }
}

impl ConditionalSampler {
    /// Gaussian conditional sampler with a known mean and covariance.
    pub fn gaussian(mean: DVector<f64>, sigma: DMatrix<f64>) -> Result<ConditionalSampler> {
        let p = mean.len();
        if sigma.shape() != (p, p) {
            return Err(VimError::Dimension {
                context: "sampler covariance",
                expected: p,
                found: sigma.nrows(),
            });
        }
        let mut conds = Vec::with_capacity(p);
        for j in 0..p {
            let rest = linalg::complement(p, &[j]);
            let s_rr = linalg::select(&sigma, &rest, &rest);
            let s_rj = linalg::select(&sigma, &rest, &[j]);
            let b = linalg::spd_solve(&s_rr, &s_rj)?;
            let var = sigma[(j, j)] - (s_rj.transpose() * &b)[(0, 0)];
            if !(var > 1e-10 * sigma[(j, j)].abs().max(f64::MIN_POSITIVE)) {
                return Err(VimError::DegenerateDenominator { feature: j });
            }
            let coef = b.column(0).into_owned();
            let mu_rest = DVector::from_iterator(rest.len(), rest.iter().map(|&r| mean[r]));
            conds.push(LinearCond {
                intercept: mean[j] - coef.dot(&mu_rest),
                coef,
                sd: var.sqrt(),
            });
        }
        Ok(ConditionalSampler {
            kind: PerturbationKind::GaussianConditional,
            p,
            state: State::Gaussian { mean, sigma, conds },
        })
    }

    pub fn kind(&self) -> PerturbationKind {
        self.kind
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn is_conditional(&self) -> bool {
        self.kind != PerturbationKind::MarginalPermutation
    }

    /// Stored covariance for the Gaussian kind.
    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        match &self.state {
            State::Gaussian { sigma, .. } => Some(sigma),
            _ => None,
        }
    }

    pub fn mean(&self) -> Option<&DVector<f64>> {
        match &self.state {
            State::Gaussian { mean, .. } => Some(mean),
            _ => None,
        }
    }

    /// Residuals of the column-`j` regression on the fitting rows.
    pub fn residuals(&self, j: usize) -> Option<&[f64]> {
        match &self.state {
            State::Residual { residuals, .. } => residuals.get(j).map(|r| r.as_slice()),
            _ => None,
        }
    }

    fn check_x(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.p {
            return Err(VimError::Dimension {
                context: "sampler inputs",
                expected: self.p,
                found: x.ncols(),
            });
        }
        Ok(())
    }

    /// `n_draws` replacement columns for feature `j` of `x`. Draw `k` uses
    /// the sub-seed `derive_seed(seed, k)`.
    pub fn draw(&self, x: &DMatrix<f64>, j: usize, n_draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.check_x(x)?;
        if j >= self.p {
            return Err(VimError::invalid(format!("feature {j} out of range")));
        }
        if n_draws == 0 {
            return Err(VimError::invalid("n_draws must be >= 1"));
        }
        let k = x.nrows();
        let draws = (0..n_draws as u64).map(|d| rng::derive_seed(seed, d));
        match &self.state {
            State::Marginal => Ok(draws
                .map(|s| {
                    let perm = rng::permutation(k, s);
                    perm.iter().map(|&r| x[(r, j)]).collect()
                })
                .collect()),
            State::Gaussian { conds, .. } => {
                let c = &conds[j];
                let mu: Vec<f64> = (0..k).map(|i| c.predict(x, i, j)).collect();
                Ok(draws
                    .map(|s| {
                        let mut r = rng::rng_from(s);
                        mu.iter()
                            .map(|m| {
                                let z: f64 = StandardNormal.sample(&mut r);
                                m + c.sd * z
                            })
                            .collect()
                    })
                    .collect())
            }
            State::Residual { fits, .. } => {
                let c = &fits[j];
                let fitted: Vec<f64> = (0..k).map(|i| c.predict(x, i, j)).collect();
                let res: Vec<f64> = (0..k).map(|i| x[(i, j)] - fitted[i]).collect();
                Ok(draws
                    .map(|s| {
                        let perm = rng::permutation(k, s);
                        fitted.iter().zip(&perm).map(|(f, &r)| f + res[r]).collect()
                    })
                    .collect())
            }
        }
    }

    /// `n_draws` copies of `x` in which every column outside `known` is
    /// redrawn given the columns in `known`. The conditional kinds sample
    /// from the law of the complement given `x^known`; the marginal kind
    /// permutes the complement rows jointly, independently of `x^known`.
    pub fn draw_complement(
        &self,
        x: &DMatrix<f64>,
        known: &[usize],
        n_draws: usize,
        seed: u64,
    ) -> Result<Vec<DMatrix<f64>>> {
        self.check_x(x)?;
        if n_draws == 0 {
            return Err(VimError::invalid("n_draws must be >= 1"));
        }
        if known.iter().any(|&j| j >= self.p) {
            return Err(VimError::invalid("coalition index out of range"));
        }
        let unknown = linalg::complement(self.p, known);
        if unknown.is_empty() {
            return Ok(vec![x.clone(); n_draws]);
        }
        let k = x.nrows();
        let seeds = (0..n_draws as u64).map(|d| rng::derive_seed(seed, d));
        let permuted = |s: u64| {
            let perm = rng::permutation(k, s);
            let mut out = x.clone();
            for &u in &unknown {
                for i in 0..k {
                    out[(i, u)] = x[(perm[i], u)];
                }
            }
            out
        };
        match &self.state {
            State::Marginal => Ok(seeds.map(permuted).collect()),
            State::Residual { .. } if known.is_empty() => Ok(seeds.map(permuted).collect()),
            State::Residual { .. } if unknown.len() == 1 => {
                let u = unknown[0];
                let cols = self.draw(x, u, n_draws, seed)?;
                Ok(cols
                    .into_iter()
                    .map(|c| {
                        let mut out = x.clone();
                        out.set_column(u, &DVector::from_vec(c));
                        out
                    })
                    .collect())
            }
            State::Residual { .. } => Err(VimError::SamplerKind(
                "residual_permutation redraws one coordinate at a time; use gaussian_conditional for larger blocks"
                    .into(),
            )),
            State::Gaussian { mean, sigma, .. } => {
                let s_uu = linalg::select(sigma, &unknown, &unknown);
                let (b, cov) = if known.is_empty() {
                    (DMatrix::zeros(unknown.len(), 0), s_uu)
                } else {
                    let s_ss = linalg::select(sigma, known, known);
                    let s_su = linalg::select(sigma, known, &unknown);
                    // B = S_us S_ss^{-1}, stored transposed by the solve
                    let bt = linalg::spd_solve(&s_ss, &s_su)?;
                    let cov = &s_uu - s_su.transpose() * &bt;
                    (bt.transpose(), cov)
                };
                let cov = (&cov + cov.transpose()) * 0.5;
                let l = linalg::cholesky_jittered(&cov)?;
                let mu_u: Vec<f64> = unknown.iter().map(|&u| mean[u]).collect();
                let mu_s: Vec<f64> = known.iter().map(|&s| mean[s]).collect();
                let mut centers = DMatrix::zeros(k, unknown.len());
                for i in 0..k {
                    for (a, m) in mu_u.iter().enumerate() {
                        let mut v = *m;
                        for (c, &s) in known.iter().enumerate() {
                            v += b[(a, c)] * (x[(i, s)] - mu_s[c]);
                        }
                        centers[(i, a)] = v;
                    }
                }
                let q = unknown.len();
                Ok(seeds
                    .map(|s| {
                        let mut r = rng::rng_from(s);
                        let mut out = x.clone();
                        let mut z = DVector::zeros(q);
                        for i in 0..k {
                            for zz in z.iter_mut() {
                                *zz = StandardNormal.sample(&mut r);
                            }
                            let e = &l * &z;
                            for (a, &u) in unknown.iter().enumerate() {
                                out[(i, u)] = centers[(i, a)] + e[a];
                            }
                        }
                        out
                    })
                    .collect())
            }
        }
    }
}

/// Copy of `x` with column `j` replaced.
pub fn with_column(x: &DMatrix<f64>, j: usize, col: &[f64]) -> DMatrix<f64> {
    let mut out = x.clone();
    for (i, v) in col.iter().enumerate() {
        out[(i, j)] = *v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{correlation, gen_toeplitz_gaussian, toeplitz_covariance};
    use proptest::prelude::*;

    #[test]
    fn marginal_draw_preserves_multiset() {
        let x = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let s = fit_sampler(PerturbationKind::MarginalPermutation, &x).unwrap();
        let mut col = s.draw(&x, 0, 1, 9).unwrap().remove(0);
        col.sort_by(f64::total_cmp);
        assert_eq!(col, vec![1.0, 2.0, 3.0]);
        assert!(!s.is_conditional());
    }

    #[test]
    fn gaussian_fit_recovers_correlation() {
        let x = gen_toeplitz_gaussian(50_000, 2, 0.6, 1).unwrap();
        let s = fit_sampler(PerturbationKind::GaussianConditional, &x).unwrap();
        let c = s.covariance().unwrap();
        let r = c[(0, 1)] / (c[(0, 0)] * c[(1, 1)]).sqrt();
        assert!((r - 0.6).abs() < 0.02, "{r}");
        assert_eq!(c, &c.transpose());
    }

    #[test]
    fn gaussian_identity_draws_are_independent() {
        let x = gen_toeplitz_gaussian(10_000, 2, 0.0, 2).unwrap();
        let s = ConditionalSampler::gaussian(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let col = s.draw(&x, 1, 1, 3).unwrap().remove(0);
        let x0: Vec<f64> = x.column(0).iter().copied().collect();
        assert!(correlation(&col, &x0).abs() < 0.05);
    }

    #[test]
    fn gaussian_conditional_mean_given_x0() {
        let s = ConditionalSampler::gaussian(DVector::zeros(2), toeplitz_covariance(2, 0.6)).unwrap();
        let x = DMatrix::from_fn(10_000, 2, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let col = s.draw(&x, 1, 1, 4).unwrap().remove(0);
        let m = col.iter().sum::<f64>() / col.len() as f64;
        assert!((m - 0.6).abs() < 0.05, "{m}");
    }

    #[test]
    fn residual_sampler_recovers_exact_residuals() {
        let n = 200;
        let x0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        // residual orthogonal to the intercept and to x0
        let raw: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        let xm = DMatrix::from_fn(n, 1, |i, _| x0[i]);
        let (a, b) = linalg::least_squares(&xm, &raw, 0.0).unwrap();
        let e: Vec<f64> = (0..n).map(|i| raw[i] - a - b[0] * x0[i]).collect();
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { x0[i] } else { 2.0 * x0[i] + e[i] });
        let s = fit_sampler(PerturbationKind::ResidualPermutation, &x).unwrap();
        for (r, t) in s.residuals(1).unwrap().iter().zip(&e) {
            assert!((r - t).abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_conditional_is_rejected() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(ConditionalSampler::gaussian(DVector::zeros(2), sigma).is_err());
    }

    #[test]
    fn zero_draws_is_an_error() {
        let x = gen_toeplitz_gaussian(10, 2, 0.3, 5).unwrap();
        let s = fit_sampler(PerturbationKind::MarginalPermutation, &x).unwrap();
        assert!(matches!(s.draw(&x, 0, 0, 1), Err(VimError::InvalidParameter(_))));
    }

    #[test]
    fn block_draw_matches_single_coordinate_law() {
        let sigma = toeplitz_covariance(3, 0.5);
        let s = ConditionalSampler::gaussian(DVector::zeros(3), sigma).unwrap();
        let x = DMatrix::from_fn(20_000, 3, |_, j| [1.0, 0.0, -1.0][j]);
        let d = s.draw_complement(&x, &[0, 2], 1, 8).unwrap().remove(0);
        let m = d.column(1).sum() / 20_000.0;
        // E[x1 | x0 = 1, x2 = -1] = 0 for the symmetric AR(1) design
        assert!(m.abs() < 0.03, "{m}");
        assert_eq!(d.column(0), x.column(0));
        assert_eq!(d.column(2), x.column(2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn draws_leave_other_columns_untouched(
            seed in 0u64..1000,
            j in 0usize..3,
            kind in prop_oneof![
                Just(PerturbationKind::MarginalPermutation),
                Just(PerturbationKind::GaussianConditional),
                Just(PerturbationKind::ResidualPermutation),
            ],
        ) {
            let x = gen_toeplitz_gaussian(60, 3, 0.4, seed).unwrap();
            let s = fit_sampler(kind, &x).unwrap();
            let col = s.draw(&x, j, 1, seed).unwrap().remove(0);
            let xt = with_column(&x, j, &col);
            for c in 0..3 {
                if c != j {
                    prop_assert_eq!(xt.column(c), x.column(c));
                }
            }
            if kind == PerturbationKind::ResidualPermutation {
                let before: f64 = x.column(j).sum();
                let after: f64 = col.iter().sum();
                prop_assert!((before - after).abs() < 1e-9 * 60.0);
            }
        }
    }
}
