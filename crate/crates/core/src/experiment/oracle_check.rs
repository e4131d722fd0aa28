//! Identity suite over exactly enumerated joints.

use std::fmt;

use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use crate::data::{toeplitz_covariance, GaussianLinearSpec, Loss};
use crate::error::{Result, VimError};
use crate::estimators::IndexTag;
use crate::oracle::{self, fixtures, DiscreteJoint, Marginalization, TsiForm};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, max_deviation: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            max_deviation,
            tolerance,
            passed: max_deviation <= tolerance,
            detail,
        }
    }

    fn failed(name: &str, e: VimError) -> Self {
        Self {
            name: name.to_string(),
            max_deviation: f64::INFINITY,
            tolerance: 0.0,
            passed: false,
            detail: format!("error: {e}"),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<40} max_dev={:.3e} tol={:.0e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.max_deviation,
            self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, "  {}", self.detail)?;
        }
        Ok(())
    }
}

const QUADRATIC_FORMS: [TsiForm; 5] = [
    TsiForm::ConditionalVariance,
    TsiForm::SquaredGap,
    TsiForm::RiskDifference,
    TsiForm::Marginalization,
    TsiForm::HalfPerturbation,
];

fn joint_seed(seed: u64, family: u64, k: usize) -> u64 {
    rng::derive_path(seed, &[family, k as u64])
}

fn small_p(k: usize) -> usize {
    2 + k % 2
}

fn guarded(name: &str, f: impl FnOnce() -> Result<CheckResult>) -> CheckResult {
    f().unwrap_or_else(|e| CheckResult::failed(name, e))
}

/// Largest pairwise gap between the quadratic-loss TSI forms.
pub fn tsi_form_spread(d: &DiscreteJoint, j: usize) -> Result<f64> {
    let v = QUADRATIC_FORMS
        .iter()
        .map(|&f| oracle::exact_tsi(d, j, Loss::Quadratic, f))
        .collect::<Result<Vec<f64>>>()?;
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

fn check_tsi_forms(seed: u64, n_joints: usize) -> CheckResult {
    let name = "tsi_forms_1_to_5_agree";
    guarded(name, || {
        let mut worst = 0.0f64;
        for k in 0..n_joints {
            let d = fixtures::random_joint(small_p(k), 3, joint_seed(seed, 1, k));
            for j in 0..d.p() {
                worst = worst.max(tsi_form_spread(&d, j)?);
            }
        }
        Ok(CheckResult::new(name, worst, 1e-12, format!("{n_joints} random joints")))
    })
}

fn binary_target(d: &DiscreteJoint) -> Result<DiscreteJoint> {
    let ny = d.y_support().len();
    let mut probs = vec![0.0; d.n_configs() * 2];
    for cx in 0..d.n_configs() {
        for yi in 0..ny {
            probs[cx * 2 + yi % 2] += d.prob(cx, yi);
        }
    }
    DiscreteJoint::new(d.supports().to_vec(), vec![0.0, 1.0], probs)
}

fn check_mutual_information(seed: u64, n_joints: usize) -> CheckResult {
    let name = "cross_entropy_tsi_is_mutual_information";
    guarded(name, || {
        let mut worst = 0.0f64;
        for k in 0..n_joints {
            let d = binary_target(&fixtures::random_joint(small_p(k), 3, joint_seed(seed, 2, k)))?;
            for j in 0..d.p() {
                let risk = oracle::exact_tsi(&d, j, Loss::CrossEntropy, TsiForm::RiskDifference)?;
                let marg = oracle::exact_tsi(&d, j, Loss::CrossEntropy, TsiForm::Marginalization)?;
                let mi = oracle::exact_tsi(&d, j, Loss::CrossEntropy, TsiForm::MutualInformation)?;
                worst = worst.max((risk - mi).abs()).max((marg - mi).abs());
            }
        }
        Ok(CheckResult::new(name, worst, 1e-10, String::new()))
    })
}

fn check_minimal_axiom_null(seed: u64, n_joints: usize) -> CheckResult {
    let name = "minimal_axiom_null_feature_zero";
    guarded(name, || {
        let mut worst = 0.0f64;
        let tags = [IndexTag::Tsi, IndexTag::Pfi, IndexTag::MSage, IndexTag::MSageVf, IndexTag::ScSage];
        for k in 0..n_joints {
            let p = small_p(k);
            let null = k % p;
            let d = fixtures::factored_null_joint(p, null, 3, joint_seed(seed, 3, k));
            for tag in tags {
                worst = worst.max(oracle::exact_index(&d, null, tag, Loss::Quadratic)?.value.abs());
            }
        }
        Ok(CheckResult::new(name, worst, 1e-10, "TSI, PFI, mSAGE, mSAGEvf, scSAGE".into()))
    })
}

fn check_non_null_positive(seed: u64, n_joints: usize) -> CheckResult {
    let name = "minimal_axiom_dependent_feature_positive";
    guarded(name, || {
        let mut violations = 0usize;
        let mut smallest = f64::INFINITY;
        for k in 0..n_joints {
            let d = fixtures::random_joint(small_p(k), 3, joint_seed(seed, 4, k));
            for j in 0..d.p() {
                if d.supports()[j].len() < 2 || oracle::factorization_deviation(&d, j)? < 1e-9 {
                    continue;
                }
                let t = oracle::exact_tsi(&d, j, Loss::Quadratic, TsiForm::RiskDifference)?;
                smallest = smallest.min(t);
                if !(t > 0.0) {
                    violations += 1;
                }
            }
        }
        Ok(CheckResult::new(
            name,
            violations as f64,
            0.0,
            format!("smallest TSI {smallest:.3e}"),
        ))
    })
}

fn check_witness() -> CheckResult {
    let name = "correlated_coins_witness";
    guarded(name, || {
        let d = fixtures::correlated_coins();
        let tsi = oracle::exact_tsi(&d, 0, Loss::Quadratic, TsiForm::RiskDifference)?;
        let vf = oracle::exact_value_function(&d, &[0], Loss::Quadratic, Marginalization::Conditional)?;
        let shap = oracle::exact_shapley(&d, 0, Loss::Quadratic, Marginalization::Conditional)?;
        let dev = tsi.abs().max((vf - 0.09).abs()).max((shap - 0.045).abs());
        Ok(CheckResult::new(
            name,
            dev,
            1e-12,
            format!("TSI(x1) = {tsi:.6}, SAGEvf(x1) = {vf:.6}, cSAGE(x1) = {shap:.6}"),
        ))
    })
}

fn check_sc_sage(seed: u64, n_joints: usize) -> CheckResult {
    let name = "scsage_equals_tsi";
    guarded(name, || {
        let mut worst = 0.0f64;
        for k in 0..n_joints {
            let d = fixtures::random_joint(small_p(k), 3, joint_seed(seed, 5, k));
            for j in 0..d.p() {
                let sc = oracle::exact_sc_sage(&d, j, Loss::Quadratic)?;
                let t = oracle::exact_tsi(&d, j, Loss::Quadratic, TsiForm::RiskDifference)?;
                worst = worst.max((sc - t).abs());
            }
        }
        Ok(CheckResult::new(name, worst, 1e-12, String::new()))
    })
}

fn check_factorization(seed: u64, n_joints: usize) -> CheckResult {
    let name = "independent_feature_factorizes";
    guarded(name, || {
        let mut worst = 0.0f64;
        for k in 0..n_joints {
            let p = small_p(k);
            let null = k % p;
            let d = fixtures::independent_null_joint(p, null, joint_seed(seed, 6, k));
            worst = worst.max(oracle::factorization_deviation(&d, null)?);
            for tag in [IndexTag::Tsi, IndexTag::SageVf, IndexTag::Sage, IndexTag::Pfi] {
                worst = worst.max(oracle::exact_index(&d, null, tag, Loss::Quadratic)?.value.abs());
            }
        }
        Ok(CheckResult::new(name, worst, 1e-10, "factorization, TSI, SAGEvf, cSAGE, PFI".into()))
    })
}

fn check_shapley_efficiency(seed: u64) -> CheckResult {
    let name = "gaussian_shapley_efficiency";
    guarded(name, || {
        let p = 8;
        let mut r = rng::rng_from(joint_seed(seed, 7, 0));
        let beta: Vec<f64> = (0..p).map(|_| rand::Rng::random_range(&mut r, -2.0..2.0)).collect();
        let spec = GaussianLinearSpec::centered(toeplitz_covariance(p, 0.6), beta)?;
        let all: Vec<usize> = (0..p).collect();
        let mut worst = 0.0f64;
        for mode in [Marginalization::Conditional, Marginalization::Marginal] {
            let phi = oracle::gaussian_shapley(&spec, mode)?;
            let total = oracle::gaussian_value(&spec, &all, mode)?;
            worst = worst.max((phi.iter().sum::<f64>() - total).abs());
        }
        Ok(CheckResult::new(name, worst, 1e-10, format!("p = {p}")))
    })
}

fn check_joint_file(path: &std::path::Path) -> CheckResult {
    let name = "joint_file_tsi_forms_agree";
    guarded(name, || {
        let text = std::fs::read_to_string(path).map_err(|source| VimError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let d = DiscreteJoint::parse(&text)?;
        let mut worst = 0.0f64;
        let mut values = Vec::new();
        for j in 0..d.p() {
            worst = worst.max(tsi_form_spread(&d, j)?);
            values.push(format!(
                "{} = {:.6}",
                d.names()[j],
                oracle::exact_tsi(&d, j, Loss::Quadratic, TsiForm::RiskDifference)?
            ));
        }
        Ok(CheckResult::new(name, worst, 1e-12, format!("TSI: {}", values.join(", "))))
    })
}

/// Default number of random joints per identity.
pub const DEFAULT_JOINTS: usize = 100;

/// Runs every identity with joints derived from `seed`.
pub fn oracle_suite(seed: u64, n_joints: usize) -> Vec<CheckResult> {
    vec![
        check_tsi_forms(seed, n_joints),
        check_mutual_information(seed, n_joints),
        check_minimal_axiom_null(seed, n_joints),
        check_non_null_positive(seed, n_joints),
        check_witness(),
        check_sc_sage(seed, n_joints),
        check_factorization(seed, n_joints),
        check_shapley_efficiency(seed),
    ]
}

pub fn run_oracle_check(cfg: &ExperimentConfig) -> Result<Vec<CheckResult>> {
    cfg.validate()?;
    if cfg.kind != ExperimentKind::OracleCheck {
        return Err(VimError::Config(format!(
            "`oracle-check` cannot run an experiment of kind {:?}",
            cfg.kind
        )));
    }
    let mut out = oracle_suite(cfg.seed, cfg.n_joints.unwrap_or(DEFAULT_JOINTS));
    if let Some(path) = &cfg.joint {
        out.push(check_joint_file(path));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        for c in oracle_suite(7, 20) {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn witness_line_reports_values() {
        let c = check_witness();
        assert!(c.detail.contains("TSI(x1) = 0.000000"));
        assert!(c.detail.contains("SAGEvf(x1) = 0.090000"));
    }

    #[test]
    fn unreadable_joint_file_fails_the_check() {
        let c = check_joint_file(std::path::Path::new("/nonexistent/joint.txt"));
        assert!(!c.passed);
    }
}
