//! One-sided tests of positive importance on per-sample contributions, and
//! thresholded feature selection.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

use crate::error::{Result, VimError};
use crate::estimators::{DeltaKind, ImportanceReport, MethodId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Sign,
    Wilcoxon,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: MethodId,
    pub test: TestKind,
    pub alpha: f64,
    /// Per-feature threshold actually applied (`alpha / p` under Bonferroni).
    pub threshold: f64,
    pub selected: Vec<usize>,
    pub p_values: Vec<f64>,
}

const WILCOXON_MIN: usize = 5;
const WILCOXON_EXACT_MAX: usize = 50;
const Z_MIN: usize = 30;

fn nonzero(deltas: &[f64]) -> Vec<f64> {
    deltas.iter().copied().filter(|d| *d != 0.0).collect()
}

/// Exact binomial test of `P(delta > 0) > 1/2`; zeros are discarded.
pub fn sign_test(deltas: &[f64]) -> TestResult {
    let nz = nonzero(deltas);
    let n = nz.len();
    let k = nz.iter().filter(|d| **d > 0.0).count();
    let p_value = if n == 0 || k == 0 {
        1.0
    } else {
        let b = Binomial::new(0.5, n as u64).expect("valid binomial");
        b.sf(k as u64 - 1).clamp(0.0, 1.0)
    };
    TestResult {
        kind: TestKind::Sign,
        statistic: k as f64,
        p_value,
        n_effective: n,
    }
}

/// Average ranks (1-based) of `|d|`, ties sharing the mean rank.
fn average_ranks(abs: &[f64]) -> Vec<f64> {
    let n = abs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Wilcoxon signed-rank test against a positive shift. Zeros are discarded
/// and tied magnitudes share average ranks. Up to 50 nonzero values the
/// p-value is exact (counting sign patterns); above, a normal approximation
/// with continuity and tie corrections is used.
pub fn wilcoxon_signed_rank(deltas: &[f64]) -> Result<TestResult> {
    let nz = nonzero(deltas);
    let n = nz.len();
    if n < WILCOXON_MIN {
        return Err(VimError::InsufficientSample { found: n });
    }
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let p_value = if n <= WILCOXON_EXACT_MAX {
        // doubled ranks are integers even with ties
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max: usize = doubled.iter().sum();
        let mut counts = vec![0u64; max + 1];
        counts[0] = 1;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                if counts[s] > 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let observed = (2.0 * w_plus).round() as usize;
        let tail: u64 = counts[observed..].iter().sum();
        tail as f64 / 2f64.powi(n as i32)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut tie_term = 0.0;
        let mut sorted = abs.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        if var <= 0.0 {
            1.0
        } else {
            let z = (w_plus - mean - 0.5) / var.sqrt();
            Normal::standard().sf(z)
        }
    };
    Ok(TestResult {
        kind: TestKind::Wilcoxon,
        statistic: w_plus,
        p_value: p_value.clamp(0.0, 1.0),
        n_effective: n,
    })
}

/// One-sided normal test on the mean of at least 30 contributions. With
/// zero spread the p-value is 0 for a positive mean and 1 otherwise.
pub fn z_test(deltas: &[f64]) -> Result<TestResult> {
    let n = deltas.len();
    if n < Z_MIN {
        return Err(VimError::InsufficientRows { needed: Z_MIN, found: n });
    }
    let nf = n as f64;
    let mean = deltas.iter().sum::<f64>() / nf;
    let var = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (nf - 1.0);
    let (statistic, p_value) = if var <= 0.0 {
        let p = if mean > 0.0 { 0.0 } else { 1.0 };
        (f64::INFINITY.copysign(mean), p)
    } else {
        let z = mean / (var / nf).sqrt();
        (z, Normal::standard().sf(z))
    };
    Ok(TestResult {
        kind: TestKind::Z,
        statistic,
        p_value,
        n_effective: n,
    })
}

/// Runs `kind` on one contribution vector. The Wilcoxon test falls back to
/// the sign test when fewer than five contributions are nonzero.
pub fn run_test(kind: TestKind, deltas: &[f64]) -> Result<TestResult> {
    match kind {
        TestKind::Sign => Ok(sign_test(deltas)),
        TestKind::Wilcoxon => match wilcoxon_signed_rank(deltas) {
            Err(VimError::InsufficientSample { .. }) => Ok(sign_test(deltas)),
            other => other,
        },
        TestKind::Z => z_test(deltas),
    }
}

/// Per-feature p-values and the set `{j : p_j <= threshold}`.
pub fn classify_features(r: &ImportanceReport, kind: TestKind, alpha: f64) -> Result<SelectionResult> {
    classify_features_with(r, kind, alpha, false)
}

/// As [`classify_features`], optionally with a Bonferroni threshold.
pub fn classify_features_with(
    r: &ImportanceReport,
    kind: TestKind,
    alpha: f64,
    bonferroni: bool,
) -> Result<SelectionResult> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(VimError::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if r.delta_kind == DeltaKind::None || r.features.iter().any(|f| f.deltas.is_empty()) {
        return Err(VimError::UnsupportedMethod(r.method));
    }
    let p_values = r
        .features
        .iter()
        .map(|f| run_test(kind, &f.deltas).map(|t| t.p_value))
        .collect::<Result<Vec<f64>>>()?;
    let threshold = if bonferroni { alpha / r.features.len() as f64 } else { alpha };
    let selected = p_values
        .iter()
        .enumerate()
        .filter(|(_, p)| **p <= threshold)
        .map(|(j, _)| r.features[j].feature)
        .collect();
    Ok(SelectionResult {
        method: r.method,
        test: kind,
        alpha,
        threshold,
        selected,
        p_values,
    })
}

/// Copy of `r` with each feature's p-value filled in.
pub fn with_p_values(r: &ImportanceReport, kind: TestKind) -> Result<ImportanceReport> {
    let sel = classify_features(r, kind, 1.0)?;
    let mut out = r.clone();
    for (f, p) in out.features.iter_mut().zip(sel.p_values) {
        f.p_value = Some(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{FeatureImportance, ReportMetadata};
    use proptest::prelude::*;

    #[test]
    fn sign_test_examples() {
        let t = sign_test(&[1.0; 5]);
        assert!((t.p_value - 0.03125).abs() < 1e-12);
        assert!((sign_test(&[1.0, -1.0]).p_value - 0.75).abs() < 1e-12);
        let z = sign_test(&[0.0; 4]);
        assert_eq!((z.p_value, z.n_effective), (1.0, 0));
    }

    #[test]
    fn wilcoxon_examples() {
        let t = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((t.p_value - 1.0 / 32.0).abs() < 1e-15);
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0, 2.0, 0.0, 3.0]),
            Err(VimError::InsufficientSample { found: 3 })
        ));
        let sym: Vec<f64> = (1..=40).flat_map(|k| [k as f64, -(k as f64)]).collect();
        let p = wilcoxon_signed_rank(&sym).unwrap().p_value;
        assert!((p - 0.5).abs() < 0.05, "{p}");
        let big: Vec<f64> = (1..=200).flat_map(|k| [k as f64, -(k as f64)]).collect();
        let p = wilcoxon_signed_rank(&big).unwrap().p_value;
        assert!((p - 0.5).abs() < 0.05, "{p}");
    }

    #[test]
    fn z_test_examples() {
        let zero: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((z_test(&zero).unwrap().p_value - 0.5).abs() < 1e-12);
        assert_eq!(z_test(&[2.0; 40]).unwrap().p_value, 0.0);
        assert_eq!(z_test(&[-2.0; 40]).unwrap().p_value, 1.0);
        assert!(z_test(&[1.0; 10]).is_err());
    }

    fn report(deltas: Vec<Vec<f64>>, kind: DeltaKind) -> ImportanceReport {
        ImportanceReport {
            method: MethodId::Cfi,
            features: deltas
                .into_iter()
                .enumerate()
                .map(|(j, d)| FeatureImportance {
                    feature: j,
                    name: format!("X{j}"),
                    score: 0.0,
                    std_error: None,
                    p_value: None,
                    deltas: d,
                })
                .collect(),
            delta_kind: kind,
            metadata: ReportMetadata::default(),
        }
    }

    #[test]
    fn classification_thresholds() {
        let r = report(vec![vec![1.0; 10], vec![-1.0; 10]], DeltaKind::PerSample);
        let s = classify_features(&r, TestKind::Sign, 0.05).unwrap();
        assert_eq!(s.selected, vec![0]);
        let all = classify_features(&r, TestKind::Sign, 1.0).unwrap();
        assert_eq!(all.selected, vec![0, 1]);
        let b = classify_features_with(&r, TestKind::Sign, 0.001, true).unwrap();
        assert!(b.selected.is_empty());
        let none = report(vec![vec![]], DeltaKind::None);
        assert!(matches!(
            classify_features(&none, TestKind::Sign, 0.05),
            Err(VimError::UnsupportedMethod(_))
        ));
    }

    proptest! {
        #[test]
        fn monotone_transforms_preserve_p_values(
            v in prop::collection::vec(-5.0f64..5.0, 5..40),
        ) {
            prop_assume!(v.iter().filter(|x| **x != 0.0).count() >= 5);
            let t: Vec<f64> = v.iter().map(|x| x.signum() * (x.abs().powi(3) + x.abs())).collect();
            prop_assert_eq!(sign_test(&v).p_value, sign_test(&t).p_value);
            prop_assert_eq!(
                wilcoxon_signed_rank(&v).unwrap().p_value,
                wilcoxon_signed_rank(&t).unwrap().p_value
            );
            let p = wilcoxon_signed_rank(&v).unwrap().p_value;
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
