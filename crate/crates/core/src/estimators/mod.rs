//! Variable-importance estimators. Every estimator returns an
//! [`ImportanceReport`] whose per-feature score is the mean of the stored
//! contributions.

mod perturbation;
mod refit;
mod sage;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Loss;
use crate::error::{Result, VimError};
use crate::samplers::PerturbationKind;

pub use perturbation::{estimate_cfi, estimate_pfi, estimate_sobol_cpi};
pub use refit::{
    estimate_dtsi, estimate_dtsi_prefit, estimate_glm, estimate_loci, estimate_loco,
    estimate_loco_prefit, estimate_loco_w,
};
pub use sage::{estimate_sage, estimate_sage_vf, estimate_sc_sage, estimate_value_function, SageMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodId {
    #[serde(rename = "PFI")]
    Pfi,
    #[serde(rename = "CFI")]
    Cfi,
    #[serde(rename = "SobolCPI")]
    SobolCpi,
    #[serde(rename = "LOCO")]
    Loco,
    #[serde(rename = "LOCO_W")]
    LocoW,
    #[serde(rename = "LOCI")]
    Loci,
    #[serde(rename = "cSAGE")]
    CSage,
    #[serde(rename = "cSAGEvf")]
    CSageVf,
    #[serde(rename = "mSAGE")]
    MSage,
    #[serde(rename = "mSAGEvf")]
    MSageVf,
    #[serde(rename = "scSAGE")]
    ScSage,
    #[serde(rename = "dTSI")]
    DTsi,
    #[serde(rename = "GLM")]
    Glm,
}

/// Population quantity an estimator converges to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexTag {
    /// Total Sobol index (expected loss increase when `j` is dropped).
    Tsi,
    Pfi,
    /// Conditional Shapley aggregation of the value function.
    Sage,
    /// Value function of the singleton `{j}`; also the LOCI index.
    SageVf,
    MSage,
    MSageVf,
    /// Surplus value `v([p]) - v(-j)`; equal to `Tsi`.
    ScSage,
    DTsi,
    Glm,
}

/// How the estimator removes the information carried by a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Perturbation,
    Marginalization,
    Refitting,
}

impl MethodId {
    pub const ALL: [MethodId; 13] = [
        MethodId::Pfi,
        MethodId::Cfi,
        MethodId::SobolCpi,
        MethodId::Loco,
        MethodId::LocoW,
        MethodId::Loci,
        MethodId::CSage,
        MethodId::CSageVf,
        MethodId::MSage,
        MethodId::MSageVf,
        MethodId::ScSage,
        MethodId::DTsi,
        MethodId::Glm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Pfi => "PFI",
            MethodId::Cfi => "CFI",
            MethodId::SobolCpi => "SobolCPI",
            MethodId::Loco => "LOCO",
            MethodId::LocoW => "LOCO_W",
            MethodId::Loci => "LOCI",
            MethodId::CSage => "cSAGE",
            MethodId::CSageVf => "cSAGEvf",
            MethodId::MSage => "mSAGE",
            MethodId::MSageVf => "mSAGEvf",
            MethodId::ScSage => "scSAGE",
            MethodId::DTsi => "dTSI",
            MethodId::Glm => "GLM",
        }
    }

    pub fn target(self) -> IndexTag {
        match self {
            MethodId::Pfi => IndexTag::Pfi,
            MethodId::Cfi | MethodId::SobolCpi | MethodId::Loco | MethodId::LocoW => IndexTag::Tsi,
            MethodId::ScSage => IndexTag::Tsi,
            MethodId::Loci | MethodId::CSageVf => IndexTag::SageVf,
            MethodId::CSage => IndexTag::Sage,
            MethodId::MSage => IndexTag::MSage,
            MethodId::MSageVf => IndexTag::MSageVf,
            MethodId::DTsi => IndexTag::DTsi,
            MethodId::Glm => IndexTag::Glm,
        }
    }

    pub fn style(self) -> Style {
        match self {
            MethodId::Pfi | MethodId::Cfi | MethodId::SobolCpi => Style::Perturbation,
            MethodId::CSage
            | MethodId::CSageVf
            | MethodId::MSage
            | MethodId::MSageVf
            | MethodId::ScSage => Style::Marginalization,
            MethodId::Loco | MethodId::LocoW | MethodId::Loci | MethodId::DTsi | MethodId::Glm => {
                Style::Refitting
            }
        }
    }

    /// Whether the population index is zero exactly on conditionally null
    /// features.
    pub fn satisfies_minimal_axiom(self) -> bool {
        !matches!(self, MethodId::Loci | MethodId::CSageVf | MethodId::CSage)
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = VimError;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| VimError::Config(format!("unknown method '{s}'")))
    }
}

/// What the per-feature contribution vectors index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaKind {
    /// One loss difference per test row.
    PerSample,
    /// Per-row contributions of two independent folds.
    FoldContribution,
    /// One marginal contribution per sampled feature ordering.
    PerOrdering,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: usize,
    pub name: String,
    pub score: f64,
    pub std_error: Option<f64>,
    pub p_value: Option<f64>,
    #[serde(skip)]
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    pub loss: Option<Loss>,
    pub sampler: Option<PerturbationKind>,
    pub model: Option<String>,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: MethodId,
    pub features: Vec<FeatureImportance>,
    pub delta_kind: DeltaKind,
    pub metadata: ReportMetadata,
}

impl ImportanceReport {
    pub fn scores(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.score).collect()
    }

    /// Scores divided by the largest absolute score (all zeros stay zero).
    pub fn normalized(&self) -> Vec<f64> {
        normalize(&self.scores())
    }

    pub fn target(&self) -> IndexTag {
        self.method.target()
    }
}

/// `v / max|v|`, or `v` unchanged when it is identically zero.
pub fn normalize(v: &[f64]) -> Vec<f64> {
    let m = v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    if m > 0.0 {
        v.iter().map(|x| x / m).collect()
    } else {
        v.to_vec()
    }
}

/// Mean and `sd / sqrt(len)`.
pub(crate) fn mean_and_se(deltas: &[f64]) -> (f64, Option<f64>) {
    let n = deltas.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = deltas.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, Some((var / n as f64).sqrt()))
}

pub(crate) fn feature_from_deltas(feature: usize, name: &str, deltas: Vec<f64>) -> FeatureImportance {
    let (score, std_error) = mean_and_se(&deltas);
    FeatureImportance {
        feature,
        name: name.to_string(),
        score,
        std_error,
        p_value: None,
        deltas,
    }
}

/// Per-sample losses of a prediction vector.
pub(crate) fn losses(loss: Loss, y: &[f64], preds: &[f64]) -> Result<Vec<f64>> {
    loss.losses(y, preds)
}

/// `base + mean_k (preds_k - base)`: the average prediction, computed as
/// an offset so that draws that leave the prediction unchanged average to
/// `base` exactly.
pub(crate) fn average_around(base: &[f64], preds: impl IntoIterator<Item = Vec<f64>>) -> Vec<f64> {
    let mut acc = vec![0.0; base.len()];
    let mut k = 0usize;
    for p in preds {
        for ((a, v), b) in acc.iter_mut().zip(p).zip(base) {
            *a += v - b;
        }
        k += 1;
    }
    acc.iter().zip(base).map(|(a, b)| b + a / k.max(1) as f64).collect()
}

/// Per-sample losses of the prediction averaged over `preds`.
///
/// Under quadratic loss the average of `k` draws overstates the loss of the
/// exact conditional expectation by the draw variance over `k`; with two or
/// more draws the unbiased sample variance over `k` is subtracted.
pub(crate) fn averaged_losses(loss: Loss, y: &[f64], base: &[f64], preds: &[Vec<f64>]) -> Result<Vec<f64>> {
    let avg = average_around(base, preds.iter().cloned());
    let mut l = losses(loss, y, &avg)?;
    let k = preds.len();
    if loss == Loss::Quadratic && k >= 2 {
        for (i, li) in l.iter_mut().enumerate() {
            let offset = avg[i] - base[i];
            let ss: f64 = preds.iter().map(|p| (p[i] - base[i] - offset).powi(2)).sum();
            *li -= ss / ((k - 1) * k) as f64;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averaged_losses_remove_draw_variance() {
        let y = [1.0, 0.0];
        let base = [0.0, 5.0];
        let preds = vec![vec![0.0, 5.0], vec![2.0, 5.0], vec![4.0, 5.0]];
        let l = averaged_losses(Loss::Quadratic, &y, &base, &preds).unwrap();
        // mean 2, sample variance 4, three draws
        assert!((l[0] - (1.0 - 4.0 / 3.0)).abs() < 1e-15);
        assert_eq!(l[1], 25.0);
        let single = averaged_losses(Loss::Quadratic, &y, &base, &preds[1..2]).unwrap();
        assert_eq!(single, vec![1.0, 25.0]);
    }

    #[test]
    fn method_ids_round_trip() {
        for m in MethodId::ALL {
            assert_eq!(m.as_str().parse::<MethodId>().unwrap(), m);
            let js = serde_json::to_string(&m).unwrap();
            assert_eq!(js, format!("\"{}\"", m.as_str()));
        }
        assert!("nope".parse::<MethodId>().is_err());
    }

    #[test]
    fn catalog_targets() {
        use MethodId::*;
        for m in [Cfi, SobolCpi, Loco, LocoW, ScSage] {
            assert_eq!(m.target(), IndexTag::Tsi);
        }
        assert_eq!(Loci.target(), IndexTag::SageVf);
        assert_eq!(CSageVf.target(), IndexTag::SageVf);
        assert_eq!(Pfi.style(), Style::Perturbation);
        assert_eq!(ScSage.style(), Style::Marginalization);
        assert_eq!(Loco.style(), Style::Refitting);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize(&[2.0, -4.0, 1.0]), vec![0.5, -1.0, 0.25]);
        assert_eq!(normalize(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn standard_error_formula() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        let var: f64 = (2.25 + 0.25 + 0.25 + 2.25) / 3.0;
        assert!((se.unwrap() - (var / 4.0).sqrt()).abs() < 1e-15);
    }
}
