//! Experiment configuration (TOML). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Loss;
use crate::error::{Result, VimError};
use crate::estimators::MethodId;
use crate::inference::TestKind;
use crate::predictors::{BoostParams, PredictorSpec};
use crate::samplers::PerturbationKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Figure1,
    PolySim,
    CsvAnalysis,
    Convergence,
    OracleCheck,
}

/// Simulated design used by `convergence` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Figure1,
    PolySim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub id: MethodId,
    /// Column name in the output; defaults to the method id.
    pub label: Option<String>,
    /// Marginal permutations for PFI.
    pub n_perm: Option<usize>,
    /// Conditional draws for CFI and the SAGE family.
    pub n_draws: Option<usize>,
    /// Conditional draws averaged by Sobol-CPI.
    pub n_cal: Option<usize>,
    /// Orderings sampled by cSAGE / mSAGE.
    pub n_permutations: Option<usize>,
    /// Overrides the experiment sampler for this method.
    pub sampler: Option<PerturbationKind>,
}

impl MethodConfig {
    pub fn new(id: MethodId) -> Self {
        Self {
            id,
            label: None,
            n_perm: None,
            n_draws: None,
            n_cal: None,
            n_permutations: None,
            sampler: None,
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.id.to_string())
    }

    pub fn n_perm(&self) -> usize {
        self.n_perm.unwrap_or(10)
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws.unwrap_or(match self.id {
            MethodId::Cfi => 1,
            _ => 20,
        })
    }

    pub fn n_cal(&self) -> usize {
        self.n_cal.unwrap_or(100)
    }

    pub fn n_permutations(&self) -> usize {
        self.n_permutations.unwrap_or(64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    pub test: TestKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub bonferroni: bool,
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    pub n: Option<usize>,
    /// Covariate count of `poly_sim` (at least 9; default 10).
    pub p: Option<usize>,
    pub rho: Option<f64>,
    /// Coefficients of the `figure1` design.
    pub beta: Option<Vec<f64>>,
    pub noise_sd: Option<f64>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_loss")]
    pub loss: Loss,
    pub sampler: Option<PerturbationKind>,
    pub predictor: Option<PredictorSpec>,
    /// Score with the true regression function instead of a fitted model
    /// (simulated designs only; refitting methods still fit `predictor`).
    #[serde(default)]
    pub population_model: bool,
    #[serde(default)]
    pub methods: Vec<MethodConfig>,
    pub inference: Option<InferenceConfig>,
    pub output: Option<PathBuf>,
    pub n_grid: Option<Vec<usize>>,
    pub design: Option<Design>,
    pub csv: Option<CsvSource>,
    /// Random joints per oracle identity.
    pub n_joints: Option<usize>,
    /// Extra joint file evaluated by `oracle_check`.
    pub joint: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn default_train_fraction() -> f64 {
    0.7
}

fn default_loss() -> Loss {
    Loss::Quadratic
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| VimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| VimError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(csv) = cfg.csv.as_mut() {
            if csv.path.is_relative() {
                if let Some(dir) = path.parent() {
                    csv.path = dir.join(&csv.path);
                }
            }
        }
        if let Some(j) = cfg.joint.as_mut() {
            if j.is_relative() {
                if let Some(dir) = path.parent() {
                    *j = dir.join(&*j);
                }
            }
        }
        Ok(cfg)
    }

    pub fn design(&self) -> Design {
        match self.kind {
            ExperimentKind::PolySim => Design::PolySim,
            ExperimentKind::Convergence => self.design.unwrap_or(Design::Figure1),
            _ => Design::Figure1,
        }
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(match self.design() {
            Design::Figure1 => 10_000,
            Design::PolySim => 5_000,
        })
    }

    pub fn p(&self) -> usize {
        match self.design() {
            Design::Figure1 => self.beta().len(),
            Design::PolySim => self.p.unwrap_or(10),
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or(0.6)
    }

    pub fn beta(&self) -> Vec<f64> {
        self.beta.clone().unwrap_or_else(|| vec![1.0, 0.0])
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd.unwrap_or(match self.design() {
            Design::Figure1 => 0.0,
            Design::PolySim => 0.1,
        })
    }

    pub fn sampler(&self) -> PerturbationKind {
        self.sampler.unwrap_or(match self.kind {
            ExperimentKind::CsvAnalysis => PerturbationKind::ResidualPermutation,
            _ => PerturbationKind::GaussianConditional,
        })
    }

    pub fn predictor(&self) -> PredictorSpec {
        self.predictor
            .clone()
            .unwrap_or_else(|| PredictorSpec::BoostedTrees(BoostParams::default()))
    }

    /// Checks every field before any work is done.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(VimError::Config(m));
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if let Some(r) = self.rho {
            if !(r.abs() < 1.0) {
                return bad(format!("rho must satisfy |rho| < 1, got {r}"));
            }
        }
        if let Some(s) = self.noise_sd {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("noise_sd must be >= 0, got {s}"));
            }
        }
        if let Some(b) = &self.beta {
            if b.is_empty() || b.iter().any(|v| !v.is_finite()) {
                return bad("beta must be a nonempty list of finite numbers".into());
            }
        }
        if let Some(p) = self.p {
            if p < 9 {
                return bad(format!("poly_sim needs p >= 9, got {p}"));
            }
        }
        if let Some(n) = self.n {
            if n < 4 {
                return bad(format!("n must be >= 4, got {n}"));
            }
        }
        if let Some(spec) = &self.predictor {
            spec.validate().map_err(|e| VimError::Config(e.to_string()))?;
        }
        if let Some(inf) = &self.inference {
            if !(inf.alpha > 0.0 && inf.alpha <= 1.0) {
                return bad(format!("alpha must lie in (0, 1], got {}", inf.alpha));
            }
        }
        for m in &self.methods {
            for (name, v) in [
                ("n_perm", m.n_perm),
                ("n_draws", m.n_draws),
                ("n_cal", m.n_cal),
                ("n_permutations", m.n_permutations),
            ] {
                if v == Some(0) {
                    return bad(format!("{}: {name} must be >= 1", m.label()));
                }
            }
        }
        match self.kind {
            ExperimentKind::OracleCheck => {}
            _ if self.methods.is_empty() => return bad("at least one [[methods]] entry is required".into()),
            ExperimentKind::CsvAnalysis if self.csv.is_none() => {
                return bad("csv_analysis needs a [csv] section with path and target".into())
            }
            ExperimentKind::Convergence => match &self.n_grid {
                Some(g) if !g.is_empty() && g.iter().all(|&n| n >= 4) => {}
                _ => return bad("convergence needs a nonempty n_grid with entries >= 4".into()),
            },
            _ => {}
        }
        if self.population_model && self.kind == ExperimentKind::CsvAnalysis {
            return bad("population_model is only available for simulated designs".into());
        }
        Ok(())
    }
}
