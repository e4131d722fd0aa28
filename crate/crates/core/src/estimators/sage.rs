//! Shapley aggregation of coalition value functions, the singleton value
//! function and the surplus value `v([p]) - v(-j)`.
//!
//! A coalition `S` is scored through the model averaged over redrawn
//! out-of-coalition features: `v(S) = E l(y, m0) - E l(y, m_S(x^S))`, where
//! `m0` is the test-set mean of the model output. Hence `v(empty) = 0` and
//! `v([p])` uses the model itself, and the Shapley estimates telescope to
//! `v([p])` along every ordering. Under quadratic loss the finite-draw
//! variance of the averaged model is subtracted, so coalition values are
//! unbiased for any `n_draws >= 2`.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{average_around, averaged_losses, feature_from_deltas, losses, DeltaKind, ImportanceReport, MethodId, ReportMetadata};
use crate::data::{Dataset, Loss};
use crate::error::{Result, VimError};
use crate::predictors::FittedPredictor;
use crate::rng;
use crate::samplers::{fit_sampler, with_column, ConditionalSampler, PerturbationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SageMode {
    Conditional,
    Marginal,
}

const STREAM_ORDERINGS: u64 = 0x5A6E;
const MAX_FEATURES: usize = 63;

struct ValueEngine<'a> {
    m: &'a FittedPredictor,
    test: &'a Dataset,
    loss: Loss,
    sampler: ConditionalSampler,
    n_draws: usize,
    seed: u64,
    preds: Vec<f64>,
    baseline: Vec<f64>,
    full: Vec<f64>,
}

impl<'a> ValueEngine<'a> {
    fn new(
        m: &'a FittedPredictor,
        test: &'a Dataset,
        loss: Loss,
        mode: SageMode,
        s: Option<&ConditionalSampler>,
        n_draws: usize,
        seed: u64,
    ) -> Result<Self> {
        let p = test.p();
        if m.subset().len() != p || m.subset().iter().enumerate().any(|(k, &j)| k != j) {
            return Err(VimError::Dimension {
                context: "model must be trained on all features",
                expected: p,
                found: m.subset().len(),
            });
        }
        if p > MAX_FEATURES {
            return Err(VimError::Size(format!("at most {MAX_FEATURES} features, got {p}")));
        }
        if n_draws == 0 {
            return Err(VimError::invalid("n_draws must be >= 1"));
        }
        let sampler = match mode {
            SageMode::Marginal => fit_sampler(PerturbationKind::MarginalPermutation, test.x())?,
            SageMode::Conditional => {
                let s = s.ok_or_else(|| {
                    VimError::SamplerKind("conditional mode needs a conditional sampler".into())
                })?;
                if !s.is_conditional() {
                    return Err(VimError::SamplerKind(format!(
                        "conditional mode needs a conditional sampler, got {}",
                        s.kind()
                    )));
                }
                s.clone()
            }
        };
        let preds = m.predict_full(test.x())?;
        let m0 = preds.iter().sum::<f64>() / preds.len() as f64;
        let baseline = losses(loss, test.y(), &vec![m0; test.n()])?;
        let full = losses(loss, test.y(), &preds)?;
        Ok(Self {
            m,
            test,
            loss,
            sampler,
            n_draws,
            seed,
            preds,
            baseline,
            full,
        })
    }

    fn p(&self) -> usize {
        self.test.p()
    }

    fn full_mask(&self) -> u64 {
        (1u64 << self.p()) - 1
    }

    /// Per-sample losses of the coalition-restricted model.
    fn coalition_losses(&self, mask: u64) -> Result<Vec<f64>> {
        if mask == 0 {
            return Ok(self.baseline.clone());
        }
        if mask == self.full_mask() {
            return Ok(self.full.clone());
        }
        if self.exhaustive() {
            return self.exhaustive_losses(mask);
        }
        let known: Vec<usize> = (0..self.p()).filter(|j| mask >> j & 1 == 1).collect();
        let draws = self.sampler.draw_complement(
            self.test.x(),
            &known,
            self.n_draws,
            rng::derive_seed(self.seed, mask),
        )?;
        let preds = draws.iter().map(|x| self.m.predict_full(x)).collect::<Result<Vec<_>>>()?;
        averaged_losses(self.loss, self.test.y(), &self.preds, &preds)
    }

    /// Marginal mode with at least one draw per test row averages over every
    /// test row instead of sampling.
    fn exhaustive(&self) -> bool {
        self.sampler.kind() == PerturbationKind::MarginalPermutation && self.n_draws >= self.test.n()
    }

    /// Losses of the model averaged over the empirical marginal of the
    /// out-of-coalition features: row `r` supplies them to every sample.
    fn exhaustive_losses(&self, mask: u64) -> Result<Vec<f64>> {
        let x = self.test.x();
        let unknown: Vec<usize> = (0..self.p()).filter(|j| mask >> j & 1 == 0).collect();
        let preds = (0..x.nrows())
            .map(|r| {
                let mut xr = x.clone();
                for &j in &unknown {
                    xr.column_mut(j).fill(x[(r, j)]);
                }
                self.m.predict_full(&xr)
            })
            .collect::<Result<Vec<_>>>()?;
        losses(self.loss, self.test.y(), &average_around(&self.preds, preds))
    }

    fn value(&self, mask: u64) -> Result<f64> {
        let l = self.coalition_losses(mask)?;
        let n = l.len() as f64;
        Ok(self.baseline.iter().zip(&l).map(|(b, a)| b - a).sum::<f64>() / n)
    }

    fn metadata(&self) -> ReportMetadata {
        ReportMetadata {
            seed: self.seed,
            loss: Some(self.loss),
            sampler: Some(self.sampler.kind()),
            model: Some(self.m.kind_name().to_string()),
            n_train: 0,
            n_test: self.test.n(),
        }
    }
}

fn check_residual_block(mode: SageMode, s: Option<&ConditionalSampler>, p: usize) -> Result<()> {
    if mode == SageMode::Conditional
        && p > 2
        && s.is_some_and(|s| s.kind() == PerturbationKind::ResidualPermutation)
    {
        return Err(VimError::SamplerKind(
            "residual_permutation cannot redraw feature blocks; use gaussian_conditional when p > 2"
                .into(),
        ));
    }
    Ok(())
}

fn mask_of(features: &[usize]) -> u64 {
    features.iter().fold(0u64, |m, &j| m | 1 << j)
}

/// Empirical value of the coalition `features` (same draws as the SAGE
/// estimators use for that coalition).
#[allow(clippy::too_many_arguments)]
pub fn estimate_value_function(
    m: &FittedPredictor,
    test: &Dataset,
    loss: Loss,
    mode: SageMode,
    s: Option<&ConditionalSampler>,
    features: &[usize],
    n_draws: usize,
    seed: u64,
) -> Result<f64> {
    let engine = ValueEngine::new(m, test, loss, mode, s, n_draws, seed)?;
    if features.iter().any(|&j| j >= test.p()) {
        return Err(VimError::invalid("coalition index out of range"));
    }
    engine.value(mask_of(features))
}

/// Shapley values of the coalition value function estimated from
/// `n_permutations` random feature orderings.
#[allow(clippy::too_many_arguments)]
pub fn estimate_sage(
    m: &FittedPredictor,
    test: &Dataset,
    loss: Loss,
    mode: SageMode,
    s: Option<&ConditionalSampler>,
    n_permutations: usize,
    n_draws: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    let method = match mode {
        SageMode::Conditional => MethodId::CSage,
        SageMode::Marginal => MethodId::MSage,
    };
    let run = || -> Result<ImportanceReport> {
        if n_permutations == 0 {
            return Err(VimError::invalid("n_permutations must be >= 1"));
        }
        check_residual_block(mode, s, test.p())?;
        let engine = ValueEngine::new(m, test, loss, mode, s, n_draws, seed)?;
        let p = test.p();
        let orderings: Vec<Vec<usize>> = (0..n_permutations as u64)
            .map(|t| rng::permutation(p, rng::derive_path(seed, &[STREAM_ORDERINGS, t])))
            .collect();
        let mut needed = BTreeSet::new();
        for o in &orderings {
            let mut mask = 0u64;
            needed.insert(mask);
            for &j in o {
                mask |= 1 << j;
                needed.insert(mask);
            }
        }
        let needed: Vec<u64> = needed.into_iter().collect();
        let values: HashMap<u64, f64> = needed
            .par_iter()
            .map(|&mask| Ok((mask, engine.value(mask)?)))
            .collect::<Result<_>>()?;
        let mut contributions = vec![Vec::with_capacity(n_permutations); p];
        for o in &orderings {
            let mut mask = 0u64;
            for &j in o {
                let next = mask | 1 << j;
                contributions[j].push(values[&next] - values[&mask]);
                mask = next;
            }
        }
        Ok(ImportanceReport {
            method,
            features: contributions
                .into_iter()
                .enumerate()
                .map(|(j, d)| feature_from_deltas(j, &test.names()[j], d))
                .collect(),
            delta_kind: DeltaKind::PerOrdering,
            metadata: engine.metadata(),
        })
    };
    run().map_err(|e| e.in_method(method))
}

/// Value of each singleton coalition `{j}`. In marginal mode, `n_draws` at
/// least the test size averages over every test row rather than sampling.
pub fn estimate_sage_vf(
    m: &FittedPredictor,
    test: &Dataset,
    loss: Loss,
    mode: SageMode,
    s: Option<&ConditionalSampler>,
    n_draws: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    let method = match mode {
        SageMode::Conditional => MethodId::CSageVf,
        SageMode::Marginal => MethodId::MSageVf,
    };
    let run = || -> Result<ImportanceReport> {
        check_residual_block(mode, s, test.p())?;
        let engine = ValueEngine::new(m, test, loss, mode, s, n_draws, seed)?;
        let deltas = (0..test.p())
            .into_par_iter()
            .map(|j| {
                let l = engine.coalition_losses(1 << j)?;
                Ok(engine.baseline.iter().zip(&l).map(|(b, a)| b - a).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(ImportanceReport {
            method,
            features: deltas
                .into_iter()
                .enumerate()
                .map(|(j, d)| feature_from_deltas(j, &test.names()[j], d))
                .collect(),
            delta_kind: DeltaKind::PerSample,
            metadata: engine.metadata(),
        })
    };
    run().map_err(|e| e.in_method(method))
}

/// Surplus value `v([p]) - v(-j)`: loss of the model averaged over
/// `n_draws` conditional redraws of feature `j`, minus the model's loss.
pub fn estimate_sc_sage(
    m: &FittedPredictor,
    test: &Dataset,
    loss: Loss,
    s: &ConditionalSampler,
    n_draws: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    let run = || -> Result<ImportanceReport> {
        let engine = ValueEngine::new(m, test, loss, SageMode::Conditional, Some(s), n_draws, seed)?;
        let deltas = (0..test.p())
            .into_par_iter()
            .map(|j| {
                let draws = s.draw(test.x(), j, n_draws, rng::derive_seed(seed, j as u64))?;
                let preds = draws
                    .iter()
                    .map(|col| m.predict_full(&with_column(test.x(), j, col)))
                    .collect::<Result<Vec<_>>>()?;
                let l = averaged_losses(loss, test.y(), &engine.preds, &preds)?;
                Ok(l.iter().zip(&engine.full).map(|(a, b)| a - b).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(ImportanceReport {
            method: MethodId::ScSage,
            features: deltas
                .into_iter()
                .enumerate()
                .map(|(j, d)| feature_from_deltas(j, &test.names()[j], d))
                .collect(),
            delta_kind: DeltaKind::PerSample,
            metadata: engine.metadata(),
        })
    };
    run().map_err(|e| e.in_method(MethodId::ScSage))
}
