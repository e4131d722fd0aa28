use rayon::prelude::*;

use super::{average_around, feature_from_deltas, losses, DeltaKind, ImportanceReport, MethodId, ReportMetadata};
use crate::data::{Dataset, Loss};
use crate::error::{Result, VimError};
use crate::predictors::FittedPredictor;
use crate::rng;
use crate::samplers::{fit_sampler, with_column, ConditionalSampler, PerturbationKind};

fn check_width(m: &FittedPredictor, test: &Dataset) -> Result<()> {
    if m.subset().len() != test.p() || m.subset().iter().enumerate().any(|(k, &j)| k != j) {
        return Err(VimError::Dimension {
            context: "model must be trained on all features",
            expected: test.p(),
            found: m.subset().len(),
        });
    }
    Ok(())
}

/// Predictions on `test.x()` with column `j` replaced by each draw.
fn perturbed_predictions(
    m: &FittedPredictor,
    test: &Dataset,
    j: usize,
    draws: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    draws
        .iter()
        .map(|col| m.predict_full(&with_column(test.x(), j, col)))
        .collect()
}

/// Average over the draws of the per-sample loss increase.
fn mean_loss_deltas(
    m: &FittedPredictor,
    test: &Dataset,
    loss: Loss,
    base: &[f64],
    s: &ConditionalSampler,
    n_draws: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    (0..test.p())
        .into_par_iter()
        .map(|j| {
            let draws = s.draw(test.x(), j, n_draws, rng::derive_seed(seed, j as u64))?;
            let preds = perturbed_predictions(m, test, j, &draws)?;
            let mut acc = vec![0.0; test.n()];
            for p in &preds {
                for ((a, l), b) in acc.iter_mut().zip(losses(loss, test.y(), p)?).zip(base) {
                    *a += l - b;
                }
            }
            let k = n_draws as f64;
            Ok(acc.iter().map(|a| a / k).collect())
        })
        .collect()
}

fn report(
    method: MethodId,
    test: &Dataset,
    deltas: Vec<Vec<f64>>,
    meta: ReportMetadata,
) -> ImportanceReport {
    ImportanceReport {
        method,
        features: deltas
            .into_iter()
            .enumerate()
            .map(|(j, d)| feature_from_deltas(j, &test.names()[j], d))
            .collect(),
        delta_kind: DeltaKind::PerSample,
        metadata: meta,
    }
}

fn metadata(m: &FittedPredictor, test: &Dataset, loss: Loss, kind: PerturbationKind, seed: u64) -> ReportMetadata {
    ReportMetadata {
        seed,
        loss: Some(loss),
        sampler: Some(kind),
        model: Some(m.kind_name().to_string()),
        n_train: 0,
        n_test: test.n(),
    }
}

/// Permutation feature importance with `n_perm` marginal permutations of
/// each column.
pub fn estimate_pfi(
    m: &FittedPredictor,
    test: &Dataset,
    loss: Loss,
    n_perm: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    let run = || -> Result<ImportanceReport> {
        check_width(m, test)?;
        if n_perm == 0 {
            return Err(VimError::invalid("n_perm must be >= 1"));
        }
        let base = losses(loss, test.y(), &m.predict_full(test.x())?)?;
        let s = fit_sampler(PerturbationKind::MarginalPermutation, test.x())?;
        let deltas = mean_loss_deltas(m, test, loss, &base, &s, n_perm, seed)?;
        Ok(report(
            MethodId::Pfi,
            test,
            deltas,
            metadata(m, test, loss, PerturbationKind::MarginalPermutation, seed),
        ))
    };
    run().map_err(|e| e.in_method(MethodId::Pfi))
}

fn require_conditional(s: &ConditionalSampler) -> Result<()> {
    if !s.is_conditional() {
        return Err(VimError::SamplerKind(format!(
            "a conditional sampler is required, got {}",
            s.kind()
        )));
    }
    Ok(())
}

/// Conditional feature importance averaged over `n_draws` conditional
/// replacements.
pub fn estimate_cfi(
    m: &FittedPredictor,
    test: &Dataset,
    loss: Loss,
    s: &ConditionalSampler,
    n_draws: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    let run = || -> Result<ImportanceReport> {
        check_width(m, test)?;
        require_conditional(s)?;
        let base = losses(loss, test.y(), &m.predict_full(test.x())?)?;
        let deltas = mean_loss_deltas(m, test, loss, &base, s, n_draws, seed)?;
        Ok(report(MethodId::Cfi, test, deltas, metadata(m, test, loss, s.kind(), seed)))
    };
    run().map_err(|e| e.in_method(MethodId::Cfi))
}

/// Sobol-CPI: the loss of the prediction averaged over `n_cal` conditional
/// draws, minus the original loss, times `n_cal / (n_cal + 1)`.
pub fn estimate_sobol_cpi(
    m: &FittedPredictor,
    test: &Dataset,
    loss: Loss,
    s: &ConditionalSampler,
    n_cal: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    let run = || -> Result<ImportanceReport> {
        check_width(m, test)?;
        require_conditional(s)?;
        if n_cal == 0 {
            return Err(VimError::invalid("n_cal must be >= 1"));
        }
        let base_pred = m.predict_full(test.x())?;
        let base = losses(loss, test.y(), &base_pred)?;
        let factor = n_cal as f64 / (n_cal as f64 + 1.0);
        let deltas = (0..test.p())
            .into_par_iter()
            .map(|j| {
                let draws = s.draw(test.x(), j, n_cal, rng::derive_seed(seed, j as u64))?;
                let preds = perturbed_predictions(m, test, j, &draws)?;
                let avg = average_around(&base_pred, preds);
                let l = losses(loss, test.y(), &avg)?;
                Ok(l.iter().zip(&base).map(|(a, b)| factor * (a - b)).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(report(MethodId::SobolCpi, test, deltas, metadata(m, test, loss, s.kind(), seed)))
    };
    run().map_err(|e| e.in_method(MethodId::SobolCpi))
}
