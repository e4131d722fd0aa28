use rayon::prelude::*;

use super::{
    feature_from_deltas, mean_and_se, DeltaKind, FeatureImportance, ImportanceReport,
    MethodId, ReportMetadata,
};
use crate::data::{split_indices, standardize, Dataset, Loss};
use crate::error::{Result, VimError};
use crate::linalg;
use crate::predictors::{fit, fit_all, glm_index, per_sample_loss, FittedPredictor, PredictorSpec};
use crate::rng;

/// Fit on every column but `j`; the mean predictor when nothing is left.
fn fit_without(spec: &PredictorSpec, train: &Dataset, j: usize) -> Result<FittedPredictor> {
    let rest = linalg::complement(train.p(), &[j]);
    if rest.is_empty() {
        fit(&PredictorSpec::Mean, train, &[])
    } else {
        fit(spec, train, &rest)
    }
}

fn check_compatible(train: &Dataset, test: &Dataset) -> Result<()> {
    if train.p() != test.p() {
        return Err(VimError::Dimension {
            context: "train/test feature count",
            expected: train.p(),
            found: test.p(),
        });
    }
    Ok(())
}

fn metadata(spec: &PredictorSpec, loss: Loss, seed: u64, n_train: usize, n_test: usize) -> ReportMetadata {
    ReportMetadata {
        seed,
        loss: Some(loss),
        sampler: None,
        model: Some(spec.name().to_string()),
        n_train,
        n_test,
    }
}

fn per_sample_report(
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

/// Leave-one-covariate-out: refit without each feature and compare test
/// risks.
pub fn estimate_loco(
    spec: &PredictorSpec,
    train: &Dataset,
    test: &Dataset,
    loss: Loss,
    seed: u64,
) -> Result<ImportanceReport> {
    fit_all(spec, train)
        .and_then(|full| estimate_loco_prefit(&full, spec, train, test, loss, seed))
        .map_err(|e| e.in_method(MethodId::Loco))
}

/// LOCO with an already trained full model.
pub fn estimate_loco_prefit(
    full: &FittedPredictor,
    spec: &PredictorSpec,
    train: &Dataset,
    test: &Dataset,
    loss: Loss,
    seed: u64,
) -> Result<ImportanceReport> {
    let run = || -> Result<ImportanceReport> {
        check_compatible(train, test)?;
        let base = per_sample_loss(full, test, loss)?;
        let deltas = (0..train.p())
            .into_par_iter()
            .map(|j| {
                let reduced = fit_without(spec, train, j)?;
                let l = per_sample_loss(&reduced, test, loss)?;
                Ok(l.iter().zip(&base).map(|(a, b)| a - b).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(per_sample_report(
            MethodId::Loco,
            test,
            deltas,
            metadata(spec, loss, seed, train.n(), test.n()),
        ))
    };
    run().map_err(|e| e.in_method(MethodId::Loco))
}

const LOCO_W_MIN_TEST_ROWS: usize = 20;
const LOCO_W_TRAIN_FRACTION: f64 = 0.7;

/// LOCO with an extra split: the full model is trained and evaluated on one
/// half of `d`, each reduced model on the other half.
///
/// The stored contributions are the reduced-model losses on the second half
/// minus the full-model risk on the first half, so they average to the
/// score. The standard error combines the variances of both halves.
pub fn estimate_loco_w(
    spec: &PredictorSpec,
    d: &Dataset,
    loss: Loss,
    seed: u64,
) -> Result<ImportanceReport> {
    let run = || -> Result<ImportanceReport> {
        let halves = split_indices(d.n(), &[0.5, 0.5], rng::derive_seed(seed, rng::STREAM_SPLIT))
            .map_err(|_| VimError::InsufficientRows {
                needed: 2,
                found: d.n(),
            })?;
        let mut folds = Vec::with_capacity(2);
        for (k, rows) in halves.iter().enumerate() {
            let fold = d.subset_rows(rows);
            let n_test = fold.n() - (fold.n() as f64 * LOCO_W_TRAIN_FRACTION).round() as usize;
            if n_test < LOCO_W_MIN_TEST_ROWS || fold.n() < 2 * LOCO_W_MIN_TEST_ROWS {
                let per_fold = (LOCO_W_MIN_TEST_ROWS as f64 / (1.0 - LOCO_W_TRAIN_FRACTION)).ceil() as usize;
                return Err(VimError::InsufficientRows {
                    needed: 2 * per_fold,
                    found: d.n(),
                });
            }
            let parts = split_indices(
                fold.n(),
                &[LOCO_W_TRAIN_FRACTION, 1.0 - LOCO_W_TRAIN_FRACTION],
                rng::derive_path(seed, &[rng::STREAM_SPLIT, k as u64]),
            )?;
            folds.push((fold.subset_rows(&parts[0]), fold.subset_rows(&parts[1])));
        }
        let (a_train, a_test) = &folds[0];
        let (b_train, b_test) = &folds[1];
        let full = fit_all(spec, a_train)?;
        let full_losses = per_sample_loss(&full, a_test, loss)?;
        let (full_risk, full_se) = mean_and_se(&full_losses);
        let full_var_term = full_se.map_or(0.0, |s| s * s);
        let features = (0..d.p())
            .into_par_iter()
            .map(|j| {
                let reduced = fit_without(spec, b_train, j)?;
                let l = per_sample_loss(&reduced, b_test, loss)?;
                let (_, se) = mean_and_se(&l);
                let deltas: Vec<f64> = l.iter().map(|v| v - full_risk).collect();
                let mut f = feature_from_deltas(j, &d.names()[j], deltas);
                f.std_error = se.map(|s| (s * s + full_var_term).sqrt());
                Ok(f)
            })
            .collect::<Result<Vec<FeatureImportance>>>()?;
        Ok(ImportanceReport {
            method: MethodId::LocoW,
            features,
            delta_kind: DeltaKind::FoldContribution,
            metadata: metadata(spec, loss, seed, a_train.n() + b_train.n(), b_test.n()),
        })
    };
    run().map_err(|e| e.in_method(MethodId::LocoW))
}

/// Leave-one-covariate-in: risk of the mean predictor minus risk of a model
/// trained on feature `j` alone.
pub fn estimate_loci(
    spec: &PredictorSpec,
    train: &Dataset,
    test: &Dataset,
    loss: Loss,
    seed: u64,
) -> Result<ImportanceReport> {
    let run = || -> Result<ImportanceReport> {
        check_compatible(train, test)?;
        let baseline = fit(&PredictorSpec::Mean, train, &[])?;
        let base = per_sample_loss(&baseline, test, loss)?;
        let deltas = (0..train.p())
            .into_par_iter()
            .map(|j| {
                let single = fit(spec, train, &[j])?;
                let l = per_sample_loss(&single, test, loss)?;
                Ok(base.iter().zip(&l).map(|(b, a)| b - a).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(per_sample_report(
            MethodId::Loci,
            test,
            deltas,
            metadata(spec, loss, seed, train.n(), test.n()),
        ))
    };
    run().map_err(|e| e.in_method(MethodId::Loci))
}

/// Decorrelated total Sobol index (quadratic loss): mean squared gap between
/// the full and the reduced model, divided by the residual second moment of
/// feature `j` regressed linearly on the others.
pub fn estimate_dtsi(
    spec: &PredictorSpec,
    train: &Dataset,
    test: &Dataset,
    seed: u64,
) -> Result<ImportanceReport> {
    fit_all(spec, train)
        .and_then(|full| estimate_dtsi_prefit(&full, spec, train, test, seed))
        .map_err(|e| e.in_method(MethodId::DTsi))
}

pub fn estimate_dtsi_prefit(
    full: &FittedPredictor,
    spec: &PredictorSpec,
    train: &Dataset,
    test: &Dataset,
    seed: u64,
) -> Result<ImportanceReport> {
    let run = || -> Result<ImportanceReport> {
        check_compatible(train, test)?;
        let m = full.predict_full(test.x())?;
        let p = train.p();
        let deltas = (0..p)
            .into_par_iter()
            .map(|j| {
                let reduced = fit_without(spec, train, j)?;
                let mr = reduced.predict_full(test.x())?;
                let rest = linalg::complement(p, &[j]);
                let (a, b) = linalg::least_squares(
                    &linalg::select_columns(train.x(), &rest),
                    &train.column(j),
                    0.0,
                )?;
                let xt = linalg::select_columns(test.x(), &rest);
                let den = (0..test.n())
                    .map(|i| {
                        let nu = a + (0..rest.len()).map(|k| b[k] * xt[(i, k)]).sum::<f64>();
                        let r = test.x()[(i, j)] - nu;
                        r * r
                    })
                    .sum::<f64>()
                    / test.n() as f64;
                if !(den > 1e-8) {
                    return Err(VimError::DegenerateDenominator { feature: j });
                }
                Ok(m.iter().zip(&mr).map(|(u, v)| (u - v) * (u - v) / den).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(per_sample_report(
            MethodId::DTsi,
            test,
            deltas,
            metadata(spec, Loss::Quadratic, seed, train.n(), test.n()),
        ))
    };
    run().map_err(|e| e.in_method(MethodId::DTsi))
}

/// Squared OLS coefficients on standardized training covariates.
pub fn estimate_glm(train: &Dataset) -> Result<ImportanceReport> {
    let run = || -> Result<ImportanceReport> {
        let z = standardize(train)?;
        let m = fit_all(&PredictorSpec::Ols, &z)?;
        let lin = m.linear_fit().ok_or_else(|| VimError::invalid("ols fit is not linear"))?;
        let scores = glm_index(lin)?;
        Ok(ImportanceReport {
            method: MethodId::Glm,
            features: scores
                .into_iter()
                .enumerate()
                .map(|(j, score)| FeatureImportance {
                    feature: j,
                    name: train.names()[j].clone(),
                    score,
                    std_error: None,
                    p_value: None,
                    deltas: Vec::new(),
                })
                .collect(),
            delta_kind: DeltaKind::None,
            metadata: metadata(&PredictorSpec::Ols, Loss::Quadratic, 0, train.n(), 0),
        })
    };
    run().map_err(|e| e.in_method(MethodId::Glm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_linear_pair, split};

    #[test]
    fn loco_single_feature_falls_back_to_mean() {
        let d = gen_linear_pair(100, 0.0, 1.0, 1).unwrap();
        let one = d.subset_rows(&(0..100).collect::<Vec<_>>());
        let x = one.x().columns(0, 1).into_owned();
        let d1 = Dataset::from_unnamed(x, one.y().to_vec()).unwrap();
        let parts = split(&d1, &[0.7, 0.3], 2).unwrap();
        let r = estimate_loco(&PredictorSpec::Ols, &parts[0], &parts[1], Loss::Quadratic, 0).unwrap();
        assert!(r.features[0].score > 0.5);
    }

    #[test]
    fn loco_w_needs_rows() {
        let d = gen_linear_pair(20, 0.0, 1.0, 1).unwrap();
        let e = estimate_loco_w(&PredictorSpec::Ols, &d, Loss::Quadratic, 0).unwrap_err();
        assert!(e.to_string().contains("LOCO_W"), "{e}");
        assert!(matches!(e, VimError::Method { ref source, .. } if matches!(**source, VimError::InsufficientRows { .. })));
    }

    #[test]
    fn loco_w_scores_are_contribution_means() {
        let d = gen_linear_pair(400, 0.5, 1.0, 3).unwrap();
        let r = estimate_loco_w(&PredictorSpec::Ols, &d, Loss::Quadratic, 7).unwrap();
        for f in &r.features {
            let m = f.deltas.iter().sum::<f64>() / f.deltas.len() as f64;
            assert!((m - f.score).abs() < 1e-9);
        }
        assert_eq!(r.delta_kind, DeltaKind::FoldContribution);
    }

    #[test]
    fn glm_report_has_no_deltas() {
        let d = gen_linear_pair(200, 0.2, 1.0, 4).unwrap();
        let r = estimate_glm(&d).unwrap();
        assert_eq!(r.delta_kind, DeltaKind::None);
        assert!(r.features[0].score > 0.9);
    }
}
