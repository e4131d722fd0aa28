use nalgebra::DMatrix;
use vimlab::data::{self, Dataset, Loss};
use vimlab::predictors::{self, fit_all, per_sample_loss, r_squared, ForestParams, PredictorSpec};

#[test]
fn forest_fits_polynomial_design() {
    let d = data::gen_poly_dataset(5000, 0.6, 0.1, 17).unwrap();
    let parts = data::split(&d, &[0.7, 0.3], 3).unwrap();
    let spec = PredictorSpec::RandomForest(ForestParams {
        seed: 5,
        ..Default::default()
    });
    let m = fit_all(&spec, &parts[0]).unwrap();
    let r2 = r_squared(&m.predict_full(parts[1].x()).unwrap(), parts[1].y());
    assert!(r2 >= 0.85, "held-out R^2 = {r2}");
}

#[test]
fn glm_index_of_null_coordinate_vanishes() {
    let x = data::gen_toeplitz_gaussian(20000, 3, 0.0, 9).unwrap();
    let noise = data::gen_toeplitz_gaussian(20000, 1, 0.0, 10).unwrap();
    let y: Vec<f64> = (0..20000).map(|i| x[(i, 0)] + 2.0 * x[(i, 1)] + noise[(i, 0)]).collect();
    let d = Dataset::from_unnamed(x, y).unwrap();
    let r = vimlab::estimators::estimate_glm(&d).unwrap();
    let s = r.scores();
    assert!(s[2].abs() < 0.01, "{s:?}");
    assert!((s[0] - 1.0).abs() < 0.05 && (s[1] - 4.0).abs() < 0.1, "{s:?}");
}

#[test]
fn glm_on_noise_free_independent_design() {
    let x = data::gen_toeplitz_gaussian(5000, 2, 0.0, 21).unwrap();
    let y = vec![0.0; 5000];
    let x = data::standardize(&Dataset::from_unnamed(x, y).unwrap()).unwrap().x().clone();
    let y: Vec<f64> = (0..5000).map(|i| x[(i, 0)] + 2.0 * x[(i, 1)]).collect();
    let d = Dataset::from_unnamed(x, y).unwrap();
    let s = vimlab::estimators::estimate_glm(&d).unwrap().scores();
    assert!((s[0] - 1.0).abs() < 0.05 && (s[1] - 4.0).abs() < 0.05, "{s:?}");
}

#[test]
fn per_sample_loss_examples() {
    let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
    let y = vec![1.0, 2.0, 4.0, 9.0];
    let d = Dataset::from_unnamed(x.clone(), y.clone()).unwrap();
    let mean = fit_all(&PredictorSpec::Mean, &d).unwrap();
    let l = per_sample_loss(&mean, &d, Loss::Quadratic).unwrap();
    let avg = y.iter().sum::<f64>() / 4.0;
    let biased_var = y.iter().map(|v| (v - avg) * (v - avg)).sum::<f64>() / 4.0;
    assert!((l.iter().sum::<f64>() / 4.0 - biased_var).abs() < 1e-12);

    let exact = Dataset::from_unnamed(x.clone(), vec![1.0, 4.0, 7.0, 10.0]).unwrap();
    let ols = fit_all(&PredictorSpec::Ols, &exact).unwrap();
    assert!(per_sample_loss(&ols, &exact, Loss::Quadratic).unwrap().iter().all(|v| *v < 1e-20));

    let binary = Dataset::from_unnamed(x, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let half = predictors::FittedPredictor::population_linear(0.5, vec![0.0]);
    let l = per_sample_loss(&half, &binary, Loss::CrossEntropy).unwrap();
    assert!(l.iter().all(|v| (v - 2f64.ln()).abs() < 1e-15));
}
