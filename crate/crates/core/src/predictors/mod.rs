//! Self-contained regression models used as the fitted `m`, the reduced
//! models `m_{-j}` / `m_j`, and the linear index.

mod tree;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Loss};
use crate::error::{Result, VimError};
use crate::linalg;
use crate::rng;
use tree::{Tree, TreeParams};

/// Anything that maps a `k x n_inputs` matrix to `k` predictions.
pub trait Predictor: Send + Sync {
    fn n_inputs(&self) -> usize;

    fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>>;
}

fn check_inputs(expected: usize, x: &DMatrix<f64>) -> Result<()> {
    if x.ncols() != expected {
        return Err(VimError::Dimension {
            context: "predictor inputs",
            expected,
            found: x.ncols(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `ceil(p / 3)`.
    pub mtry: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 16,
            min_leaf: 5,
            mtry: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 6,
            min_leaf: 10,
        }
    }
}

/// Learner class and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorSpec {
    Mean,
    Ols,
    Ridge { lambda: f64 },
    RandomForest(ForestParams),
    BoostedTrees(BoostParams),
}

impl PredictorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PredictorSpec::Mean | PredictorSpec::Ols => Ok(()),
            PredictorSpec::Ridge { lambda } => {
                if *lambda >= 0.0 {
                    Ok(())
                } else {
                    Err(VimError::invalid("ridge lambda must be >= 0"))
                }
            }
            PredictorSpec::RandomForest(f) => {
                if f.n_trees == 0 || f.max_depth == 0 || f.min_leaf == 0 || f.mtry == Some(0) {
                    Err(VimError::invalid("forest counts must be >= 1"))
                } else {
                    Ok(())
                }
            }
            PredictorSpec::BoostedTrees(b) => {
                if b.n_rounds == 0 || b.max_depth == 0 || b.min_leaf == 0 {
                    Err(VimError::invalid("boosting counts must be >= 1"))
                } else if !(b.learning_rate > 0.0 && b.learning_rate <= 1.0) {
                    Err(VimError::invalid("learning_rate must lie in (0, 1]"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Same spec with the forest bootstrap seed replaced.
    pub fn reseeded(&self, seed: u64) -> PredictorSpec {
        match self {
            PredictorSpec::RandomForest(f) => PredictorSpec::RandomForest(ForestParams {
                seed,
                ..f.clone()
            }),
            other => other.clone(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PredictorSpec::Mean => "mean",
            PredictorSpec::Ols => "ols",
            PredictorSpec::Ridge { .. } => "ridge",
            PredictorSpec::RandomForest(_) => "random_forest",
            PredictorSpec::BoostedTrees(_) => "boosted_trees",
        }
    }
}

/// Intercept and slopes of a linear model. Doubles as a fixed ("population")
/// linear predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub coefficients: DVector<f64>,
    /// Whether the covariates it was fit on were standardized.
    pub standardized: bool,
}

impl LinearFit {
    pub fn new(intercept: f64, coefficients: Vec<f64>) -> Self {
        Self {
            intercept,
            coefficients: DVector::from_vec(coefficients),
            standardized: false,
        }
    }

    #[inline]
    fn predict_row(&self, x: &DMatrix<f64>, i: usize, map: &[usize]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(map)
                .map(|(b, &c)| b * x[(i, c)])
                .sum::<f64>()
    }
}

impl Predictor for LinearFit {
    fn n_inputs(&self) -> usize {
        self.coefficients.len()
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_inputs(self.n_inputs(), x)?;
        let map: Vec<usize> = (0..x.ncols()).collect();
        Ok((0..x.nrows()).map(|i| self.predict_row(x, i, &map)).collect())
    }
}

/// Row-wise closure predictor, mostly for known regression functions.
pub struct FnPredictor<F> {
    n_inputs: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnPredictor<F> {
    pub fn new(n_inputs: usize, f: F) -> Self {
        Self { n_inputs, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Predictor for FnPredictor<F> {
    fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_inputs(self.n_inputs, x)?;
        let mut row = vec![0.0; x.ncols()];
        Ok((0..x.nrows())
            .map(|i| {
                for (j, r) in row.iter_mut().enumerate() {
                    *r = x[(i, j)];
                }
                (self.f)(&row)
            })
            .collect())
    }
}

/// `Predictor` adapter that evaluates the population polynomial benchmark.
pub fn poly_population_model() -> impl Predictor {
    FnPredictor::new(10, |r: &[f64]| crate::data::poly_mean(|j| r[j]))
}

/// `GLM` importance: squared coefficients of a linear fit on standardized
/// covariates.
pub fn glm_index(fit: &LinearFit) -> Result<Vec<f64>> {
    if !fit.standardized {
        return Err(VimError::Unstandardized);
    }
    Ok(fit.coefficients.iter().map(|b| b * b).collect())
}

#[derive(Clone)]
enum Model {
    External(Arc<dyn Predictor>),
    Constant(f64),
    Linear(LinearFit),
    Forest(Vec<Tree>),
    Boosted {
        init: f64,
        learning_rate: f64,
        trees: Vec<Tree>,
    },
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Model::External(p) => write!(f, "External({} inputs)", p.n_inputs()),
            Model::Constant(c) => write!(f, "Constant({c})"),
            Model::Linear(l) => write!(f, "{l:?}"),
            Model::Forest(t) => write!(f, "Forest({} trees)", t.len()),
            Model::Boosted { trees, .. } => write!(f, "Boosted({} rounds)", trees.len()),
        }
    }
}

/// A trained model restricted to an ordered subset of the original columns.
#[derive(Debug, Clone)]
pub struct FittedPredictor {
    spec: Option<PredictorSpec>,
    subset: Vec<usize>,
    model: Model,
    training_loss: f64,
}

impl FittedPredictor {
    /// Wraps a fixed model that reads all of its `n_inputs()` columns, such
    /// as a known regression function.
    pub fn from_predictor(model: Arc<dyn Predictor>) -> FittedPredictor {
        FittedPredictor {
            spec: None,
            subset: (0..model.n_inputs()).collect(),
            model: Model::External(model),
            training_loss: f64::NAN,
        }
    }

    /// Fixed linear model over all columns.
    pub fn population_linear(intercept: f64, coefficients: Vec<f64>) -> FittedPredictor {
        Self::from_predictor(Arc::new(LinearFit::new(intercept, coefficients)))
    }

    /// Learner spec, or `None` for wrapped fixed models.
    pub fn spec(&self) -> Option<&PredictorSpec> {
        self.spec.as_ref()
    }

    pub fn kind_name(&self) -> &'static str {
        self.spec.as_ref().map_or("fixed", |s| s.name())
    }

    /// Original column indices the model consumes, in input order.
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    /// Mean squared error on the training rows.
    pub fn training_loss(&self) -> f64 {
        self.training_loss
    }

    pub fn linear_fit(&self) -> Option<&LinearFit> {
        match &self.model {
            Model::Linear(l) => Some(l),
            _ => None,
        }
    }

    fn predict_mapped(&self, x: &DMatrix<f64>, map: &[usize]) -> Result<Vec<f64>> {
        let n = x.nrows();
        Ok(match &self.model {
            Model::External(p) => {
                let identity = map.len() == x.ncols() && map.iter().enumerate().all(|(k, &c)| k == c);
                if identity {
                    p.predict(x)?
                } else {
                    p.predict(&linalg::select_columns(x, map))?
                }
            }
            Model::Constant(c) => vec![*c; n],
            Model::Linear(l) => (0..n).map(|i| l.predict_row(x, i, map)).collect(),
            Model::Forest(trees) => {
                let mut out = vec![0.0; n];
                for t in trees {
                    for (i, o) in out.iter_mut().enumerate() {
                        *o += t.predict_row(x, i, map);
                    }
                }
                let k = trees.len() as f64;
                out.iter_mut().for_each(|o| *o /= k);
                out
            }
            Model::Boosted {
                init,
                learning_rate,
                trees,
            } => {
                let mut out = vec![*init; n];
                for t in trees {
                    for (i, o) in out.iter_mut().enumerate() {
                        *o += learning_rate * t.predict_row(x, i, map);
                    }
                }
                out
            }
        })
    }

    /// Predictions from a matrix holding all original columns; the model
    /// picks its own subset out of it.
    pub fn predict_full(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if let Some(&max) = self.subset.iter().max() {
            if max >= x.ncols() {
                return Err(VimError::Dimension {
                    context: "full-width predictor inputs",
                    expected: max + 1,
                    found: x.ncols(),
                });
            }
        }
        self.predict_mapped(x, &self.subset)
    }
}

impl Predictor for FittedPredictor {
    fn n_inputs(&self) -> usize {
        self.subset.len()
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_inputs(self.subset.len(), x)?;
        let map: Vec<usize> = (0..x.ncols()).collect();
        self.predict_mapped(x, &map)
    }
}

/// Trains `spec` on columns `subset` of `d`.
pub fn fit(spec: &PredictorSpec, d: &Dataset, subset: &[usize]) -> Result<FittedPredictor> {
    spec.validate()?;
    if subset.is_empty() && *spec != PredictorSpec::Mean {
        return Err(VimError::EmptySubset);
    }
    for (k, &j) in subset.iter().enumerate() {
        if j >= d.p() {
            return Err(VimError::invalid(format!("feature index {j} out of range")));
        }
        if subset[..k].contains(&j) {
            return Err(VimError::invalid(format!("feature index {j} repeated")));
        }
    }
    let y = d.y();
    let n = d.n();
    let model = match spec {
        PredictorSpec::Mean => Model::Constant(y.iter().sum::<f64>() / n as f64),
        PredictorSpec::Ols | PredictorSpec::Ridge { .. } => {
            let lambda = match spec {
                PredictorSpec::Ridge { lambda } => *lambda,
                _ => 0.0,
            };
            let xs = linalg::select_columns(d.x(), subset);
            let (intercept, coefficients) = linalg::least_squares(&xs, y, lambda)?;
            Model::Linear(LinearFit {
                intercept,
                coefficients,
                standardized: d.is_standardized(),
            })
        }
        PredictorSpec::RandomForest(params) => {
            let columns = feature_columns(d, subset);
            let p = subset.len();
            let mtry = params.mtry.unwrap_or(p.div_ceil(3)).clamp(1, p);
            let tp = TreeParams {
                max_depth: params.max_depth,
                min_leaf: params.min_leaf,
                mtry: Some(mtry),
            };
            let trees = (0..params.n_trees)
                .into_par_iter()
                .map(|t| {
                    let mut r = rng::rng_from(rng::derive_seed(params.seed, t as u64));
                    let rows: Vec<usize> =
                        (0..n).map(|_| rand::Rng::random_range(&mut r, 0..n)).collect();
                    Tree::fit(&columns, y, rows, &tp, Some(&mut r))
                })
                .collect();
            Model::Forest(trees)
        }
        PredictorSpec::BoostedTrees(params) => {
            let columns = feature_columns(d, subset);
            let init = y.iter().sum::<f64>() / n as f64;
            let tp = TreeParams {
                max_depth: params.max_depth,
                min_leaf: params.min_leaf,
                mtry: None,
            };
            let xs = linalg::select_columns(d.x(), subset);
            let map: Vec<usize> = (0..subset.len()).collect();
            let mut current = vec![init; n];
            let mut residual = vec![0.0; n];
            let mut trees = Vec::with_capacity(params.n_rounds);
            for _ in 0..params.n_rounds {
                for i in 0..n {
                    residual[i] = y[i] - current[i];
                }
                let t = Tree::fit(&columns, &residual, (0..n).collect(), &tp, None);
                for (i, c) in current.iter_mut().enumerate() {
                    *c += params.learning_rate * t.predict_row(&xs, i, &map);
                }
                trees.push(t);
            }
            Model::Boosted {
                init,
                learning_rate: params.learning_rate,
                trees,
            }
        }
    };
    let mut fitted = FittedPredictor {
        spec: Some(spec.clone()),
        subset: subset.to_vec(),
        model,
        training_loss: 0.0,
    };
    let preds = fitted.predict_full(d.x())?;
    fitted.training_loss = preds
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n as f64;
    Ok(fitted)
}

/// Trains on every column.
pub fn fit_all(spec: &PredictorSpec, d: &Dataset) -> Result<FittedPredictor> {
    let all: Vec<usize> = (0..d.p()).collect();
    fit(spec, d, &all)
}

fn feature_columns(d: &Dataset, subset: &[usize]) -> Vec<Vec<f64>> {
    subset.iter().map(|&j| d.column(j)).collect()
}

/// `l(y_i, f(x_i))` for every row of `d`; `f` reads its own columns.
pub fn per_sample_loss(f: &FittedPredictor, d: &Dataset, loss: Loss) -> Result<Vec<f64>> {
    let preds = f.predict_full(d.x())?;
    loss.losses(d.y(), &preds)
}

/// Out-of-sample coefficient of determination.
pub fn r_squared(preds: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_res: f64 = preds.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    let ss_tot: f64 = y.iter().map(|t| (t - mean) * (t - mean)).sum();
    1.0 - ss_res / ss_tot
}
