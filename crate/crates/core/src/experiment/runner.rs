//! Seeded orchestration of simulated and CSV experiments.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Design, ExperimentConfig, ExperimentKind, MethodConfig};
use crate::data::{self, Dataset, Loss};
use crate::error::{Result, VimError};
use crate::estimators::{self, ImportanceReport, MethodId, SageMode};
use crate::inference;
use crate::predictors::{self, FittedPredictor};
use crate::rng;
use crate::samplers::{fit_sampler, ConditionalSampler, PerturbationKind};

pub const RESULT_HEADER: [&str; 7] = [
    "repetition",
    "method",
    "feature",
    "raw_score",
    "normalized_score",
    "std_error",
    "p_value",
];

pub const CONVERGENCE_HEADER: [&str; 5] = ["n", "method", "feature", "mean_score", "sd_score"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub repetition: usize,
    pub method: String,
    pub feature: String,
    pub raw_score: f64,
    pub normalized_score: f64,
    pub std_error: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub method: String,
    pub feature: String,
    pub mean_score: f64,
    pub sd_score: f64,
}

/// Every report produced by one repetition, in configuration order.
#[derive(Debug, Clone)]
pub struct RepetitionOutput {
    pub repetition: usize,
    pub reports: Vec<(String, ImportanceReport)>,
}

impl RepetitionOutput {
    pub fn report(&self, label: &str) -> Option<&ImportanceReport> {
        self.reports.iter().find(|(l, _)| l == label).map(|(_, r)| r)
    }
}

pub fn repetition_seed(cfg: &ExperimentConfig, rep: usize) -> u64 {
    rng::derive_path(cfg.seed, &[rep as u64])
}

fn simulate_design(cfg: &ExperimentConfig, n: usize, rep_seed: u64) -> Result<Dataset> {
    let x_seed = rng::derive_seed(rep_seed, rng::STREAM_DATA);
    let noise_seed = rng::derive_seed(rep_seed, rng::STREAM_NOISE);
    match cfg.design() {
        Design::Figure1 => {
            let beta = cfg.beta();
            let x = data::gen_toeplitz_gaussian(n, beta.len(), cfg.rho(), x_seed)?;
            let sd = cfg.noise_sd();
            let mut r = rng::rng_from(noise_seed);
            let y = (0..n)
                .map(|i| {
                    let eps: f64 = StandardNormal.sample(&mut r);
                    let mean: f64 = beta.iter().enumerate().map(|(k, b)| b * x[(i, k)]).sum();
                    mean + sd * eps
                })
                .collect();
            Dataset::from_unnamed(x, y)
        }
        Design::PolySim => {
            let x = data::gen_toeplitz_gaussian(n, cfg.p(), cfg.rho(), x_seed)?;
            let y = data::gen_poly_response(&x, cfg.noise_sd(), noise_seed)?;
            Dataset::from_unnamed(x, y)
        }
    }
}

/// The full dataset of repetition `rep` before splitting. Simulated kinds
/// draw fresh data; `csv_analysis` reloads the file.
pub fn generate_repetition_data(cfg: &ExperimentConfig, rep: usize) -> Result<Dataset> {
    match cfg.kind {
        ExperimentKind::CsvAnalysis => {
            let src = cfg
                .csv
                .as_ref()
                .ok_or_else(|| VimError::Config("csv_analysis needs a [csv] section".into()))?;
            data::load_csv(&src.path, &src.target)
        }
        ExperimentKind::OracleCheck => Err(VimError::Config("oracle_check has no data".into())),
        _ => simulate_design(cfg, cfg.n(), repetition_seed(cfg, rep)),
    }
}

fn population_model(cfg: &ExperimentConfig) -> FittedPredictor {
    match cfg.design() {
        Design::Figure1 => FittedPredictor::population_linear(0.0, cfg.beta()),
        Design::PolySim => FittedPredictor::from_predictor(Arc::new(predictors::poly_population_model())),
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    full: &'a Dataset,
    train: Dataset,
    test: Dataset,
    model: Option<FittedPredictor>,
    samplers: BTreeMap<PerturbationKind, ConditionalSampler>,
    spec: predictors::PredictorSpec,
    rep_seed: u64,
}

impl Context<'_> {
    fn sampler(&self, m: &MethodConfig) -> &ConditionalSampler {
        &self.samplers[&m.sampler.unwrap_or(self.cfg.sampler())]
    }

    fn run_method(&self, idx: usize, m: &MethodConfig) -> Result<ImportanceReport> {
        let seed = rng::derive_path(self.rep_seed, &[rng::STREAM_METHOD, idx as u64]);
        let (cfg, train, test) = (self.cfg, &self.train, &self.test);
        let loss = cfg.loss;
        let fitted = || {
            self.model
                .as_ref()
                .ok_or_else(|| VimError::invalid("no model was fitted for this repetition"))
        };
        let report = match m.id {
            MethodId::Pfi => estimators::estimate_pfi(fitted()?, test, loss, m.n_perm(), seed),
            MethodId::Cfi => estimators::estimate_cfi(fitted()?, test, loss, self.sampler(m), m.n_draws(), seed),
            MethodId::SobolCpi => estimators::estimate_sobol_cpi(fitted()?, test, loss, self.sampler(m), m.n_cal(), seed),
            MethodId::Loco if cfg.population_model => estimators::estimate_loco(&self.spec, train, test, loss, seed),
            MethodId::Loco => estimators::estimate_loco_prefit(fitted()?, &self.spec, train, test, loss, seed),
            MethodId::LocoW => estimators::estimate_loco_w(&self.spec, self.full, loss, seed),
            MethodId::Loci => estimators::estimate_loci(&self.spec, train, test, loss, seed),
            MethodId::CSage | MethodId::MSage => {
                let (mode, s) = self.sage_mode(m);
                estimators::estimate_sage(fitted()?, test, loss, mode, s, m.n_permutations(), m.n_draws(), seed)
            }
            MethodId::CSageVf | MethodId::MSageVf => {
                let (mode, s) = self.sage_mode(m);
                estimators::estimate_sage_vf(fitted()?, test, loss, mode, s, m.n_draws(), seed)
            }
            MethodId::ScSage => estimators::estimate_sc_sage(fitted()?, test, loss, self.sampler(m), m.n_draws(), seed),
            MethodId::DTsi => {
                if loss != Loss::Quadratic {
                    return Err(VimError::Config("dTSI is defined for the quadratic loss only".into()));
                }
                if cfg.population_model {
                    estimators::estimate_dtsi(&self.spec, train, test, seed)
                } else {
                    estimators::estimate_dtsi_prefit(fitted()?, &self.spec, train, test, seed)
                }
            }
            MethodId::Glm => estimators::estimate_glm(train),
        }?;
        match &cfg.inference {
            Some(inf) if report.delta_kind != estimators::DeltaKind::None => {
                inference::with_p_values(&report, inf.test).map_err(|e| e.in_method(m.id))
            }
            _ => Ok(report),
        }
    }

    fn sage_mode(&self, m: &MethodConfig) -> (SageMode, Option<&ConditionalSampler>) {
        match m.id {
            MethodId::CSage | MethodId::CSageVf => (SageMode::Conditional, Some(self.sampler(m))),
            _ => (SageMode::Marginal, None),
        }
    }
}

fn run_on_data(cfg: &ExperimentConfig, full: &Dataset, rep: usize, rep_seed: u64) -> Result<RepetitionOutput> {
    let parts = data::split(
        full,
        &[cfg.train_fraction, 1.0 - cfg.train_fraction],
        rng::derive_seed(rep_seed, rng::STREAM_SPLIT),
    )?;
    let (train, test) = (parts[0].clone(), parts[1].clone());
    let spec = cfg.predictor().reseeded(rng::derive_seed(rep_seed, rng::STREAM_MODEL));
    let needs_model = cfg.methods.iter().any(|m| m.id.style() != estimators::Style::Refitting)
        || cfg.methods.iter().any(|m| matches!(m.id, MethodId::Loco | MethodId::DTsi));
    let model = if cfg.population_model {
        Some(population_model(cfg))
    } else if needs_model {
        Some(predictors::fit_all(&spec, &train)?)
    } else {
        None
    };
    let mut samplers = BTreeMap::new();
    for m in &cfg.methods {
        let uses_sampler = matches!(m.id, MethodId::Cfi | MethodId::SobolCpi | MethodId::ScSage | MethodId::CSage | MethodId::CSageVf);
        let kind = m.sampler.unwrap_or(cfg.sampler());
        if uses_sampler && !samplers.contains_key(&kind) {
            samplers.insert(kind, fit_sampler(kind, train.x())?);
        }
    }
    let ctx = Context {
        cfg,
        full,
        train,
        test,
        model,
        samplers,
        spec,
        rep_seed,
    };
    let reports = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(idx, m)| {
            log::debug!("repetition {rep}: {}", m.label());
            ctx.run_method(idx, m).map(|r| (m.label(), r))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RepetitionOutput { repetition: rep, reports })
}

/// One repetition of a simulated or CSV experiment.
pub fn run_repetition(cfg: &ExperimentConfig, rep: usize) -> Result<RepetitionOutput> {
    let full = generate_repetition_data(cfg, rep)?;
    run_on_data(cfg, &full, rep, repetition_seed(cfg, rep))
}

fn require_kind(cfg: &ExperimentConfig, allowed: &[ExperimentKind], command: &str) -> Result<()> {
    cfg.validate()?;
    if !allowed.contains(&cfg.kind) {
        return Err(VimError::Config(format!(
            "`{command}` cannot run an experiment of kind {:?}",
            cfg.kind
        )));
    }
    Ok(())
}

fn rows_of(outputs: &[RepetitionOutput]) -> Vec<ResultRow> {
    let mut rows: Vec<(usize, String, usize, ResultRow)> = Vec::new();
    for out in outputs {
        for (label, r) in &out.reports {
            let normalized = r.normalized();
            for (f, norm) in r.features.iter().zip(normalized) {
                rows.push((
                    out.repetition,
                    label.clone(),
                    f.feature,
                    ResultRow {
                        repetition: out.repetition,
                        method: label.clone(),
                        feature: f.name.clone(),
                        raw_score: f.score,
                        normalized_score: norm,
                        std_error: f.std_error,
                        p_value: f.p_value,
                    },
                ));
            }
        }
    }
    rows.sort_by(|a, b| (a.0, &a.1, a.2).cmp(&(b.0, &b.1, b.2)));
    rows.into_iter().map(|r| r.3).collect()
}

fn run_repetitions(cfg: &ExperimentConfig, shared: Option<&Dataset>) -> Result<Vec<RepetitionOutput>> {
    (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| match shared {
            Some(d) => run_on_data(cfg, d, rep, repetition_seed(cfg, rep)),
            None => run_repetition(cfg, rep),
        })
        .collect()
}

/// All repetitions of a `figure1` or `poly_sim` experiment.
pub fn run_simulate_reports(cfg: &ExperimentConfig) -> Result<Vec<RepetitionOutput>> {
    require_kind(cfg, &[ExperimentKind::Figure1, ExperimentKind::PolySim], "simulate")?;
    run_repetitions(cfg, None)
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_simulate_reports(cfg).map(|o| rows_of(&o))
}

/// Repeated seeded resplits of a CSV file.
pub fn run_analyze_reports(cfg: &ExperimentConfig) -> Result<Vec<RepetitionOutput>> {
    require_kind(cfg, &[ExperimentKind::CsvAnalysis], "analyze")?;
    let d = generate_repetition_data(cfg, 0)?;
    run_repetitions(cfg, Some(&d))
}

pub fn run_analyze(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_analyze_reports(cfg).map(|o| rows_of(&o))
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and standard deviation of each raw score over repetitions, for
/// every sample size of the grid.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    require_kind(cfg, &[ExperimentKind::Convergence], "convergence")?;
    let grid = cfg.n_grid.clone().unwrap_or_default();
    let jobs: Vec<(usize, usize)> = grid
        .iter()
        .flat_map(|&n| (0..cfg.repetitions).map(move |rep| (n, rep)))
        .collect();
    let outputs = jobs
        .par_iter()
        .map(|&(n, rep)| {
            let seed = rng::derive_path(cfg.seed, &[n as u64, rep as u64]);
            let d = simulate_design(cfg, n, seed)?;
            run_on_data(cfg, &d, rep, seed).map(|o| (n, o))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cells: BTreeMap<(usize, String, usize), (String, Vec<f64>)> = BTreeMap::new();
    for (n, out) in &outputs {
        for (label, r) in &out.reports {
            for f in &r.features {
                cells
                    .entry((*n, label.clone(), f.feature))
                    .or_insert_with(|| (f.name.clone(), Vec::new()))
                    .1
                    .push(f.score);
            }
        }
    }
    Ok(cells
        .into_iter()
        .map(|((n, method, _), (feature, scores))| {
            let (mean_score, sd_score) = mean_sd(&scores);
            ConvergenceRow {
                n,
                method,
                feature,
                mean_score,
                sd_score,
            }
        })
        .collect())
}

/// Writes rows as headed CSV; `None` cells are left empty.
pub fn write_rows<T: Serialize, W: Write>(rows: &[T], header: &[&str], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let csv_err = |e: csv::Error| VimError::Csv(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| VimError::Io {
        path: PathBuf::from("<output>"),
        source,
    })?;
    Ok(())
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

/// The configuration with every default made explicit.
pub fn resolved_config(cfg: &ExperimentConfig) -> serde_json::Value {
    let methods: Vec<serde_json::Value> = cfg
        .methods
        .iter()
        .map(|m| {
            serde_json::json!({
                "id": m.id,
                "label": m.label(),
                "n_perm": m.n_perm(),
                "n_draws": m.n_draws(),
                "n_cal": m.n_cal(),
                "n_permutations": m.n_permutations(),
                "sampler": m.sampler.unwrap_or(cfg.sampler()),
            })
        })
        .collect();
    let simulated = !matches!(cfg.kind, ExperimentKind::CsvAnalysis | ExperimentKind::OracleCheck);
    serde_json::json!({
        "kind": cfg.kind,
        "seed": cfg.seed,
        "repetitions": cfg.repetitions,
        "n": if simulated { Some(cfg.n()) } else { None },
        "p": if simulated { Some(cfg.p()) } else { None },
        "rho": if simulated { Some(cfg.rho()) } else { None },
        "beta": if simulated && cfg.design() == Design::Figure1 { Some(cfg.beta()) } else { None },
        "noise_sd": if simulated { Some(cfg.noise_sd()) } else { None },
        "design": if cfg.kind == ExperimentKind::Convergence { Some(cfg.design()) } else { None },
        "n_grid": cfg.n_grid,
        "train_fraction": cfg.train_fraction,
        "loss": cfg.loss,
        "sampler": cfg.sampler(),
        "predictor": cfg.predictor(),
        "population_model": cfg.population_model,
        "inference": cfg.inference,
        "csv": cfg.csv,
        "methods": methods,
    })
}

/// Writes the CSV to `out` and the resolved configuration next to it.
pub fn write_outputs<T: Serialize>(cfg: &ExperimentConfig, rows: &[T], header: &[&str], out: &Path) -> Result<()> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| VimError::Io { path, source }
    };
    let file = std::fs::File::create(out).map_err(io(out))?;
    write_rows(rows, header, std::io::BufWriter::new(file))?;
    let side = sidecar_path(out);
    let text = serde_json::to_string_pretty(&resolved_config(cfg)).map_err(|e| VimError::Config(e.to_string()))?;
    std::fs::write(&side, text + "\n").map_err(io(&side))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    const SMALL: &str = r#"
        kind = "figure1"
        seed = 11
        repetitions = 2
        n = 400
        [predictor]
        kind = "ols"
        [[methods]]
        id = "CFI"
        [[methods]]
        id = "SobolCPI"
        n_cal = 5
        [[methods]]
        id = "LOCO"
    "#;

    #[test]
    fn rows_are_sorted_and_complete() {
        let rows = run_simulate(&cfg(SMALL)).unwrap();
        assert_eq!(rows.len(), 2 * 3 * 2);
        let keys: Vec<(usize, String)> = rows.iter().map(|r| (r.repetition, r.method.clone())).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(rows.iter().all(|r| r.p_value.is_none()));
    }

    #[test]
    fn deterministic_and_job_independent() {
        let c = cfg(SMALL);
        let a = run_simulate(&c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_simulate(&c).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_command_is_rejected() {
        assert!(matches!(run_analyze(&cfg(SMALL)), Err(VimError::Config(_))));
        assert!(matches!(run_convergence(&cfg(SMALL)), Err(VimError::Config(_))));
    }

    #[test]
    fn inference_fills_p_values() {
        let mut c = cfg(SMALL);
        c.inference = Some(super::super::config::InferenceConfig {
            test: inference::TestKind::Sign,
            alpha: 0.05,
            bonferroni: false,
        });
        let rows = run_simulate(&c).unwrap();
        assert!(rows.iter().all(|r| r.p_value.is_some()));
    }

    #[test]
    fn convergence_rows() {
        let c = cfg(r#"
            kind = "convergence"
            seed = 2
            repetitions = 3
            n_grid = [100, 200]
            population_model = true
            [[methods]]
            id = "SobolCPI"
            n_cal = 3
        "#);
        let rows = run_convergence(&c).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].n, 100);
        assert!(rows.iter().all(|r| r.sd_score >= 0.0));
    }

    #[test]
    fn csv_output_has_header_and_empty_cells() {
        let rows = run_simulate(&cfg(SMALL)).unwrap();
        let mut buf = Vec::new();
        write_rows(&rows, &RESULT_HEADER, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), RESULT_HEADER.join(","));
        assert!(lines.next().unwrap().ends_with(','));
    }
}
