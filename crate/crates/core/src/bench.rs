//! Simulation harness: repeated synthetic experiments comparing subsampling
//! methods against baselines, with MSE, estimated MSE, coverage, and timing
//! per cell.
//!
//! Replicates run in a worker pool. Each replicate owns RNG streams keyed by
//! its index, and aggregation folds replicate records in index order, so a
//! config maps to one result regardless of thread count (timing fields
//! excepted).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::datagen::{generate, CovariateLaw, ErrorLaw, SyntheticSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{
    confidence_intervals, iterative_batches, prepare_plan, IterativeEstimate, PlannedSampling,
};
use crate::rng::{Streams, GENERATOR};
use crate::sampling::SamplingMethod;
use crate::solver::{solve, QuantileFit, SolveOptions, WeightedProblem};

/// Estimation method compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Uniform,
    Lopt,
    Aopt,
    Universal,
    DivideConquer,
    FullData,
}

impl Method {
    fn sampling(self) -> Option<SamplingMethod> {
        match self {
            Method::Uniform => Some(SamplingMethod::Uniform),
            Method::Lopt => Some(SamplingMethod::Lopt),
            Method::Aopt => Some(SamplingMethod::Aopt),
            Method::Universal => Some(SamplingMethod::Universal),
            Method::DivideConquer | Method::FullData => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Method::Uniform => "uniform",
            Method::Lopt => "lopt",
            Method::Aopt => "aopt",
            Method::Universal => "universal",
            Method::DivideConquer => "divide_conquer",
            Method::FullData => "full_data",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Method::Uniform),
            "lopt" => Ok(Method::Lopt),
            "aopt" => Ok(Method::Aopt),
            "universal" => Ok(Method::Universal),
            "divide_conquer" | "dc" => Ok(Method::DivideConquer),
            "full_data" | "full" => Ok(Method::FullData),
            other => Err(Error::InvalidSpec(format!("unknown method {other:?}"))),
        }
    }
}

impl std::str::FromStr for CovariateLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mvnormal" | "normal" => Ok(CovariateLaw::MvNormal),
            "mvt3" | "t3" => Ok(CovariateLaw::MvT3),
            "mvt2" | "t2" => Ok(CovariateLaw::MvT2),
            other => Err(Error::InvalidSpec(format!("unknown covariate law {other:?}"))),
        }
    }
}

impl std::str::FromStr for ErrorLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(ErrorLaw::Normal),
            "exponential1" | "exponential" | "exp" => Ok(ErrorLaw::Exponential1),
            "t1" => Ok(ErrorLaw::T1),
            "zero" | "none" => Ok(ErrorLaw::Zero),
            other => Err(Error::InvalidSpec(format!("unknown error law {other:?}"))),
        }
    }
}

pub const FULL_DATA_CAP_DEFAULT: usize = 200_000;

/// One simulation grid: every combination of method, quantile level, and
/// batch count runs on `replicates` fresh datasets.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub n_rows: usize,
    /// Coefficient count; the true coefficient vector is all ones.
    pub p: usize,
    pub covariate_law: CovariateLaw,
    pub error_law: ErrorLaw,
    pub taus: Vec<f64>,
    pub n0: usize,
    pub n: usize,
    pub bs: Vec<usize>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    /// Confidence level for coverage accounting.
    pub level: f64,
    /// `FullData` refuses to run above this row count.
    pub full_data_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_rows: 100_000,
            p: 7,
            covariate_law: CovariateLaw::MvNormal,
            error_law: ErrorLaw::Normal,
            taus: vec![0.5],
            n0: 1_000,
            n: 1_000,
            bs: vec![10],
            replicates: 100,
            methods: vec![Method::Uniform, Method::Lopt],
            base_seed: 0,
            level: 0.95,
            full_data_cap: FULL_DATA_CAP_DEFAULT,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidSpec("replicates must be at least 1".into()));
        }
        if self.n_rows == 0 || self.p == 0 || self.n0 == 0 || self.n == 0 {
            return Err(Error::InvalidSpec("all sizes must be positive".into()));
        }
        if self.taus.is_empty() || self.bs.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidSpec(
                "taus, bs, and methods must be non-empty".into(),
            ));
        }
        if self.taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::InvalidSpec("every tau must lie in (0,1)".into()));
        }
        if self.bs.iter().any(|b| *b == 0) {
            return Err(Error::InvalidSpec("every B must be positive".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidSpec("level must lie in (0,1)".into()));
        }
        if self.methods.contains(&Method::FullData) && self.n_rows > self.full_data_cap {
            return Err(Error::InvalidSpec(format!(
                "full-data fits are capped at {} rows, config has {}",
                self.full_data_cap, self.n_rows
            )));
        }
        Ok(())
    }

    fn beta_true(&self) -> Vec<f64> {
        vec![1.0; self.p]
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CellKey {
    pub method: Method,
    pub tau: f64,
    pub n: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CellStats {
    /// Mean over replicates of the squared coefficient error.
    pub empirical_mse: f64,
    /// Mean over replicates of the variance-estimate trace, when available.
    pub mean_estimated_mse: Option<f64>,
    /// Per-coefficient CI coverage, when intervals are available.
    pub coverage: Option<Vec<f64>>,
    pub mean_runtime_ms: f64,
    pub mean_plan_ms: f64,
    pub mean_solve_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Cell {
    pub key: CellKey,
    /// Absent when any replicate failed for this cell.
    pub stats: Option<CellStats>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    pub version: String,
    pub generator: String,
}

/// Per-replicate, per-cell record prior to aggregation.
struct RepRecord {
    sq_err: f64,
    estimated_mse: Option<f64>,
    hits: Option<Vec<bool>>,
    plan_ms: f64,
    solve_ms: f64,
}

fn enumerate_cells(config: &ExperimentConfig) -> Vec<CellKey> {
    let mut cells = Vec::new();
    for &method in &config.methods {
        for &tau in &config.taus {
            match method {
                Method::FullData => cells.push(CellKey { method, tau, n: config.n_rows, b: 1 }),
                Method::DivideConquer => {
                    for &b in &config.bs {
                        cells.push(CellKey { method, tau, n: config.n_rows, b });
                    }
                }
                _ => {
                    for &b in &config.bs {
                        cells.push(CellKey { method, tau, n: config.n, b });
                    }
                }
            }
        }
    }
    cells
}

/// Run the full grid. Configuration errors fail the call; a replicate
/// failure inside one cell marks that cell failed and leaves the rest alive.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let cells = enumerate_cells(config);
    let records: Vec<Vec<std::result::Result<RepRecord, String>>> = (0..config.replicates)
        .into_par_iter()
        .map(|s| run_replicate(config, &cells, s as u64))
        .collect();

    let beta_len = config.p;
    let out_cells = cells
        .iter()
        .enumerate()
        .map(|(c, key)| {
            let mut sq = 0.0f64;
            let mut emse_sum = 0.0f64;
            let mut emse_count = 0usize;
            let mut hit_counts = vec![0usize; beta_len];
            let mut hits_available = 0usize;
            let mut plan_ms = 0.0f64;
            let mut solve_ms = 0.0f64;
            let mut error = None;
            for rep in &records {
                match &rep[c] {
                    Ok(r) => {
                        sq += r.sq_err;
                        if let Some(e) = r.estimated_mse {
                            emse_sum += e;
                            emse_count += 1;
                        }
                        if let Some(h) = &r.hits {
                            hits_available += 1;
                            for (count, hit) in hit_counts.iter_mut().zip(h) {
                                *count += usize::from(*hit);
                            }
                        }
                        plan_ms += r.plan_ms;
                        solve_ms += r.solve_ms;
                    }
                    Err(e) => {
                        if error.is_none() {
                            error = Some(e.clone());
                        }
                    }
                }
            }
            if let Some(error) = error {
                return Cell { key: *key, stats: None, error: Some(error) };
            }
            let s = config.replicates as f64;
            Cell {
                key: *key,
                stats: Some(CellStats {
                    empirical_mse: sq / s,
                    mean_estimated_mse: (emse_count > 0).then(|| emse_sum / emse_count as f64),
                    coverage: (hits_available > 0).then(|| {
                        hit_counts
                            .iter()
                            .map(|&c| c as f64 / hits_available as f64)
                            .collect()
                    }),
                    mean_runtime_ms: (plan_ms + solve_ms) / s,
                    mean_plan_ms: plan_ms / s,
                    mean_solve_ms: solve_ms / s,
                }),
                error: None,
            }
        })
        .collect();

    Ok(ExperimentResult {
        config: config.clone(),
        cells: out_cells,
        version: env!("CARGO_PKG_VERSION").to_string(),
        generator: GENERATOR.to_string(),
    })
}

/// Multi-level sweep: like [`run_experiment`] but requires both the
/// level-specific and the level-free plan so their efficiency can be
/// compared; the level-free plan is built once per replicate and shared
/// across every `tau` cell.
pub fn multi_tau_sweep(config: &ExperimentConfig) -> Result<ExperimentResult> {
    if !(config.methods.contains(&Method::Lopt) && config.methods.contains(&Method::Universal)) {
        return Err(Error::InvalidSpec(
            "a tau sweep requires both lopt and universal among the methods".into(),
        ));
    }
    run_experiment(config)
}

fn run_replicate(
    config: &ExperimentConfig,
    cells: &[CellKey],
    s: u64,
) -> Vec<std::result::Result<RepRecord, String>> {
    let beta_true = config.beta_true();
    let streams = Streams::for_replicate(config.base_seed, s);
    let data_seed = config.base_seed.wrapping_add(s);

    // Datasets share covariate draws across tau (identical stream), so the
    // level-free plan computed on the first one is valid for all of them.
    let mut datasets: Vec<(f64, Dataset)> = Vec::new();
    let mut universal_plan: Option<PlannedSampling> = None;
    let mut estimates: Vec<Option<std::result::Result<Vec<IterativeEstimate>, String>>> =
        vec![None; config.methods.len() * config.taus.len()];

    let dataset_for = |tau: f64, datasets: &mut Vec<(f64, Dataset)>| -> Result<usize> {
        if let Some(pos) = datasets.iter().position(|(t, _)| *t == tau) {
            return Ok(pos);
        }
        let spec = SyntheticSpec {
            n_rows: config.n_rows,
            covariate_law: config.covariate_law,
            error_law: config.error_law,
            tau,
            beta_true: beta_true.clone(),
            seed: data_seed,
            add_intercept: false,
        };
        let (data, _) = generate(&spec)?;
        datasets.push((tau, data));
        Ok(datasets.len() - 1)
    };

    cells
        .iter()
        .map(|key| {
            let data_idx = dataset_for(key.tau, &mut datasets).map_err(|e| e.to_string())?;
            let data = &datasets[data_idx].1;
            match key.method {
                Method::DivideConquer => {
                    let start = std::time::Instant::now();
                    let beta =
                        divide_and_conquer(data, key.b, key.tau).map_err(|e| e.to_string())?;
                    let elapsed = start.elapsed().as_secs_f64() * 1e3;
                    Ok(RepRecord {
                        sq_err: squared_error(&beta, &beta_true),
                        estimated_mse: None,
                        hits: None,
                        plan_ms: 0.0,
                        solve_ms: elapsed,
                    })
                }
                Method::FullData => {
                    let start = std::time::Instant::now();
                    let fit = full_data_fit(data, key.tau).map_err(|e| e.to_string())?;
                    let elapsed = start.elapsed().as_secs_f64() * 1e3;
                    Ok(RepRecord {
                        sq_err: squared_error(&fit.beta, &beta_true),
                        estimated_mse: None,
                        hits: None,
                        plan_ms: 0.0,
                        solve_ms: elapsed,
                    })
                }
                method => {
                    let method_idx = config
                        .methods
                        .iter()
                        .position(|m| *m == method)
                        .expect("cell method comes from config");
                    let tau_idx = config
                        .taus
                        .iter()
                        .position(|t| *t == key.tau)
                        .expect("cell tau comes from config");
                    let slot = method_idx * config.taus.len() + tau_idx;
                    if estimates[slot].is_none() {
                        estimates[slot] = Some(
                            run_prefixes(
                                config,
                                data,
                                method,
                                key.tau,
                                &streams,
                                &mut universal_plan,
                            )
                            .map_err(|e| e.to_string()),
                        );
                    }
                    let prefix = estimates[slot].as_ref().expect("just filled");
                    let prefix = prefix.as_ref().map_err(|e| e.clone())?;
                    let b_idx = config
                        .bs
                        .iter()
                        .position(|b| *b == key.b)
                        .expect("cell B comes from config");
                    let est = &prefix[b_idx];
                    let (estimated_mse, hits) = match est.vcov.as_ref() {
                        None => (None, None),
                        Some(vcov) => {
                            let ci = confidence_intervals(est, config.level)
                                .map_err(|e| e.to_string())?;
                            let hits = ci
                                .iter()
                                .zip(&beta_true)
                                .map(|(interval, t)| {
                                    *t >= interval[0] && *t <= interval[1]
                                })
                                .collect();
                            (Some(vcov.trace()), Some(hits))
                        }
                    };
                    Ok(RepRecord {
                        sq_err: squared_error(&est.beta_pooled, &beta_true),
                        estimated_mse,
                        hits,
                        plan_ms: est.timings.plan_ms,
                        solve_ms: est.timings.solve_ms_total,
                    })
                }
            }
        })
        .collect()
}

fn run_prefixes(
    config: &ExperimentConfig,
    data: &Dataset,
    method: Method,
    tau: f64,
    streams: &Streams,
    universal_plan: &mut Option<PlannedSampling>,
) -> Result<Vec<IterativeEstimate>> {
    let sampling = method.sampling().expect("subsampling method");
    let planned = match sampling {
        SamplingMethod::Universal => {
            if universal_plan.is_none() {
                *universal_plan = Some(prepare_plan(data, config.n0, tau, sampling, streams)?);
            }
            universal_plan.clone().expect("just filled")
        }
        _ => prepare_plan(data, config.n0, tau, sampling, streams)?,
    };
    iterative_batches(data, &planned, config.n, &config.bs, tau, streams)
}

fn squared_error(beta: &[f64], beta_true: &[f64]) -> f64 {
    beta.iter()
        .zip(beta_true)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Unweighted full-data fit of one contiguous block.
fn block_fit(data: &Dataset, start: usize, end: usize, tau: f64) -> Result<QuantileFit> {
    let len = end - start;
    let p = data.n_cols();
    let mut x = Vec::with_capacity(len * p);
    for i in start..end {
        x.extend_from_slice(data.row(i));
    }
    let y = data.y()[start..end].to_vec();
    let problem = WeightedProblem::new(x, y, vec![1.0 / len as f64; len], p, tau)?;
    solve(&problem, &SolveOptions::default())
}

/// Partition the data into `b` contiguous blocks (the last absorbs any
/// remainder), fit each, and average the block coefficients.
pub fn divide_and_conquer(data: &Dataset, b: usize, tau: f64) -> Result<Vec<f64>> {
    if b == 0 {
        return Err(Error::InvalidSpec("block count must be at least 1".into()));
    }
    let n = data.n_rows();
    let p = data.n_cols();
    let base = n / b;
    if base < p + 1 {
        return Err(Error::InvalidSpec(format!(
            "{b} blocks of {n} rows leave fewer than p + 1 = {} rows per block",
            p + 1
        )));
    }
    let fits: Vec<Result<QuantileFit>> = (0..b)
        .into_par_iter()
        .map(|k| {
            let start = k * base;
            let end = if k + 1 == b { n } else { start + base };
            block_fit(data, start, end, tau)
        })
        .collect();
    let mut mean = vec![0.0f64; p];
    for fit in fits {
        let fit = fit?;
        for (acc, v) in mean.iter_mut().zip(&fit.beta) {
            *acc += v;
        }
    }
    for v in mean.iter_mut() {
        *v /= b as f64;
    }
    Ok(mean)
}

/// Full-data fit (a single divide-and-conquer block).
pub fn full_data_fit(data: &Dataset, tau: f64) -> Result<QuantileFit> {
    block_fit(data, 0, data.n_rows(), tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
}

impl std::str::FromStr for EmitFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(EmitFormat::Csv),
            "json" => Ok(EmitFormat::Json),
            other => Err(Error::InvalidSpec(format!("unknown format {other:?}"))),
        }
    }
}

/// CSV rendering with a fixed column order:
/// `method,tau,n,B,S,mse,emse,coverage_1..coverage_p,runtime_ms`.
/// Failed cells render `nan` metrics.
pub fn to_csv_string(result: &ExperimentResult) -> String {
    let p = result.config.p;
    let mut out = String::from("method,tau,n,B,S,mse,emse");
    for j in 1..=p {
        let _ = write!(out, ",coverage_{j}");
    }
    out.push_str(",runtime_ms\n");
    for cell in &result.cells {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            cell.key.method, cell.key.tau, cell.key.n, cell.key.b, result.config.replicates
        );
        match &cell.stats {
            Some(stats) => {
                let _ = write!(out, ",{}", stats.empirical_mse);
                match stats.mean_estimated_mse {
                    Some(e) => {
                        let _ = write!(out, ",{e}");
                    }
                    None => out.push_str(",nan"),
                }
                for j in 0..p {
                    match &stats.coverage {
                        Some(cov) => {
                            let _ = write!(out, ",{}", cov[j]);
                        }
                        None => out.push_str(",nan"),
                    }
                }
                let _ = writeln!(out, ",{}", stats.mean_runtime_ms);
            }
            None => {
                let _ = write!(out, ",nan,nan");
                for _ in 0..p {
                    out.push_str(",nan");
                }
                out.push_str(",nan\n");
            }
        }
    }
    out
}

pub fn to_json_string(result: &ExperimentResult) -> Result<String> {
    serde_json::to_string_pretty(result)
        .map_err(|e| Error::InvalidSpec(format!("serialization failed: {e}")))
}

/// Write the result to disk in the requested format.
pub fn emit(result: &ExperimentResult, format: EmitFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let body = match format {
        EmitFormat::Csv => to_csv_string(result),
        EmitFormat::Json => to_json_string(result)?,
    };
    std::fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            n_rows: 2_000,
            p: 3,
            covariate_law: CovariateLaw::MvNormal,
            error_law: ErrorLaw::Zero,
            taus: vec![0.5],
            n0: 60,
            n: 120,
            bs: vec![2],
            replicates: 3,
            methods: vec![Method::Uniform, Method::Lopt],
            base_seed: 7,
            level: 0.95,
            full_data_cap: FULL_DATA_CAP_DEFAULT,
        }
    }

    #[test]
    fn zero_noise_cells_have_vanishing_mse() {
        let result = run_experiment(&tiny_config()).unwrap();
        assert_eq!(result.cells.len(), 2);
        for cell in &result.cells {
            let stats = cell.stats.as_ref().expect("cell should succeed");
            assert!(
                stats.empirical_mse < 1e-12,
                "{}: mse = {}",
                cell.key.method,
                stats.empirical_mse
            );
        }
    }

    #[test]
    fn divide_and_conquer_single_block_is_the_full_fit() {
        let spec = SyntheticSpec::new(500, CovariateLaw::MvNormal, ErrorLaw::Normal, 0.5, 3);
        let (data, _) = generate(&spec).unwrap();
        let dc = divide_and_conquer(&data, 1, 0.5).unwrap();
        let full = full_data_fit(&data, 0.5).unwrap();
        assert_eq!(dc, full.beta);
    }

    #[test]
    fn divide_and_conquer_recovers_noiseless_truth() {
        let spec = SyntheticSpec {
            beta_true: vec![2.0, -1.0, 0.5],
            ..SyntheticSpec::new(600, CovariateLaw::MvNormal, ErrorLaw::Zero, 0.5, 4)
        };
        let (data, beta_true) = generate(&spec).unwrap();
        let dc = divide_and_conquer(&data, 4, 0.5).unwrap();
        for (a, b) in dc.iter().zip(&beta_true) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(matches!(
            divide_and_conquer(&data, 400, 0.5),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn csv_emission_has_fixed_columns_and_handles_empty_results() {
        let empty = ExperimentResult {
            config: ExperimentConfig { p: 2, ..tiny_config() },
            cells: vec![],
            version: "test".into(),
            generator: "test".into(),
        };
        assert_eq!(
            to_csv_string(&empty),
            "method,tau,n,B,S,mse,emse,coverage_1,coverage_2,runtime_ms\n"
        );
    }

    #[test]
    fn json_round_trips_exactly() {
        let mut config = tiny_config();
        config.replicates = 2;
        let result = run_experiment(&config).unwrap();
        let json = to_json_string(&result).unwrap();
        let back: ExperimentResult = serde_json::from_str(&json).unwrap();
        assert_eq!(result.config, back.config);
        for (a, b) in result.cells.iter().zip(&back.cells) {
            let (sa, sb) = (a.stats.as_ref().unwrap(), b.stats.as_ref().unwrap());
            assert_eq!(sa.empirical_mse, sb.empirical_mse);
            assert_eq!(sa.coverage, sb.coverage);
        }
    }

    #[test]
    fn results_are_deterministic_modulo_runtime() {
        let config = tiny_config();
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        for (ca, cb) in a.cells.iter().zip(&b.cells) {
            let (sa, sb) = (ca.stats.as_ref().unwrap(), cb.stats.as_ref().unwrap());
            assert_eq!(sa.empirical_mse, sb.empirical_mse);
            assert_eq!(sa.mean_estimated_mse, sb.mean_estimated_mse);
            assert_eq!(sa.coverage, sb.coverage);
        }
    }

    #[test]
    fn full_data_cap_is_enforced() {
        let config = ExperimentConfig {
            n_rows: 300_000,
            methods: vec![Method::FullData],
            ..tiny_config()
        };
        assert!(matches!(run_experiment(&config), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn sweep_requires_both_plans() {
        let config = tiny_config();
        assert!(matches!(
            multi_tau_sweep(&config),
            Err(Error::InvalidSpec(_))
        ));
    }
}
