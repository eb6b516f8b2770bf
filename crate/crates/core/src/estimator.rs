//! Subsample estimators: pilot fit, two-step estimation, repeated-batch
//! estimation with a variance estimator, and asymptotic-variance diagnostics.
//!
//! The repeated-batch estimator draws `B` independent subsamples from one
//! pilot-based plan, solves each weighted problem, averages the batch
//! coefficients, and estimates their variance from the spread across batches
//! scaled by the effective-subsample-size ratio. That gives standard errors
//! without ever estimating residual densities.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use statrs::distribution::ContinuousCDF;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{Streams, GENERATOR};
use crate::sampling::{
    self, draw, effective_ratio, pi_lopt, pi_uniform, pi_universal, AliasTable, DnEstimate,
    SamplingMethod, SamplingPlan,
};
use crate::solver::{solve, QuantileFit, SolveOptions, WeightedProblem};

/// Pilot fit from a uniform subsample. Only ever used to build sampling
/// plans and curvature estimates; pilot rows never join later fits.
#[derive(Debug, Clone)]
pub struct PilotResult {
    pub beta0: Vec<f64>,
    pub indices: Vec<usize>,
    /// Uniform pilot probability, `1/N` for every drawn row.
    pub pilot_pi: f64,
    pub dn: Option<DnEstimate>,
}

/// Wall-clock decomposition of one estimation run.
#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct Timings {
    /// Pilot draw/fit plus probability computation plus sampler build.
    pub plan_ms: f64,
    /// All batch draws and solves.
    pub solve_ms_total: f64,
}

/// Pooled estimate over `B` batches sharing one sampling plan.
#[derive(Debug, Clone)]
pub struct IterativeEstimate {
    pub beta_pooled: Vec<f64>,
    /// Per-batch coefficient vectors, `B` rows.
    pub batch_betas: Vec<Vec<f64>>,
    /// Present when `B >= 2`.
    pub vcov: Option<DMatrix<f64>>,
    /// Effective-subsample-size ratio (clamped into (0,1]).
    pub r_ef: f64,
    /// Raw, unclamped ratio for diagnostics.
    pub r_ef_raw: f64,
    pub n: usize,
    pub b: usize,
    pub tau: f64,
    pub timings: Timings,
}

impl IterativeEstimate {
    /// Pool a set of batch estimates: coefficient mean in batch order and
    /// the spread-based variance estimator divided by `r_ef * B * (B - 1)`.
    pub fn from_batches(
        batch_betas: Vec<Vec<f64>>,
        ratio: sampling::EffectiveRatio,
        n: usize,
        tau: f64,
    ) -> Result<Self> {
        let b = batch_betas.len();
        if b == 0 {
            return Err(Error::Shape("no batch estimates to pool".into()));
        }
        let p = batch_betas[0].len();
        if p == 0 || batch_betas.iter().any(|beta| beta.len() != p) {
            return Err(Error::Shape("batch estimates have inconsistent lengths".into()));
        }
        let mut pooled = vec![0.0f64; p];
        for beta in &batch_betas {
            for (acc, v) in pooled.iter_mut().zip(beta) {
                *acc += v;
            }
        }
        for v in pooled.iter_mut() {
            *v /= b as f64;
        }
        let vcov = (b >= 2).then(|| {
            let mut m = DMatrix::zeros(p, p);
            for beta in &batch_betas {
                let d = DVector::from_iterator(p, beta.iter().zip(&pooled).map(|(x, c)| x - c));
                m += &d * d.transpose();
            }
            m / (ratio.value * b as f64 * (b - 1) as f64)
        });
        Ok(Self {
            beta_pooled: pooled,
            batch_betas,
            vcov,
            r_ef: ratio.value,
            r_ef_raw: ratio.raw,
            n,
            b,
            tau,
            timings: Timings::default(),
        })
    }
}

fn check_subsample_size(data: &Dataset, n: usize, what: &str) -> Result<()> {
    if n < data.n_cols() + 1 {
        return Err(Error::InvalidSpec(format!(
            "{what} size {n} must be at least p + 1 = {}",
            data.n_cols() + 1
        )));
    }
    Ok(())
}

/// Uniform pilot draw and fit. `estimate_density` additionally estimates the
/// density-weighted Gram matrix from the pilot residuals.
pub fn pilot(
    data: &Dataset,
    n0: usize,
    tau: f64,
    streams: &Streams,
    estimate_density: bool,
) -> Result<PilotResult> {
    check_subsample_size(data, n0, "pilot")?;
    let plan = pi_uniform(data);
    let mut rng = streams.pilot();
    let indices = draw(&plan, n0, &mut rng)?;
    // Uniform probabilities make every weight 1/n0.
    let problem =
        WeightedProblem::from_subsample(data, &indices, vec![1.0 / n0 as f64; n0], tau)?;
    let fit = solve(&problem, &SolveOptions::default())?;
    let pilot_pi = 1.0 / data.n_rows() as f64;
    let dn = if estimate_density {
        let eps: Vec<f64> = indices
            .iter()
            .map(|&i| {
                let dot: f64 = data.row(i).iter().zip(&fit.beta).map(|(a, b)| a * b).sum();
                data.y()[i] - dot
            })
            .collect();
        Some(sampling::estimate_dn(
            data,
            &indices,
            &eps,
            &vec![pilot_pi; n0],
            data.n_rows(),
        )?)
    } else {
        None
    };
    Ok(PilotResult { beta0: fit.beta, indices, pilot_pi, dn })
}

/// A sampling plan bundled with the pilot that produced it and the wall time
/// spent building both.
#[derive(Debug, Clone)]
pub struct PlannedSampling {
    pub plan: SamplingPlan,
    pub pilot: Option<PilotResult>,
    pub plan_ms: f64,
}

/// Build the sampling plan for a method. `Lopt` and `Aopt` run a pilot and
/// use its residuals; `Uniform` and `Universal` need neither pilot nor
/// quantile level.
pub fn prepare_plan(
    data: &Dataset,
    n0: usize,
    tau: f64,
    method: SamplingMethod,
    streams: &Streams,
) -> Result<PlannedSampling> {
    let start = Instant::now();
    let (plan, pilot) = match method {
        SamplingMethod::Uniform => (pi_uniform(data), None),
        SamplingMethod::Universal => (pi_universal(data)?, None),
        SamplingMethod::Lopt => {
            let pr = pilot(data, n0, tau, streams, false)?;
            let eps = sampling::residuals(data, &pr.beta0)?;
            let mut plan = pi_lopt(data, &eps, tau)?;
            plan.pilot_beta = Some(pr.beta0.clone());
            (plan, Some(pr))
        }
        SamplingMethod::Aopt => {
            let pr = pilot(data, n0, tau, streams, true)?;
            let eps = sampling::residuals(data, &pr.beta0)?;
            let dn = pr.dn.as_ref().expect("pilot ran with density estimation");
            let mut plan = sampling::pi_aopt(data, &eps, tau, dn)?;
            plan.pilot_beta = Some(pr.beta0.clone());
            (plan, Some(pr))
        }
    };
    Ok(PlannedSampling { plan, pilot, plan_ms: start.elapsed().as_secs_f64() * 1e3 })
}

/// Solve the weighted problem for one drawn subsample. Weights are
/// `1/(n N pi_i)` so the subsample objective estimates the full-data one.
fn fit_batch(
    data: &Dataset,
    plan: &SamplingPlan,
    table: &AliasTable,
    n: usize,
    tau: f64,
    init: Option<&[f64]>,
    rng: &mut impl rand::Rng,
) -> Result<QuantileFit> {
    let indices: Vec<usize> = (0..n).map(|_| table.sample(rng)).collect();
    let n_total = data.n_rows() as f64;
    let weights: Vec<f64> = indices
        .iter()
        .map(|&i| 1.0 / (n as f64 * n_total * plan.pi()[i]))
        .collect();
    let problem = WeightedProblem::from_subsample(data, &indices, weights, tau)?;
    let opts = SolveOptions { init: init.map(|b| b.to_vec()), ..SolveOptions::default() };
    solve(&problem, &opts)
}

/// Two-step estimation: pilot, plan, one weighted subsample fit.
///
/// `Lopt` and `Aopt` build the plan from pilot residuals; `Uniform` and
/// `Universal` need no pilot. The pilot sample itself takes no part in the
/// second-step fit.
pub fn two_step(
    data: &Dataset,
    n0: usize,
    n: usize,
    tau: f64,
    method: SamplingMethod,
    streams: &Streams,
) -> Result<QuantileFit> {
    check_subsample_size(data, n, "subsample")?;
    let planned = prepare_plan(data, n0, tau, method, streams)?;
    let table = AliasTable::new(planned.plan.pi())?;
    let mut rng = streams.batch(0);
    fit_batch(
        data,
        &planned.plan,
        &table,
        n,
        tau,
        planned.pilot.as_ref().map(|p| p.beta0.as_slice()),
        &mut rng,
    )
}

/// Combine a pilot estimate and a second-step estimate through their
/// density-weighted Gram matrices:
/// `(n0 D0 + n D1)^-1 (n0 D0 beta0 + n D1 beta1)`. `n0 = 0` degenerates to
/// the second-step estimate alone.
pub fn aggregate_aopt(
    pilot_beta: &[f64],
    second_beta: &[f64],
    dn0: &DMatrix<f64>,
    dn1: &DMatrix<f64>,
    n0: usize,
    n: usize,
) -> Result<Vec<f64>> {
    let p = pilot_beta.len();
    if second_beta.len() != p || dn0.nrows() != p || dn1.nrows() != p {
        return Err(Error::Shape("aggregation dimensions disagree".into()));
    }
    let combined = dn0 * n0 as f64 + dn1 * n as f64;
    let rhs = dn0 * DVector::from_column_slice(pilot_beta) * n0 as f64
        + dn1 * DVector::from_column_slice(second_beta) * n as f64;
    let solved = combined.lu().solve(&rhs).ok_or(Error::SingularCombination)?;
    if solved.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCombination);
    }
    Ok(solved.iter().cloned().collect())
}

/// Repeated-batch estimator with the default L-optimal plan.
pub fn iterative(
    data: &Dataset,
    n0: usize,
    n: usize,
    b: usize,
    tau: f64,
    streams: &Streams,
) -> Result<IterativeEstimate> {
    iterative_with_method(data, n0, n, b, tau, SamplingMethod::Lopt, streams)
}

/// Repeated-batch estimator: one plan, `B` independent batches, pooled mean
/// and spread-based variance estimate.
///
/// Batches solve concurrently; batch `b` owns the RNG stream keyed by
/// `(seed, replicate, b)` and pooling sums in batch order, so results do not
/// depend on scheduling. Any failed batch fails the whole call.
pub fn iterative_with_method(
    data: &Dataset,
    n0: usize,
    n: usize,
    b: usize,
    tau: f64,
    method: SamplingMethod,
    streams: &Streams,
) -> Result<IterativeEstimate> {
    let planned = prepare_plan(data, n0, tau, method, streams)?;
    let mut estimates = iterative_batches(data, &planned, n, &[b], tau, streams)?;
    Ok(estimates.pop().expect("one estimate per requested B"))
}

/// Run `max(bs)` batches once and pool every prefix in `bs`.
///
/// Because batch `b` owns its stream, the estimate pooled from the first `B`
/// batches is byte-identical to a fresh run with that `B`; sharing the
/// batches just avoids re-solving them. Prefix solve times are prorated from
/// the full run.
pub fn iterative_batches(
    data: &Dataset,
    planned: &PlannedSampling,
    n: usize,
    bs: &[usize],
    tau: f64,
    streams: &Streams,
) -> Result<Vec<IterativeEstimate>> {
    check_subsample_size(data, n, "subsample")?;
    if bs.is_empty() || bs.contains(&0) {
        return Err(Error::InvalidSpec("batch counts must be positive".into()));
    }
    if let Some(plan_tau) = planned.plan.tau {
        if (plan_tau - tau).abs() > 1e-12 {
            return Err(Error::InvalidPlan(format!(
                "plan was built for tau = {plan_tau}, batches requested at {tau}"
            )));
        }
    }
    let b_max = *bs.iter().max().expect("bs is non-empty");
    if b_max > n / 10 {
        log::warn!(
            "B = {b_max} exceeds n/10 = {}; inference from the pooled estimate may be invalid",
            n / 10
        );
    }

    let solve_start = Instant::now();
    let table = AliasTable::new(planned.plan.pi())?;
    let init = planned.pilot.as_ref().map(|p| p.beta0.clone());
    let results: Vec<Result<QuantileFit>> = (0..b_max)
        .into_par_iter()
        .map(|batch_idx| {
            let mut rng = streams.batch(batch_idx as u64);
            fit_batch(data, &planned.plan, &table, n, tau, init.as_deref(), &mut rng)
        })
        .collect();
    let solve_ms_total = solve_start.elapsed().as_secs_f64() * 1e3;

    let mut batch_betas = Vec::with_capacity(b_max);
    let mut failed = Vec::new();
    let mut first_error = String::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(fit) => batch_betas.push(fit.beta),
            Err(e) => {
                if failed.is_empty() {
                    first_error = e.to_string();
                }
                failed.push(i);
            }
        }
    }
    if !failed.is_empty() {
        return Err(Error::PartialBatchFailure { batches: failed, message: first_error });
    }

    bs.iter()
        .map(|&b| {
            let ratio = effective_ratio(planned.plan.pi(), n, b);
            let mut est =
                IterativeEstimate::from_batches(batch_betas[..b].to_vec(), ratio, n, tau)?;
            est.timings = Timings {
                plan_ms: planned.plan_ms,
                solve_ms_total: solve_ms_total * b as f64 / b_max as f64,
            };
            Ok(est)
        })
        .collect()
}

/// Normal-theory confidence intervals `beta_j +/- z * sqrt(vcov_jj)`.
pub fn confidence_intervals(est: &IterativeEstimate, level: f64) -> Result<Vec<[f64; 2]>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidSpec(format!("level must be in (0,1), got {level}")));
    }
    let vcov = est.vcov.as_ref().ok_or(Error::MissingVariance)?;
    let z = statrs::distribution::Normal::new(0.0, 1.0)
        .expect("unit normal")
        .inverse_cdf(0.5 + level / 2.0);
    Ok(est
        .beta_pooled
        .iter()
        .enumerate()
        .map(|(j, &bj)| {
            let half = z * vcov[(j, j)].max(0.0).sqrt();
            [bj - half, bj + half]
        })
        .collect())
}

/// Asymptotic-variance diagnostics under a sampling plan.
#[derive(Debug, Clone)]
pub struct VarianceDiagnostics {
    /// Middle matrix of the sandwich variance under the plan.
    pub v_pi: DMatrix<f64>,
    /// Closed-form optimum matrix (norm-weighted form; inverse-Gram-weighted
    /// form when the plan is A-optimal and a curvature estimate is given).
    pub v_explicit: DMatrix<f64>,
    /// `D^-1 V_pi D^-1`, present when a curvature estimate is given.
    pub sandwich: Option<DMatrix<f64>>,
}

/// Compute `V_pi`, the explicit optimal-variance matrix, and the sandwich.
pub fn variance_diagnostics(
    data: &Dataset,
    beta: &[f64],
    tau: f64,
    plan: &SamplingPlan,
    dn: Option<&DnEstimate>,
) -> Result<VarianceDiagnostics> {
    if plan.n_rows() != data.n_rows() {
        return Err(Error::InvalidPlan(format!(
            "plan covers {} rows, data has {}",
            plan.n_rows(),
            data.n_rows()
        )));
    }
    if let Some(plan_tau) = plan.tau {
        if (plan_tau - tau).abs() > 1e-12 {
            return Err(Error::InvalidPlan(format!(
                "plan was built for tau = {plan_tau}, diagnostics requested at {tau}"
            )));
        }
    }
    let eps = sampling::residuals(data, beta)?;
    let n_total = data.n_rows();
    let p = data.n_cols();
    let scale = 1.0 / (n_total as f64 * n_total as f64);

    let mut v_pi = DMatrix::zeros(p, p);
    for i in 0..n_total {
        let psi = tau - f64::from(eps[i] < 0.0);
        let row = data.row(i);
        let pi_i = plan.pi()[i];
        if pi_i <= 0.0 {
            if row.iter().all(|v| *v == 0.0) {
                continue;
            }
            return Err(Error::InvalidPlan(format!(
                "row {i} has zero probability but nonzero design norm"
            )));
        }
        let c = scale * psi * psi / pi_i;
        for j in 0..p {
            for k in j..p {
                v_pi[(j, k)] += c * row[j] * row[k];
            }
        }
    }
    mirror(&mut v_pi);

    let inverse = match (plan.method, dn) {
        (SamplingMethod::Aopt, Some(d)) => Some(d.inverse()?),
        _ => None,
    };
    let mut weighted = DMatrix::zeros(p, p);
    let mut norm_sum = 0.0f64;
    let mut transformed = vec![0.0f64; p];
    for i in 0..n_total {
        let row = data.row(i);
        let norm = match &inverse {
            None => row.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Some(inv) => {
                for (j, t) in transformed.iter_mut().enumerate() {
                    let mut dot = 0.0;
                    for (k, v) in row.iter().enumerate() {
                        dot += inv[(j, k)] * v;
                    }
                    *t = dot;
                }
                transformed.iter().map(|v| v * v).sum::<f64>().sqrt()
            }
        };
        if norm == 0.0 {
            continue;
        }
        let mag = (tau - f64::from(eps[i] < 0.0)).abs();
        norm_sum += mag * norm;
        let c = mag / norm / n_total as f64;
        for j in 0..p {
            for k in j..p {
                weighted[(j, k)] += c * row[j] * row[k];
            }
        }
    }
    mirror(&mut weighted);
    let v_explicit = weighted * (norm_sum / n_total as f64);

    let sandwich = match dn {
        None => None,
        Some(d) => {
            let inv = d.inverse()?;
            Some(&inv * &v_pi * &inv)
        }
    };

    Ok(VarianceDiagnostics { v_pi, v_explicit, sandwich })
}

fn mirror(m: &mut DMatrix<f64>) {
    for j in 0..m.nrows() {
        for k in 0..j {
            m[(j, k)] = m[(k, j)];
        }
    }
}

/// Serializable record of one fit, stable across runs with the same seed
/// except for the timing block.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FitDocument {
    pub method: SamplingMethod,
    pub tau: f64,
    pub n0: usize,
    pub n: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub beta: Vec<f64>,
    pub vcov: Option<Vec<Vec<f64>>>,
    pub r_ef: f64,
    pub r_ef_raw: f64,
    pub ci: Option<Vec<[f64; 2]>>,
    pub level: f64,
    pub seed: u64,
    pub generator: String,
    pub timings: Timings,
}

impl FitDocument {
    pub fn from_estimate(
        est: &IterativeEstimate,
        method: SamplingMethod,
        n0: usize,
        seed: u64,
        level: f64,
    ) -> Result<Self> {
        let ci = match est.vcov {
            Some(_) => Some(confidence_intervals(est, level)?),
            None => None,
        };
        Ok(Self {
            method,
            tau: est.tau,
            n0,
            n: est.n,
            b: est.b,
            beta: est.beta_pooled.clone(),
            vcov: est.vcov.as_ref().map(|m| {
                (0..m.nrows())
                    .map(|j| (0..m.ncols()).map(|k| m[(j, k)]).collect())
                    .collect()
            }),
            r_ef: est.r_ef,
            r_ef_raw: est.r_ef_raw,
            ci,
            level,
            seed,
            generator: GENERATOR.to_string(),
            timings: est.timings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, CovariateLaw, ErrorLaw, SyntheticSpec};
    use crate::sampling::EffectiveRatio;

    fn zero_noise_data(seed: u64) -> (Dataset, Vec<f64>) {
        let spec = SyntheticSpec {
            beta_true: vec![1.0, -0.5, 2.0],
            ..SyntheticSpec::new(5_000, CovariateLaw::MvNormal, ErrorLaw::Zero, 0.5, seed)
        };
        generate(&spec).unwrap()
    }

    #[test]
    fn pilot_recovers_exact_data_and_is_deterministic() {
        let (data, beta_true) = zero_noise_data(1);
        let streams = Streams::new(5);
        let a = pilot(&data, 100, 0.5, &streams, false).unwrap();
        for (est, tru) in a.beta0.iter().zip(&beta_true) {
            assert!((est - tru).abs() < 1e-8, "{:?}", a.beta0);
        }
        let b = pilot(&data, 100, 0.5, &streams, false).unwrap();
        assert_eq!(a.beta0, b.beta0);
        assert_eq!(a.indices, b.indices);
    }

    #[test]
    fn two_step_recovers_exact_data_under_both_optimal_plans() {
        let (data, beta_true) = zero_noise_data(2);
        let streams = Streams::new(6);
        for method in [SamplingMethod::Lopt, SamplingMethod::Aopt] {
            let fit = two_step(&data, 100, 200, 0.75, method, &streams);
            // Zero-noise pilots have constant (zero) residuals, so the
            // curvature estimate degenerates for Aopt.
            match (method, fit) {
                (SamplingMethod::Aopt, Err(Error::DegeneratePilot(_))) => {}
                (_, Ok(fit)) => {
                    for (est, tru) in fit.beta.iter().zip(&beta_true) {
                        assert!((est - tru).abs() < 1e-7);
                    }
                }
                (m, Err(e)) => panic!("{m}: {e}"),
            }
        }
    }

    #[test]
    fn forced_uniform_two_step_equals_direct_uniform_run() {
        let spec = SyntheticSpec::new(2_000, CovariateLaw::MvT3, ErrorLaw::Exponential1, 0.75, 3);
        let (data, _) = generate(&spec).unwrap();
        let streams = Streams::new(11);
        let via_two_step = two_step(&data, 100, 300, 0.75, SamplingMethod::Uniform, &streams)
            .unwrap();

        let plan = pi_uniform(&data);
        let table = AliasTable::new(plan.pi()).unwrap();
        let mut rng = streams.batch(0);
        let direct = fit_batch(&data, &plan, &table, 300, 0.75, None, &mut rng).unwrap();
        assert_eq!(via_two_step.beta, direct.beta);
    }

    #[test]
    fn aggregation_arithmetic() {
        // Equal curvature and equal estimates: fixed point.
        let d = DMatrix::from_element(1, 1, 3.0);
        let out = aggregate_aopt(&[1.5], &[1.5], &d, &d, 10, 20).unwrap();
        assert!((out[0] - 1.5).abs() < 1e-15);

        // n0 = 0 puts all mass on the second step.
        let d0 = DMatrix::from_element(1, 1, 2.0);
        let d1 = DMatrix::from_element(1, 1, 4.0);
        let out = aggregate_aopt(&[1.0], &[2.0], &d0, &d1, 0, 3).unwrap();
        assert!((out[0] - 2.0).abs() < 1e-15);

        // Hand-computed scalar case: (2 + 12)^-1 (2*1 + 12*2) = 26/14.
        let out = aggregate_aopt(&[1.0], &[2.0], &d0, &d1, 1, 3).unwrap();
        assert!((out[0] - 26.0 / 14.0).abs() < 1e-15);

        let singular = DMatrix::from_element(1, 1, 0.0);
        assert!(matches!(
            aggregate_aopt(&[1.0], &[2.0], &singular, &singular, 1, 1),
            Err(Error::SingularCombination)
        ));
    }

    #[test]
    fn pooling_and_vcov_arithmetic_from_injected_batches() {
        let ratio = EffectiveRatio { value: 0.8, raw: 0.8 };
        let est = IterativeEstimate::from_batches(
            vec![vec![0.0, 0.0], vec![2.0, 2.0]],
            ratio,
            100,
            0.5,
        )
        .unwrap();
        assert_eq!(est.beta_pooled, vec![1.0, 1.0]);
        let vcov = est.vcov.unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert!((vcov[(j, k)] - 1.0 / 0.8).abs() < 1e-14);
            }
        }

        let same = IterativeEstimate::from_batches(
            vec![vec![1.0, -1.0]; 5],
            EffectiveRatio { value: 1.0, raw: 1.0 },
            100,
            0.5,
        )
        .unwrap();
        assert_eq!(same.vcov.unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn pooled_mean_matches_batch_average_to_working_precision() {
        use rand::Rng;
        let mut rng = Streams::new(8).probe(0);
        let b = 37;
        let p = 4;
        let batches: Vec<Vec<f64>> = (0..b)
            .map(|_| (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let est = IterativeEstimate::from_batches(
            batches.clone(),
            EffectiveRatio { value: 1.0, raw: 1.0 },
            50,
            0.5,
        )
        .unwrap();
        for j in 0..p {
            let mean: f64 = batches.iter().map(|r| r[j]).sum::<f64>() / b as f64;
            assert!((est.beta_pooled[j] - mean).abs() < 1e-14);
        }
        // Variance estimate is symmetric PSD.
        let vcov = est.vcov.unwrap();
        assert_eq!(vcov, vcov.transpose());
        let eig = vcov.symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn duplicating_batches_rescales_vcov_by_the_pooling_ratio() {
        use rand::Rng;
        let mut rng = Streams::new(9).probe(1);
        let b = 12;
        let batches: Vec<Vec<f64>> = (0..b)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let unit = EffectiveRatio { value: 1.0, raw: 1.0 };
        let est = IterativeEstimate::from_batches(batches.clone(), unit, 50, 0.5).unwrap();
        let doubled = [batches.clone(), batches].concat();
        let est2 = IterativeEstimate::from_batches(doubled, unit, 50, 0.5).unwrap();
        // Sum of squares doubles while B(B-1) becomes 2B(2B-1).
        let expected = (b as f64 - 1.0) / (2.0 * b as f64 - 1.0);
        let v1 = est.vcov.unwrap();
        let v2 = est2.vcov.unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert!((v2[(j, k)] - v1[(j, k)] * expected).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn single_batch_has_no_vcov_and_no_intervals() {
        let (data, _) = zero_noise_data(4);
        let streams = Streams::new(13);
        let est = iterative(&data, 50, 100, 1, 0.5, &streams).unwrap();
        assert!(est.vcov.is_none());
        assert!(matches!(
            confidence_intervals(&est, 0.95),
            Err(Error::MissingVariance)
        ));
    }

    #[test]
    fn confidence_interval_arithmetic() {
        let est = IterativeEstimate {
            beta_pooled: vec![0.0, 5.0],
            batch_betas: vec![vec![0.0, 5.0]; 2],
            vcov: Some(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])),
            r_ef: 1.0,
            r_ef_raw: 1.0,
            n: 100,
            b: 2,
            tau: 0.5,
            timings: Timings::default(),
        };
        let ci = confidence_intervals(&est, 0.95).unwrap();
        assert!((ci[0][0] + 1.959_963_984_540_054).abs() < 1e-9);
        assert!((ci[0][1] - 1.959_963_984_540_054).abs() < 1e-9);
        // Zero variance collapses to a point.
        assert_eq!(ci[1], [5.0, 5.0]);
        assert!(matches!(
            confidence_intervals(&est, 1.5),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn iterative_pooling_identity_on_noisy_data() {
        let spec = SyntheticSpec::new(3_000, CovariateLaw::MvNormal, ErrorLaw::Normal, 0.5, 21);
        let (data, _) = generate(&spec).unwrap();
        let streams = Streams::new(17);
        let est = iterative(&data, 120, 200, 5, 0.5, &streams).unwrap();
        assert_eq!(est.b, 5);
        for j in 0..est.beta_pooled.len() {
            let mean: f64 =
                est.batch_betas.iter().map(|r| r[j]).sum::<f64>() / est.b as f64;
            assert!((est.beta_pooled[j] - mean).abs() < 1e-14);
        }
        let vcov = est.vcov.as_ref().unwrap();
        let eig = vcov.symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l > -1e-12));
        assert!(est.r_ef > 0.0 && est.r_ef <= 1.0);

        // Same seed, same estimate.
        let again = iterative(&data, 120, 200, 5, 0.5, &streams).unwrap();
        assert_eq!(est.beta_pooled, again.beta_pooled);
    }

    #[test]
    fn variance_diagnostics_single_row_and_optimality() {
        // One row, x = [1], eps = 1, tau = 0.5, uniform plan:
        // V = psi^2 x x' / (N^2 pi) = 0.25.
        let data = Dataset::new(vec![1.0], vec![1.0], 1).unwrap();
        let plan = pi_uniform(&data);
        let diag = variance_diagnostics(&data, &[0.0], 0.5, &plan, None).unwrap();
        assert!((diag.v_pi[(0, 0)] - 0.25).abs() < 1e-15);
        assert!(diag.sandwich.is_none());
    }

    #[test]
    fn lopt_plan_attains_the_explicit_variance_bound() {
        use rand::Rng;
        let mut rng = Streams::new(23).probe(2);
        let n = 30;
        let p = 2;
        let x: Vec<f64> = (0..n * p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let data = Dataset::new(x, y, p).unwrap();
        let beta = [0.4, -0.2];
        let tau = 0.75;
        let eps = sampling::residuals(&data, &beta).unwrap();
        let plan = pi_lopt(&data, &eps, tau).unwrap();
        let diag = variance_diagnostics(&data, &beta, tau, &plan, None).unwrap();
        assert!((diag.v_pi.trace() - diag.v_explicit.trace()).abs() < 1e-10);

        // Any other plan does no better.
        for _ in 0..20 {
            let mut probs: Vec<f64> =
                (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|v| *v /= total);
            let trace = v_pi_trace(&data, &beta, tau, &probs);
            assert!(trace >= diag.v_pi.trace() - 1e-12);
        }
    }

    // Test helper: tr(V_pi) for an arbitrary probability vector.
    fn v_pi_trace(data: &Dataset, beta: &[f64], tau: f64, probs: &[f64]) -> f64 {
        let eps = sampling::residuals(data, beta).unwrap();
        let n = data.n_rows() as f64;
        let mut trace = 0.0;
        for i in 0..data.n_rows() {
            let psi = tau - f64::from(eps[i] < 0.0);
            let norm_sq: f64 = data.row(i).iter().map(|v| v * v).sum();
            trace += psi * psi * norm_sq / (n * n * probs[i]);
        }
        trace
    }
}
