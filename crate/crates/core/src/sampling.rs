//! Subsampling plans: probability vectors over the full data, the alias
//! sampler that draws from them, and the effective-subsample-size ratio.
//!
//! Three informative plans are available besides uniform. All weight a row by
//! the magnitude of its score contribution at the pilot coefficients:
//!
//! * `Lopt`     — `pi_i ~ |tau - [eps_i < 0]| * |x_i|`, one O(Np) pass.
//! * `Aopt`     — `pi_i ~ |tau - [eps_i < 0]| * |D^-1 x_i|`, O(Np^2), needs a
//!   density-weighted Gram matrix estimate.
//! * `Universal` — `pi_i ~ |x_i|`, independent of the quantile level, useful
//!   when one plan must serve several levels at once.
//!
//! Rows with zero norm get probability zero: they carry no design
//! information. A plan errors out only if every row is degenerate.

use nalgebra::DMatrix;
use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    Uniform,
    Lopt,
    Aopt,
    Universal,
}

impl std::fmt::Display for SamplingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SamplingMethod::Uniform => "uniform",
            SamplingMethod::Lopt => "lopt",
            SamplingMethod::Aopt => "aopt",
            SamplingMethod::Universal => "universal",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for SamplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(SamplingMethod::Uniform),
            "lopt" => Ok(SamplingMethod::Lopt),
            "aopt" => Ok(SamplingMethod::Aopt),
            "universal" => Ok(SamplingMethod::Universal),
            other => Err(Error::InvalidSpec(format!(
                "unknown sampling method {other:?}"
            ))),
        }
    }
}

/// A normalized probability vector over the rows of the full data.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    pub method: SamplingMethod,
    pi: Vec<f64>,
    /// Pilot coefficients the residuals were computed at, when applicable.
    pub pilot_beta: Option<Vec<f64>>,
    /// Quantile level the plan targets; `None` for level-free plans.
    pub tau: Option<f64>,
}

impl SamplingPlan {
    /// Wrap an already-normalized probability vector. Fails when the vector
    /// is not a probability distribution to working precision.
    pub fn new(
        method: SamplingMethod,
        pi: Vec<f64>,
        pilot_beta: Option<Vec<f64>>,
        tau: Option<f64>,
    ) -> Result<Self> {
        let plan = Self { method, pi, pilot_beta, tau };
        plan.validate()?;
        Ok(plan)
    }

    fn from_scores(
        method: SamplingMethod,
        mut scores: Vec<f64>,
        pilot_beta: Option<Vec<f64>>,
        tau: Option<f64>,
    ) -> Result<Self> {
        let total: f64 = scores.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::DegenerateWeights(format!(
                "score total {total}; every row has zero design norm"
            )));
        }
        for s in scores.iter_mut() {
            *s /= total;
        }
        Ok(Self { method, pi: scores, pilot_beta, tau })
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn n_rows(&self) -> usize {
        self.pi.len()
    }

    pub fn sum_squares(&self) -> f64 {
        self.pi.iter().map(|p| p * p).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pi.is_empty() {
            return Err(Error::InvalidPlan("empty probability vector".into()));
        }
        let mut sum = 0.0;
        for &p in &self.pi {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidPlan(format!("probability {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-12 * self.pi.len() as f64 {
            return Err(Error::InvalidPlan(format!("probabilities sum to {sum}")));
        }
        Ok(())
    }
}

/// Residuals `eps_i = y_i - beta . x_i` over the full data.
pub fn residuals(data: &Dataset, beta: &[f64]) -> Result<Vec<f64>> {
    if beta.len() != data.n_cols() {
        return Err(Error::Shape(format!(
            "beta has length {}, design has {} columns",
            beta.len(),
            data.n_cols()
        )));
    }
    let mut out = Vec::with_capacity(data.n_rows());
    for i in 0..data.n_rows() {
        let dot: f64 = data.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
        out.push(data.y()[i] - dot);
    }
    Ok(out)
}

/// `|tau - [eps < 0]|` with the indicator read literally at zero.
#[inline]
fn score_magnitude(residual: f64, tau: f64) -> f64 {
    (tau - f64::from(residual < 0.0)).abs()
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidSpec(format!("tau must be in (0,1), got {tau}")));
    }
    Ok(())
}

fn check_residuals(data: &Dataset, residuals: &[f64]) -> Result<()> {
    if residuals.len() != data.n_rows() {
        return Err(Error::Shape(format!(
            "{} residuals for {} rows",
            residuals.len(),
            data.n_rows()
        )));
    }
    Ok(())
}

pub fn pi_uniform(data: &Dataset) -> SamplingPlan {
    let n = data.n_rows();
    SamplingPlan {
        method: SamplingMethod::Uniform,
        pi: vec![1.0 / n as f64; n],
        pilot_beta: None,
        tau: None,
    }
}

pub fn pi_lopt(data: &Dataset, residuals: &[f64], tau: f64) -> Result<SamplingPlan> {
    check_tau(tau)?;
    check_residuals(data, residuals)?;
    let scores: Vec<f64> = (0..data.n_rows())
        .map(|i| {
            let norm: f64 = data.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            score_magnitude(residuals[i], tau) * norm
        })
        .collect();
    SamplingPlan::from_scores(SamplingMethod::Lopt, scores, None, Some(tau))
}

pub fn pi_aopt(
    data: &Dataset,
    residuals: &[f64],
    tau: f64,
    dn: &DnEstimate,
) -> Result<SamplingPlan> {
    check_tau(tau)?;
    check_residuals(data, residuals)?;
    let inverse = dn.inverse()?;
    let p = data.n_cols();
    let mut transformed = vec![0.0f64; p];
    let scores: Vec<f64> = (0..data.n_rows())
        .map(|i| {
            let row = data.row(i);
            for (j, t) in transformed.iter_mut().enumerate() {
                let mut dot = 0.0;
                for (k, v) in row.iter().enumerate() {
                    dot += inverse[(j, k)] * v;
                }
                *t = dot;
            }
            let norm: f64 = transformed.iter().map(|v| v * v).sum::<f64>().sqrt();
            score_magnitude(residuals[i], tau) * norm
        })
        .collect();
    SamplingPlan::from_scores(SamplingMethod::Aopt, scores, None, Some(tau))
}

pub fn pi_universal(data: &Dataset) -> Result<SamplingPlan> {
    let scores: Vec<f64> = (0..data.n_rows())
        .map(|i| data.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    SamplingPlan::from_scores(SamplingMethod::Universal, scores, None, None)
}

/// Density-weighted Gram matrix estimate: the curvature proxy for the check
/// loss. `matrix = density_at_zero * (1/n0) * sum x_i x_i' / (N pi_i)` over a
/// pilot sample.
#[derive(Debug, Clone)]
pub struct DnEstimate {
    pub matrix: DMatrix<f64>,
    pub density_at_zero: f64,
    pub bandwidth: f64,
}

const CONDITION_LIMIT: f64 = 1e12;

impl DnEstimate {
    /// Inverse of the matrix, rejecting condition numbers above 1e12.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let svd = self.matrix.clone().svd(true, true);
        let max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let min = svd
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if !(max > 0.0) || min <= 0.0 || max / min >= CONDITION_LIMIT {
            return Err(Error::SingularDn);
        }
        self.matrix.clone().try_inverse().ok_or(Error::SingularDn)
    }
}

/// `(1/n) * sum x_i x_i' / (N pi_i)` over the sampled rows.
pub fn weighted_gram(
    data: &Dataset,
    indices: &[usize],
    pi_star: &[f64],
    n_total: usize,
) -> Result<DMatrix<f64>> {
    if indices.len() != pi_star.len() {
        return Err(Error::Shape(format!(
            "{} indices with {} probabilities",
            indices.len(),
            pi_star.len()
        )));
    }
    let p = data.n_cols();
    let n = indices.len();
    let mut gram = DMatrix::zeros(p, p);
    for (&i, &prob) in indices.iter().zip(pi_star) {
        if prob <= 0.0 {
            return Err(Error::InvalidPlan(format!(
                "sampled row {i} has probability {prob}"
            )));
        }
        let w = 1.0 / (n as f64 * n_total as f64 * prob);
        let row = data.row(i);
        for j in 0..p {
            for k in j..p {
                gram[(j, k)] += w * row[j] * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            gram[(j, k)] = gram[(k, j)];
        }
    }
    Ok(gram)
}

fn standard_normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn sample_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Estimate the density-weighted Gram matrix from a pilot sample.
///
/// The residual density at zero comes from a Gaussian kernel estimate with
/// Silverman bandwidth `0.9 * min(sd, IQR/1.34) * n0^(-1/5)`; when one of the
/// two spread measures collapses to zero the other is used.
pub fn estimate_dn(
    data: &Dataset,
    indices: &[usize],
    pilot_residuals: &[f64],
    pilot_pi_star: &[f64],
    n_total: usize,
) -> Result<DnEstimate> {
    let n0 = indices.len();
    let p = data.n_cols();
    if n0 < p + 1 {
        return Err(Error::DegeneratePilot(format!(
            "pilot size {n0} below p + 1 = {}",
            p + 1
        )));
    }
    if pilot_residuals.len() != n0 {
        return Err(Error::Shape(format!(
            "{} residuals for pilot of size {n0}",
            pilot_residuals.len()
        )));
    }

    let mean = pilot_residuals.iter().sum::<f64>() / n0 as f64;
    let var = pilot_residuals
        .iter()
        .map(|r| (r - mean) * (r - mean))
        .sum::<f64>()
        / (n0 - 1) as f64;
    let sd = var.sqrt();
    let mut sorted = pilot_residuals.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let iqr = sample_quantile(&sorted, 0.75) - sample_quantile(&sorted, 0.25);

    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => {
            return Err(Error::DegeneratePilot(
                "pilot residuals have zero variance".into(),
            ))
        }
    };
    let bandwidth = 0.9 * spread * (n0 as f64).powf(-0.2);
    let density_at_zero = pilot_residuals
        .iter()
        .map(|r| standard_normal_pdf(r / bandwidth))
        .sum::<f64>()
        / (n0 as f64 * bandwidth);

    // weighted_gram folds in 1/(n0 N pi); the display here wants 1/n0 and
    // 1/(N pi), i.e. the same thing.
    let gram = weighted_gram(data, indices, pilot_pi_star, n_total)?;
    Ok(DnEstimate {
        matrix: gram * density_at_zero,
        density_at_zero,
        bandwidth,
    })
}

/// Constant-time sampler over a fixed discrete distribution (alias method).
/// Build is O(N); each draw costs one uniform index plus one comparison.
/// Immutable after construction, so batches may sample concurrently as long
/// as each owns its RNG.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    pub fn new(pi: &[f64]) -> Result<Self> {
        let n = pi.len();
        if n == 0 {
            return Err(Error::InvalidPlan("empty probability vector".into()));
        }
        let total: f64 = pi.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::InvalidPlan(format!("probability total {total}")));
        }
        let mut scaled: Vec<f64> = pi.iter().map(|p| p * n as f64 / total).collect();
        if scaled.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidPlan("negative or non-finite probability".into()));
        }
        let mut prob = vec![1.0f64; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small: Vec<usize> = Vec::new();
        let mut large: Vec<usize> = Vec::new();
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&l), Some(&g)) = (small.last(), large.last()) {
            small.pop();
            prob[l] = scaled[l];
            alias[l] = g;
            scaled[g] = (scaled[g] + scaled[l]) - 1.0;
            if scaled[g] < 1.0 {
                large.pop();
                small.push(g);
            }
        }
        // Anything left over is 1.0 up to rounding.
        Ok(Self { prob, alias })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let k = rng.random_range(0..self.prob.len());
        let u: f64 = rng.random();
        if u < self.prob[k] {
            k
        } else {
            self.alias[k]
        }
    }
}

/// Draw `n` row indices i.i.d. from the plan.
pub fn draw(plan: &SamplingPlan, n: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidPlan("cannot draw an empty subsample".into()));
    }
    plan.validate()?;
    let table = AliasTable::new(plan.pi())?;
    Ok((0..n).map(|_| table.sample(rng)).collect())
}

/// Effective-subsample-size ratio `1 - ((nB-1)/2) * sum pi_i^2`.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveRatio {
    /// Raw value clamped into (0, 1]; the floor is `1/(nB)`, the ratio of a
    /// single distinct observation.
    pub value: f64,
    pub raw: f64,
}

pub fn effective_ratio(pi: &[f64], n: usize, b: usize) -> EffectiveRatio {
    let draws = n as f64 * b as f64;
    debug_assert!(draws >= 1.0, "effective_ratio requires nB >= 1");
    let sum_sq: f64 = pi.iter().map(|p| p * p).sum();
    let raw = 1.0 - (draws - 1.0) / 2.0 * sum_sq;
    let value = if raw <= 0.0 {
        log::warn!(
            "effective subsample ratio {raw:.3e} is non-positive (nB = {draws}); \
             clamping to 1/(nB)"
        );
        1.0 / draws
    } else {
        raw.min(1.0)
    };
    EffectiveRatio { value, raw }
}
