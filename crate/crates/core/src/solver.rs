//! Weighted quantile-regression solver.
//!
//! Minimizes `sum_i w_i * rho_tau(y_i - x_i . beta)` where `rho_tau` is the
//! check loss. The returned minimizer carries a certificate of approximate
//! optimality based on the subgradient condition, so callers never need to
//! trust the iteration count alone.
//!
//! The algorithm has three phases:
//! 1. a majorize-minimize iteration that replaces `|r|` with the quadratic
//!    `r^2 / (2 max(|r|, delta))`, with `delta` shrinking toward a floor of
//!    `1e-10 * scale(y)`;
//! 2. a polish step that identifies the `p` near-active observations, fits
//!    them exactly, and walks edge-descent pivots between exact-fit vertices
//!    until no edge direction decreases the objective;
//! 3. a subgradient certificate: choosing valid subgradient values on the
//!    zero residuals, the weighted score must vanish up to
//!    `tol * max_i(w_i * |x_i|_inf)`.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Check loss `u * (tau - [u < 0])`. Nonnegative and piecewise linear in `u`.
pub fn check_loss(u: f64, tau: f64) -> f64 {
    u * (tau - f64::from(u < 0.0))
}

/// A weighted quantile-regression problem on a (sub)sample.
#[derive(Debug, Clone)]
pub struct WeightedProblem {
    x: Vec<f64>, // n x p, row-major
    y: Vec<f64>,
    weights: Vec<f64>,
    n: usize,
    p: usize,
    tau: f64,
}

impl WeightedProblem {
    pub fn new(x: Vec<f64>, y: Vec<f64>, weights: Vec<f64>, p: usize, tau: f64) -> Result<Self> {
        let n = y.len();
        if n == 0 || p == 0 {
            return Err(Error::Shape("problem must have n >= 1 and p >= 1".into()));
        }
        if x.len() != n * p {
            return Err(Error::Shape(format!(
                "design has {} entries, expected {n} x {p}",
                x.len()
            )));
        }
        if weights.len() != n {
            return Err(Error::Shape(format!(
                "{} weights for {n} observations",
                weights.len()
            )));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidSpec(format!("tau must be in (0,1), got {tau}")));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w <= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "weights must be finite and positive, got {w}"
            )));
        }
        if let Some(v) = x.iter().chain(y.iter()).find(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite entry {v} in problem")));
        }
        Ok(Self { x, y, weights, n, p, tau })
    }

    /// Assemble the weighted problem for a with-replacement subsample.
    pub fn from_subsample(
        data: &Dataset,
        indices: &[usize],
        weights: Vec<f64>,
        tau: f64,
    ) -> Result<Self> {
        let p = data.n_cols();
        let mut x = Vec::with_capacity(indices.len() * p);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= data.n_rows() {
                return Err(Error::Shape(format!(
                    "subsample index {i} out of range for {} rows",
                    data.n_rows()
                )));
            }
            x.extend_from_slice(data.row(i));
            y.push(data.y()[i]);
        }
        Self::new(x, y, weights, p, tau)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// Weighted check-loss objective at `beta`.
    pub fn objective(&self, beta: &[f64]) -> Result<f64> {
        if beta.len() != self.p {
            return Err(Error::Shape(format!(
                "beta has length {}, expected {}",
                beta.len(),
                self.p
            )));
        }
        let mut total = 0.0;
        for i in 0..self.n {
            total += self.weights[i] * check_loss(self.residual(i, beta), self.tau);
        }
        Ok(total)
    }

    fn residual(&self, i: usize, beta: &[f64]) -> f64 {
        let row = self.row(i);
        let mut dot = 0.0;
        for (a, b) in row.iter().zip(beta) {
            dot += a * b;
        }
        self.y[i] - dot
    }

    fn residuals(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.residual(i, beta)).collect()
    }
}

/// Fitted coefficients with convergence metadata. `objective` is recomputed
/// at `beta` on the way out, never carried from intermediate iterations.
#[derive(Debug, Clone)]
pub struct QuantileFit {
    pub beta: Vec<f64>,
    pub tau: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best certified infinity-norm of the weighted subgradient.
    pub subgradient_norm: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Relative optimality tolerance; also scales the subgradient certificate.
    pub tol: f64,
    /// Cap on majorize-minimize iterations plus polish pivots.
    pub max_iter: usize,
    /// Starting point; weighted least squares when absent.
    pub init: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200, init: None }
    }
}

const RANK_TOL: f64 = 1e-10;

/// Minimize the weighted check loss.
///
/// Requires full column rank on the support of the weights (all weights are
/// positive, so on the whole design) and `n >= p`. Non-convergence is not an
/// error: the best iterate comes back with `converged = false`.
pub fn solve(problem: &WeightedProblem, opts: &SolveOptions) -> Result<QuantileFit> {
    let n = problem.n;
    let p = problem.p;
    if n < p {
        return Err(Error::RankDeficient);
    }
    check_rank(problem)?;

    let max_abs_y = problem.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale_y = if max_abs_y > 0.0 { max_abs_y } else { 1.0 };
    let delta_floor = 1e-10 * scale_y;

    let mut beta = match &opts.init {
        Some(b) => {
            if b.len() != p {
                return Err(Error::Shape(format!(
                    "init has length {}, expected {p}",
                    b.len()
                )));
            }
            b.clone()
        }
        None => weighted_least_squares(problem)?,
    };
    let mut best_obj = problem.objective(&beta)?;
    let mut iterations = 0usize;

    // Majorize-minimize with a shrinking smoothing parameter.
    let mut delta = (1e-2 * scale_y).max(delta_floor);
    let mut stage_obj = best_obj;
    while iterations < opts.max_iter {
        let next = mm_step(problem, &beta, delta);
        iterations += 1;
        let Some(next) = next else { break };
        let obj = problem.objective(&next)?;
        if obj <= best_obj {
            best_obj = obj;
            beta = next;
        }
        let stalled = (stage_obj - obj).abs() <= 1e-9 * (1.0 + obj.abs());
        stage_obj = obj;
        if stalled {
            if delta <= delta_floor {
                break;
            }
            delta = (delta * 1e-2).max(delta_floor);
        }
    }

    // Polish: snap to an exact-fit vertex and pivot downhill until optimal.
    let pivot_budget = 200 + 4 * p;
    if let Some((polished, pivots)) = polish(problem, &beta, delta_floor, pivot_budget) {
        iterations += pivots;
        if problem.objective(&polished)? <= best_obj {
            beta = polished;
        }
    }

    let subgradient_norm = certify(problem, &beta, delta_floor);
    let threshold = certificate_threshold(problem, opts.tol);
    let objective = problem.objective(&beta)?;
    Ok(QuantileFit {
        beta,
        tau: problem.tau,
        objective,
        iterations,
        converged: subgradient_norm <= threshold,
        subgradient_norm,
    })
}

/// `tol * max_i(w_i * |x_i|_inf)`: the scale against which the subgradient
/// norm is judged.
pub fn certificate_threshold(problem: &WeightedProblem, tol: f64) -> f64 {
    let mut scale = 0.0f64;
    for i in 0..problem.n {
        let row_inf = problem.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        scale = scale.max(problem.weights[i] * row_inf);
    }
    tol * scale
}

fn check_rank(problem: &WeightedProblem) -> Result<()> {
    let mut scaled = DMatrix::zeros(problem.n, problem.p);
    for i in 0..problem.n {
        let s = problem.weights[i].sqrt();
        for (j, v) in problem.row(i).iter().enumerate() {
            scaled[(i, j)] = s * v;
        }
    }
    let sv = scaled.singular_values();
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max <= 0.0 || min < RANK_TOL * max {
        return Err(Error::RankDeficient);
    }
    Ok(())
}

fn weighted_least_squares(problem: &WeightedProblem) -> Result<Vec<f64>> {
    let p = problem.p;
    let mut a = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    for i in 0..problem.n {
        let w = problem.weights[i];
        let row = problem.row(i);
        for j in 0..p {
            b[j] += w * row[j] * problem.y[i];
            for k in j..p {
                a[(j, k)] += w * row[j] * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[(j, k)] = a[(k, j)];
        }
    }
    solve_spd(&a, &b).ok_or(Error::RankDeficient)
}

fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<Vec<f64>> {
    if let Some(chol) = nalgebra::Cholesky::new(a.clone()) {
        return Some(chol.solve(b).iter().cloned().collect());
    }
    let solved = a.clone().svd(true, true).solve(b, 1e-14).ok()?;
    let out: Vec<f64> = solved.iter().cloned().collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// One majorize-minimize step: weighted least squares with per-residual
/// weights `w_i / (2 max(|r_i|, delta))` plus the linear `tau - 1/2` tilt.
fn mm_step(problem: &WeightedProblem, beta: &[f64], delta: f64) -> Option<Vec<f64>> {
    let p = problem.p;
    let tilt = problem.tau - 0.5;
    let mut a = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    for i in 0..problem.n {
        let w = problem.weights[i];
        let r = problem.residual(i, beta);
        let c = w / (2.0 * r.abs().max(delta));
        let row = problem.row(i);
        for j in 0..p {
            b[j] += c * row[j] * problem.y[i] + tilt * w * row[j];
            for k in j..p {
                a[(j, k)] += c * row[j] * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[(j, k)] = a[(k, j)];
        }
    }
    solve_spd(&a, &b)
}

/// Greedily pick `p` linearly independent rows in order of |residual|.
fn select_basis(problem: &WeightedProblem, residuals: &[f64]) -> Option<Vec<usize>> {
    let p = problem.p;
    let mut order: Vec<usize> = (0..problem.n).collect();
    order.sort_unstable_by(|&a, &b| {
        residuals[a]
            .abs()
            .total_cmp(&residuals[b].abs())
            .then(a.cmp(&b))
    });
    let mut basis = Vec::with_capacity(p);
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(p);
    for i in order {
        let row = problem.row(i);
        let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let mut u: Vec<f64> = row.to_vec();
        for q in &ortho {
            let dot: f64 = q.iter().zip(&u).map(|(a, b)| a * b).sum();
            for (uv, qv) in u.iter_mut().zip(q) {
                *uv -= dot * qv;
            }
        }
        let residual_norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if residual_norm > 1e-12 * norm {
            for v in u.iter_mut() {
                *v /= residual_norm;
            }
            ortho.push(u);
            basis.push(i);
            if basis.len() == p {
                return Some(basis);
            }
        }
    }
    None
}

fn exact_fit(problem: &WeightedProblem, basis: &[usize]) -> Option<Vec<f64>> {
    let p = problem.p;
    let mut xb = DMatrix::zeros(p, p);
    let mut yb = DVector::zeros(p);
    for (k, &i) in basis.iter().enumerate() {
        for (j, v) in problem.row(i).iter().enumerate() {
            xb[(k, j)] = *v;
        }
        yb[k] = problem.y[i];
    }
    let solved = xb.lu().solve(&yb)?;
    let out: Vec<f64> = solved.iter().cloned().collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Edge-descent polish. Starting from the exact fit of the near-active rows,
/// repeatedly move along the steepest descending edge (relax one basis row,
/// step to the next residual zero crossing) until no edge descends. Returns
/// the polished point and the number of pivots taken.
///
/// Rows with |residual| <= `zero_tol` are treated as already crossed: they
/// resist movement in either direction, which never overstates descent.
fn polish(
    problem: &WeightedProblem,
    beta: &[f64],
    zero_tol: f64,
    max_pivots: usize,
) -> Option<(Vec<f64>, usize)> {
    let n = problem.n;
    let p = problem.p;
    let tau = problem.tau;
    let w = &problem.weights;

    let mut basis = select_basis(problem, &problem.residuals(beta))?;
    let mut best = exact_fit(problem, &basis)?;
    let mut pivots = 0usize;

    while pivots < max_pivots {
        let residuals = problem.residuals(&best);

        // Inverse of the basis matrix gives the p edge directions.
        let mut xb = DMatrix::zeros(p, p);
        for (k, &i) in basis.iter().enumerate() {
            for (j, v) in problem.row(i).iter().enumerate() {
                xb[(k, j)] = *v;
            }
        }
        let inv = xb.try_inverse()?;

        // Directional slope of the objective along +/- each edge.
        let mut best_dir: Option<(usize, f64, f64)> = None; // (k, sign, relative slope)
        let mut step = vec![0.0f64; n];
        for k in 0..p {
            for (i, s) in step.iter_mut().enumerate() {
                let mut dot = 0.0;
                for (j, v) in problem.row(i).iter().enumerate() {
                    dot += v * inv[(j, k)];
                }
                *s = dot;
            }
            let slope_scale: f64 = (0..n).map(|i| w[i] * step[i].abs()).sum();
            if slope_scale == 0.0 {
                continue;
            }
            for sign in [1.0f64, -1.0] {
                let mut slope = 0.0;
                for i in 0..n {
                    let s = sign * step[i];
                    if s == 0.0 {
                        continue;
                    }
                    if residuals[i].abs() <= zero_tol {
                        slope += w[i] * if s > 0.0 { (1.0 - tau) * s } else { -tau * s };
                    } else {
                        let psi = tau - f64::from(residuals[i] < 0.0);
                        slope -= w[i] * psi * s;
                    }
                }
                let relative = slope / slope_scale;
                if relative < -1e-12 && best_dir.is_none_or(|(_, _, s0)| relative < s0) {
                    best_dir = Some((k, sign, relative));
                }
            }
        }

        let Some((k, sign, _)) = best_dir else {
            return Some((best, pivots));
        };

        // Ratio test: step to the nearest residual zero crossing.
        let mut entering: Option<(usize, f64)> = None;
        for i in 0..n {
            if basis.contains(&i) || residuals[i].abs() <= zero_tol {
                continue;
            }
            let mut s = 0.0;
            for (j, v) in problem.row(i).iter().enumerate() {
                s += v * sign * inv[(j, k)];
            }
            if s == 0.0 {
                continue;
            }
            let t = residuals[i] / s;
            if t > 0.0 && entering.is_none_or(|(_, tb)| t < tb) {
                entering = Some((i, t));
            }
        }
        // A bounded-below objective always produces a crossing.
        let Some((enter, _)) = entering else {
            return Some((best, pivots));
        };
        basis[k] = enter;
        best = exact_fit(problem, &basis)?;
        pivots += 1;
    }
    Some((best, pivots))
}

/// Subgradient certificate. For rows off zero residual the subgradient is
/// fixed at `psi = tau - [r < 0]`; on zero residuals any value in
/// `[tau - 1, tau]` is valid, so pick values (box-constrained least squares)
/// that come closest to cancelling the fixed part and report the remaining
/// infinity norm.
fn certify(problem: &WeightedProblem, beta: &[f64], zero_tol: f64) -> f64 {
    let p = problem.p;
    let tau = problem.tau;
    let mut fixed = vec![0.0f64; p];
    let mut zero_rows: Vec<usize> = Vec::new();
    for i in 0..problem.n {
        let r = problem.residual(i, beta);
        if r.abs() <= zero_tol {
            zero_rows.push(i);
        } else {
            let psi = tau - f64::from(r < 0.0);
            for (g, v) in fixed.iter_mut().zip(problem.row(i)) {
                *g += problem.weights[i] * psi * v;
            }
        }
    }
    if zero_rows.is_empty() {
        return fixed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }

    let z = zero_rows.len();
    let m = DMatrix::from_fn(p, z, |j, c| {
        problem.weights[zero_rows[c]] * problem.row(zero_rows[c])[j]
    });
    let g = DVector::from_column_slice(&fixed);

    // Least-squares start, then clamped coordinate descent on |g + M v|^2.
    let lo = tau - 1.0;
    let hi = tau;
    let mut v = match m.clone().svd(true, true).solve(&(-&g), 1e-12) {
        Ok(sol) => sol.iter().map(|x| x.clamp(lo, hi)).collect::<Vec<f64>>(),
        Err(_) => vec![0.0; z],
    };
    let mut t = g.clone();
    for (c, vc) in v.iter().enumerate() {
        for j in 0..p {
            t[j] += m[(j, c)] * vc;
        }
    }
    for _ in 0..200 {
        let mut moved = 0.0f64;
        for c in 0..z {
            let mut num = 0.0;
            let mut den = 0.0;
            for j in 0..p {
                num += m[(j, c)] * t[j];
                den += m[(j, c)] * m[(j, c)];
            }
            if den == 0.0 {
                continue;
            }
            let new_v = (v[c] - num / den).clamp(lo, hi);
            let dv = new_v - v[c];
            if dv != 0.0 {
                for j in 0..p {
                    t[j] += m[(j, c)] * dv;
                }
                moved = moved.max(dv.abs());
                v[c] = new_v;
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    t.iter().fold(0.0f64, |m_, x| m_.max(x.abs()))
}
