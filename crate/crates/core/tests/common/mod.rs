//! Shared test support: an exact oracle for small weighted quantile
//! regressions and random problem generators.
//!
//! The oracle exploits the linear-programming structure of check-loss
//! minimization: with a full-rank design, some minimizer interpolates `p`
//! observations exactly, so enumerating every invertible `p`-subset and
//! scoring its exact fit finds the global optimum. It shares no code with
//! the production solver.

use nalgebra::{DMatrix, DVector};
use qrs_core::solver::WeightedProblem;

/// Global minimum of the weighted check loss by exhaustive enumeration of
/// exact fits over `p`-subsets. Only sensible for small `n` and `p`.
pub fn oracle_minimum(problem: &WeightedProblem) -> f64 {
    let n = problem.n();
    let p = problem.p();
    assert!(n <= 60 && p <= 4, "oracle is exponential, keep instances small");

    let mut best = f64::INFINITY;
    let mut subset: Vec<usize> = (0..p).collect();
    loop {
        if let Some(beta) = try_exact_fit(problem, &subset) {
            let obj = problem.objective(&beta).unwrap();
            if obj < best {
                best = obj;
            }
        }
        if !advance(&mut subset, n) {
            break;
        }
    }
    assert!(best.is_finite(), "no invertible subset found");
    best
}

fn try_exact_fit(problem: &WeightedProblem, subset: &[usize]) -> Option<Vec<f64>> {
    let p = problem.p();
    let mut xb = DMatrix::zeros(p, p);
    let mut yb = DVector::zeros(p);
    for (k, &i) in subset.iter().enumerate() {
        for (j, v) in problem.row(i).iter().enumerate() {
            xb[(k, j)] = *v;
        }
        yb[k] = problem.y()[i];
    }
    let beta = xb.clone().lu().solve(&yb)?;
    if beta.iter().any(|v| !v.is_finite()) {
        return None;
    }
    // Reject numerically unreliable subsets: the fit must reproduce its own
    // interpolation conditions.
    let reproduced = &xb * &beta;
    let scale = yb.amax().max(1.0);
    for k in 0..p {
        if (reproduced[k] - yb[k]).abs() > 1e-9 * scale {
            return None;
        }
    }
    Some(beta.iter().cloned().collect())
}

/// Advance a lexicographic combination; false when exhausted.
fn advance(subset: &mut [usize], n: usize) -> bool {
    let p = subset.len();
    let mut i = p;
    while i > 0 {
        i -= 1;
        if subset[i] != i + n - p {
            subset[i] += 1;
            for j in i + 1..p {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Random dense problem with positive weights.
pub fn random_problem(
    rng: &mut impl rand::Rng,
    n: usize,
    p: usize,
    tau: f64,
) -> WeightedProblem {
    let x: Vec<f64> = (0..n * p).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let w: Vec<f64> = (0..n).map(|_| 0.1 + rng.random::<f64>()).collect();
    WeightedProblem::new(x, y, w, p, tau).unwrap()
}
