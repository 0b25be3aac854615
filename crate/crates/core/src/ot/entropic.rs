//! Entropy-regularized transport via Sinkhorn scaling.
//!
//! Minimizes `<gamma, C> - (1/lambda) E(gamma)` over the coupling polytope
//! by alternately rescaling the kernel `K = exp(-lambda * C)`. When
//! `lambda * max(C)` is large the kernel underflows, so the iteration
//! switches to log-domain updates on the dual potentials; the scaling
//! variant also falls back to the log domain if a scaling vector stops
//! being finite mid-run.

use ndarray::{Array1, Array2};

use crate::data::{CostMatrix, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::ot::{entropy, Coupling, SolverReport, ITERATIVE_MARGINAL_TOL};

/// Cost regime above which the scaling iteration is skipped entirely in
/// favor of log-domain updates.
const LOG_DOMAIN_THRESHOLD: f64 = 500.0;

/// Stopping rule and cost handling for the Sinkhorn iteration.
#[derive(Debug, Clone)]
pub struct SinkhornParams {
    /// Stop once the L-infinity marginal violation drops below this.
    pub tolerance: f64,
    /// Hard iteration cap; the report carries `converged = false` when hit.
    pub max_iterations: usize,
    /// Divide the cost matrix by its maximum before solving. Off by
    /// default: rescaling the cost changes the optimization problem.
    pub normalize_cost: bool,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iterations: 10_000, normalize_cost: false }
    }
}

/// Entropic optimal transport with default parameters (tolerance 1e-9,
/// at most 10,000 iterations).
pub fn solve_entropic(
    mu_s: &EmpiricalMeasure,
    mu_t: &EmpiricalMeasure,
    c: &CostMatrix,
    lambda: f64,
) -> Result<(Coupling, SolverReport)> {
    solve_entropic_with(mu_s, mu_t, c, lambda, &SinkhornParams::default())
}

pub fn solve_entropic_with(
    mu_s: &EmpiricalMeasure,
    mu_t: &EmpiricalMeasure,
    c: &CostMatrix,
    lambda: f64,
    params: &SinkhornParams,
) -> Result<(Coupling, SolverReport)> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "lambda must be positive and finite, got {}",
            lambda
        )));
    }
    if mu_s.len() != c.n_rows() || mu_t.len() != c.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "cost is {}x{} but measures have {} and {} points",
            c.n_rows(),
            c.n_cols(),
            mu_s.len(),
            mu_t.len()
        )));
    }

    let max_c = c.max_value();
    let cost = if params.normalize_cost && max_c > 0.0 {
        c.values().mapv(|v| v / max_c)
    } else {
        c.values().clone()
    };
    let effective_max = if params.normalize_cost && max_c > 0.0 { 1.0 } else { max_c };

    let a = mu_s.weights();
    let b = mu_t.weights();

    let run = if lambda * effective_max > LOG_DOMAIN_THRESHOLD {
        log_domain(a, b, &cost, lambda, params)?
    } else {
        match scaling_domain(a, b, &cost, lambda, params) {
            Some(run) => run,
            None => log_domain(a, b, &cost, lambda, params)?,
        }
    };

    finish(run, mu_s, mu_t, &cost, lambda)
}

struct SinkhornRun {
    plan: Array2<f64>,
    iterations: usize,
    converged: bool,
}

fn finish(
    mut run: SinkhornRun,
    mu_s: &EmpiricalMeasure,
    mu_t: &EmpiricalMeasure,
    cost: &Array2<f64>,
    lambda: f64,
) -> Result<(Coupling, SolverReport)> {
    if run.plan.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver(
            "sinkhorn produced non-finite coupling entries".into(),
        ));
    }
    if !run.converged {
        // Nearly decoupled kernels make the scaling iteration stall with a
        // small residual marginal error. Project the iterate exactly onto
        // the transport polytope; the plan moves by at most the residual.
        round_to_polytope(&mut run.plan, mu_s.as_slice(), mu_t.as_slice());
    }
    let transport: f64 = run
        .plan
        .iter()
        .zip(cost.iter())
        .map(|(&g, &c)| g * c)
        .sum();
    let objective = transport - entropy(&run.plan) / lambda;
    let coupling = Coupling::new(
        run.plan,
        mu_s.clone(),
        mu_t.clone(),
        ITERATIVE_MARGINAL_TOL,
    )?;
    let violation = coupling.max_marginal_violation();
    let report = SolverReport {
        iterations: run.iterations,
        final_marginal_violation: violation,
        objective,
        converged: run.converged,
        objective_trace: vec![objective],
    };
    Ok((coupling, report))
}

/// Classic matrix-scaling iteration. Returns `None` when a scaling vector
/// leaves the finite positive range, signalling the caller to redo the
/// solve in the log domain.
fn scaling_domain(
    a: &Array1<f64>,
    b: &Array1<f64>,
    cost: &Array2<f64>,
    lambda: f64,
    params: &SinkhornParams,
) -> Option<SinkhornRun> {
    let m = a.len();
    let n = b.len();
    let kernel = cost.mapv(|c| (-lambda * c).exp());
    let mut u: Array1<f64> = Array1::ones(m);
    let mut v: Array1<f64> = Array1::ones(n);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iterations {
        // Row marginals of diag(u) K diag(v) with the current iterates;
        // doubles as the convergence check and the next u update.
        let kv: Array1<f64> = kernel.dot(&v);
        let mut err = 0.0f64;
        for i in 0..m {
            err = err.max((u[i] * kv[i] - a[i]).abs());
        }
        if iterations > 0 && err < params.tolerance {
            converged = true;
            break;
        }

        for i in 0..m {
            u[i] = if a[i] == 0.0 { 0.0 } else { a[i] / kv[i] };
            if !u[i].is_finite() {
                return None;
            }
        }
        let ktu = kernel.t().dot(&u);
        for j in 0..n {
            v[j] = if b[j] == 0.0 { 0.0 } else { b[j] / ktu[j] };
            if !v[j].is_finite() {
                return None;
            }
        }
        iterations += 1;
    }

    let mut plan = Array2::zeros((m, n));
    for i in 0..m {
        for j in 0..n {
            plan[[i, j]] = u[i] * kernel[[i, j]] * v[j];
        }
    }
    if plan.iter().any(|p| !p.is_finite()) {
        return None;
    }
    Some(SinkhornRun { plan, iterations, converged })
}

/// Log-domain Sinkhorn: iterate the scaled duals
/// `logu_i = ln a_i - LSE_j(logv_j - lambda C_ij)` and symmetrically for
/// `logv`, recovering the plan as `exp(logu_i - lambda C_ij + logv_j)`.
fn log_domain(
    a: &Array1<f64>,
    b: &Array1<f64>,
    cost: &Array2<f64>,
    lambda: f64,
    params: &SinkhornParams,
) -> Result<SinkhornRun> {
    let m = a.len();
    let n = b.len();
    let log_a: Vec<f64> = a.iter().map(|&x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY }).collect();
    let log_b: Vec<f64> = b.iter().map(|&x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY }).collect();

    let mut log_u = vec![0.0f64; m];
    let mut log_v = vec![0.0f64; n];
    let mut row_lse = vec![0.0f64; m];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iterations {
        for i in 0..m {
            row_lse[i] = logsumexp_by(n, |j| log_v[j] - lambda * cost[[i, j]]);
        }
        if iterations > 0 {
            let mut err = 0.0f64;
            for i in 0..m {
                let row_sum = (log_u[i] + row_lse[i]).exp();
                err = err.max((row_sum - a[i]).abs());
            }
            if err < params.tolerance {
                converged = true;
                break;
            }
        }

        for i in 0..m {
            log_u[i] = if log_a[i] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                let value = log_a[i] - row_lse[i];
                if value.is_nan() {
                    return Err(Error::Solver(
                        "log-domain sinkhorn lost a finite row potential".into(),
                    ));
                }
                value
            };
        }
        for j in 0..n {
            log_v[j] = if log_b[j] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                let lse = logsumexp_by(m, |i| log_u[i] - lambda * cost[[i, j]]);
                let value = log_b[j] - lse;
                if value.is_nan() {
                    return Err(Error::Solver(
                        "log-domain sinkhorn lost a finite column potential".into(),
                    ));
                }
                value
            };
        }
        iterations += 1;
    }

    let mut plan = Array2::zeros((m, n));
    for i in 0..m {
        for j in 0..n {
            let log_p = log_u[i] + log_v[j] - lambda * cost[[i, j]];
            plan[[i, j]] = if log_p == f64::NEG_INFINITY { 0.0 } else { log_p.exp() };
        }
    }
    Ok(SinkhornRun { plan, iterations, converged })
}

/// Project a non-negative matrix onto the transport polytope of (a, b):
/// cap row sums at a, then column sums at b, then spread the leftover mass
/// as a rank-one outer product of the deficits. Marginals come out exact
/// to float accumulation and entries move by at most the original
/// violation.
fn round_to_polytope(plan: &mut Array2<f64>, a: &[f64], b: &[f64]) {
    let (m, n) = (plan.nrows(), plan.ncols());
    for i in 0..m {
        let sum: f64 = plan.row(i).sum();
        if sum > a[i] && sum > 0.0 {
            let scale = a[i] / sum;
            for j in 0..n {
                plan[[i, j]] *= scale;
            }
        }
    }
    for j in 0..n {
        let sum: f64 = plan.column(j).sum();
        if sum > b[j] && sum > 0.0 {
            let scale = b[j] / sum;
            for i in 0..m {
                plan[[i, j]] *= scale;
            }
        }
    }
    let deficit_a: Vec<f64> = (0..m).map(|i| (a[i] - plan.row(i).sum()).max(0.0)).collect();
    let deficit_b: Vec<f64> = (0..n).map(|j| (b[j] - plan.column(j).sum()).max(0.0)).collect();
    let total: f64 = deficit_a.iter().sum();
    if total > 0.0 {
        for i in 0..m {
            if deficit_a[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                plan[[i, j]] += deficit_a[i] * deficit_b[j] / total;
            }
        }
    }
}

/// Numerically stable log(sum_i exp(x_i)); -inf for an empty or all -inf
/// family.
fn logsumexp_by(len: usize, f: impl Fn(usize) -> f64) -> f64 {
    let mut max_val = f64::NEG_INFINITY;
    for i in 0..len {
        let v = f(i);
        if v > max_val {
            max_val = v;
        }
    }
    if max_val == f64::NEG_INFINITY || !max_val.is_finite() {
        return max_val;
    }
    let mut sum = 0.0;
    for i in 0..len {
        sum += (f(i) - max_val).exp();
    }
    max_val + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn uniform(n: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(n).unwrap()
    }

    #[test]
    fn zero_cost_gives_outer_product() {
        let c = CostMatrix::new(Array2::zeros((3, 4))).unwrap();
        let mu_s = EmpiricalMeasure::new(vec![0.2, 0.3, 0.5]).unwrap();
        let mu_t = uniform(4);
        let (gamma, report) = solve_entropic(&mu_s, &mu_t, &c, 3.0).unwrap();
        assert!(report.converged);
        for i in 0..3 {
            for j in 0..4 {
                let expected = mu_s.as_slice()[i] * 0.25;
                assert!((gamma.values()[[i, j]] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tiny_lambda_approaches_outer_product() {
        let c = CostMatrix::new(array![
            [0.3, 1.2, 0.8],
            [0.5, 0.1, 1.9],
            [1.4, 0.6, 0.2],
        ])
        .unwrap();
        let (gamma, report) = solve_entropic(&uniform(3), &uniform(3), &c, 1e-6).unwrap();
        assert!(report.converged);
        for &g in gamma.values() {
            assert!((g - 1.0 / 9.0).abs() < 1e-4);
        }
    }

    #[test]
    fn large_lambda_uses_log_domain_without_nan() {
        let c = CostMatrix::new(array![[0.0, 4.0], [4.0, 0.0]]).unwrap();
        // lambda * max(C) = 4000 would underflow exp(-lambda c) badly.
        let (gamma, report) = solve_entropic(&uniform(2), &uniform(2), &c, 1000.0).unwrap();
        assert!(report.converged);
        assert!((gamma.values()[[0, 0]] - 0.5).abs() < 1e-6);
        assert!(gamma.values()[[0, 1]] < 1e-9);
    }

    #[test]
    fn marginals_match_within_tolerance() {
        let c = CostMatrix::new(array![
            [0.11, 0.92, 0.31],
            [0.57, 0.24, 0.76],
            [0.44, 0.68, 0.05],
            [0.83, 0.17, 0.39],
        ])
        .unwrap();
        let mu_s = EmpiricalMeasure::new(vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        let mu_t = EmpiricalMeasure::new(vec![0.25, 0.5, 0.25]).unwrap();
        let (gamma, report) = solve_entropic(&mu_s, &mu_t, &c, 8.0).unwrap();
        assert!(report.converged);
        assert!(gamma.max_marginal_violation() <= 1e-9);
        assert_eq!(report.final_marginal_violation, gamma.max_marginal_violation());
    }

    #[test]
    fn rejects_non_positive_lambda() {
        let c = CostMatrix::new(array![[0.0]]).unwrap();
        assert!(solve_entropic(&uniform(1), &uniform(1), &c, 0.0).is_err());
        assert!(solve_entropic(&uniform(1), &uniform(1), &c, -1.0).is_err());
    }

    #[test]
    fn cost_normalization_flag_rescales_problem() {
        let c = CostMatrix::new(array![[0.0, 800.0], [800.0, 0.0]]).unwrap();
        let params = SinkhornParams { normalize_cost: true, ..Default::default() };
        let (gamma, report) =
            solve_entropic_with(&uniform(2), &uniform(2), &c, 5.0, &params).unwrap();
        assert!(report.converged);
        // Normalized cost is 0/1, so lambda=5 still prefers the diagonal.
        assert!(gamma.values()[[0, 0]] > 0.49);
    }
}
