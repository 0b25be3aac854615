//! Class-regularized transport: entropic objective plus the group penalty
//! `Omega(gamma) = sum_j sum_L ||gamma(I_L, j)||_1^(1/2)` that discourages
//! mass from several source classes landing on one target point.
//!
//! The penalty is concave in the per-class column masses, so it is
//! minimized by majorization-minimization: linearize `Omega` at the
//! previous plan, fold the linearization into the cost matrix and re-run
//! the entropic solver. Each outer step cannot increase the true
//! objective (up to the inner solver tolerance).

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::data::{CostMatrix, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::ot::{entropy, solve_entropic_with, Coupling, SinkhornParams, SolverReport};

/// Smoothing constant inside the square root of the linearization weights.
const GROUP_MASS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ClassRegParams {
    /// Majorization-minimization outer steps.
    pub outer_iterations: usize,
    /// Parameters for the inner entropic solves.
    pub sinkhorn: SinkhornParams,
}

impl Default for ClassRegParams {
    fn default() -> Self {
        Self { outer_iterations: 10, sinkhorn: SinkhornParams::default() }
    }
}

/// Class-regularized transport with default parameters (10 outer steps).
pub fn solve_class_regularized(
    mu_s: &EmpiricalMeasure,
    mu_t: &EmpiricalMeasure,
    c: &CostMatrix,
    source_labels: &[i64],
    lambda: f64,
    eta: f64,
) -> Result<(Coupling, SolverReport)> {
    solve_class_regularized_with(
        mu_s,
        mu_t,
        c,
        source_labels,
        lambda,
        eta,
        &ClassRegParams::default(),
    )
}

pub fn solve_class_regularized_with(
    mu_s: &EmpiricalMeasure,
    mu_t: &EmpiricalMeasure,
    c: &CostMatrix,
    source_labels: &[i64],
    lambda: f64,
    eta: f64,
    params: &ClassRegParams,
) -> Result<(Coupling, SolverReport)> {
    if source_labels.len() != mu_s.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} source labels for {} source points",
            source_labels.len(),
            mu_s.len()
        )));
    }
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "eta must be non-negative and finite, got {}",
            eta
        )));
    }

    if eta == 0.0 {
        // The penalty is switched off; this is exactly the entropic problem.
        let (coupling, mut report) = solve_entropic_with(mu_s, mu_t, c, lambda, &params.sinkhorn)?;
        report.objective_trace = vec![report.objective];
        return Ok((coupling, report));
    }

    // Row indices per class, in first-appearance order of the labels.
    let mut classes: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &label) in source_labels.iter().enumerate() {
        classes.entry(label).or_default().push(i);
    }

    let objective = |plan: &Array2<f64>| -> f64 {
        let transport: f64 = plan.iter().zip(c.values().iter()).map(|(&g, &c)| g * c).sum();
        transport - entropy(plan) / lambda + eta * group_penalty(plan, &classes)
    };

    let (mut coupling, mut inner_report) =
        solve_entropic_with(mu_s, mu_t, c, lambda, &params.sinkhorn)?;
    let mut iterations = inner_report.iterations;
    let mut trace = vec![objective(coupling.values())];

    for _ in 0..params.outer_iterations {
        // Concave linearization of the penalty around the current plan:
        // adjusted cost C' = C + eta * G with
        // G_ij = 0.5 * (||gamma(I_L(i), j)||_1 + floor)^(-1/2).
        let mut adjusted = c.values().clone();
        for (_, members) in classes.iter() {
            for j in 0..coupling.n_cols() {
                let mass: f64 = members.iter().map(|&i| coupling.values()[[i, j]]).sum();
                let weight = 0.5 / (mass + GROUP_MASS_FLOOR).sqrt();
                for &i in members {
                    adjusted[[i, j]] += eta * weight;
                }
            }
        }
        let adjusted = CostMatrix::new(adjusted)?;
        let (next, report) = solve_entropic_with(mu_s, mu_t, &adjusted, lambda, &params.sinkhorn)?;
        iterations += report.iterations;
        coupling = next;
        inner_report = report;
        trace.push(objective(coupling.values()));
    }

    let final_objective = *trace.last().expect("trace is non-empty");
    let report = SolverReport {
        iterations,
        final_marginal_violation: inner_report.final_marginal_violation,
        objective: final_objective,
        converged: inner_report.converged,
        objective_trace: trace,
    };
    Ok((coupling, report))
}

/// `Omega(gamma)` evaluated by direct summation.
fn group_penalty(plan: &Array2<f64>, classes: &BTreeMap<i64, Vec<usize>>) -> f64 {
    let mut total = 0.0;
    for members in classes.values() {
        for j in 0..plan.ncols() {
            let mass: f64 = members.iter().map(|&i| plan[[i, j]]).sum();
            total += mass.max(0.0).sqrt();
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::solve_entropic;
    use ndarray::array;

    fn uniform(n: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(n).unwrap()
    }

    fn test_cost() -> CostMatrix {
        CostMatrix::new(array![
            [0.1, 0.8, 0.6, 0.9],
            [0.7, 0.2, 0.9, 0.6],
            [0.2, 0.9, 0.1, 0.7],
            [0.8, 0.3, 0.7, 0.2],
        ])
        .unwrap()
    }

    #[test]
    fn eta_zero_matches_entropic() {
        let c = test_cost();
        let labels = [0, 1, 0, 1];
        let (gamma_cls, _) =
            solve_class_regularized(&uniform(4), &uniform(4), &c, &labels, 3.0, 0.0).unwrap();
        let (gamma_ent, _) = solve_entropic(&uniform(4), &uniform(4), &c, 3.0).unwrap();
        for (a, b) in gamma_cls.values().iter().zip(gamma_ent.values().iter()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn single_class_matches_entropic() {
        // With one class the penalty is sum_j sqrt(column mass), constant
        // on the feasible set, so the solution is the entropic one.
        let c = test_cost();
        let labels = [5, 5, 5, 5];
        let (gamma_cls, _) =
            solve_class_regularized(&uniform(4), &uniform(4), &c, &labels, 3.0, 1.0).unwrap();
        let (gamma_ent, _) = solve_entropic(&uniform(4), &uniform(4), &c, 3.0).unwrap();
        for (a, b) in gamma_cls.values().iter().zip(gamma_ent.values().iter()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn penalty_not_larger_than_entropic_plan() {
        // 2 classes, cross-class ambiguity: the class-regularized plan must
        // not have a larger group penalty than the entropic plan.
        let c = CostMatrix::new(array![
            [0.1, 0.1, 0.9, 0.9],
            [0.1, 0.1, 0.9, 0.9],
            [0.9, 0.1, 0.1, 0.9],
            [0.9, 0.9, 0.1, 0.1],
        ])
        .unwrap();
        let labels = [0, 0, 1, 1];
        let mut classes: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        classes.insert(0, vec![0, 1]);
        classes.insert(1, vec![2, 3]);

        let (gamma_cls, _) =
            solve_class_regularized(&uniform(4), &uniform(4), &c, &labels, 5.0, 2.0).unwrap();
        let (gamma_ent, _) = solve_entropic(&uniform(4), &uniform(4), &c, 5.0).unwrap();
        let omega_cls = group_penalty(gamma_cls.values(), &classes);
        let omega_ent = group_penalty(gamma_ent.values(), &classes);
        assert!(
            omega_cls <= omega_ent + 1e-12,
            "penalty grew: {} vs {}",
            omega_cls,
            omega_ent
        );
    }

    #[test]
    fn objective_trace_is_non_increasing() {
        let c = test_cost();
        let labels = [0, 1, 1, 0];
        let (_, report) =
            solve_class_regularized(&uniform(4), &uniform(4), &c, &labels, 4.0, 1.5).unwrap();
        assert!(report.objective_trace.len() > 1);
        for w in report.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "objective rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn label_count_checked() {
        let c = test_cost();
        let labels = [0, 1];
        assert!(
            solve_class_regularized(&uniform(4), &uniform(4), &c, &labels, 2.0, 1.0).is_err()
        );
    }
}
