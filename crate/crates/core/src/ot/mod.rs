//! Discrete optimal-transport solvers.
//!
//! Three solvers over the same coupling polytope
//! `{ gamma >= 0 | gamma 1 = mu_s, gamma^T 1 = mu_t }`:
//!
//! * [`solve_exact`] — the transportation linear program, solved with a
//!   network simplex; returns a vertex plan with at most N_S+N_T-1
//!   nonzeros and marginals exact to float accumulation.
//! * [`solve_entropic`] — entropy-regularized transport via Sinkhorn
//!   scaling of the kernel exp(-lambda * C), with a log-domain fallback.
//! * [`solve_class_regularized`] — adds the l_{1/2,1} group penalty on
//!   source classes, minimized by majorization-minimization around the
//!   entropic solver.

mod class_reg;
mod entropic;
mod exact;

pub use class_reg::{solve_class_regularized, solve_class_regularized_with, ClassRegParams};
pub use entropic::{solve_entropic, solve_entropic_with, SinkhornParams};
pub use exact::solve_exact;

use ndarray::Array2;

use crate::data::{CostMatrix, EmpiricalMeasure};
use crate::error::{Error, Result};

/// Marginal tolerance for couplings produced by iterative solvers.
pub const ITERATIVE_MARGINAL_TOL: f64 = 1e-6;
/// Marginal tolerance for couplings produced by the exact solver.
pub const EXACT_MARGINAL_TOL: f64 = 1e-12;

/// A transport plan: non-negative N_S x N_T matrix with prescribed
/// row and column marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    values: Array2<f64>,
    row_marginal: EmpiricalMeasure,
    col_marginal: EmpiricalMeasure,
}

impl Coupling {
    /// Validate entries and marginals (within `marginal_tol`) and wrap.
    pub fn new(
        values: Array2<f64>,
        row_marginal: EmpiricalMeasure,
        col_marginal: EmpiricalMeasure,
        marginal_tol: f64,
    ) -> Result<Self> {
        if values.nrows() != row_marginal.len() || values.ncols() != col_marginal.len() {
            return Err(Error::DimensionMismatch(format!(
                "coupling {}x{} vs marginals {} and {}",
                values.nrows(),
                values.ncols(),
                row_marginal.len(),
                col_marginal.len()
            )));
        }
        for ((i, j), &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            if v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "negative coupling entry {} at ({}, {})",
                    v, i, j
                )));
            }
        }
        let plan = Self { values, row_marginal, col_marginal };
        let violation = plan.max_marginal_violation();
        if violation > marginal_tol {
            return Err(Error::Solver(format!(
                "coupling violates marginals by {} (tolerance {})",
                violation, marginal_tol
            )));
        }
        Ok(plan)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row_marginal(&self) -> &EmpiricalMeasure {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &EmpiricalMeasure {
        &self.col_marginal
    }

    /// L-infinity deviation of the plan's row/column sums from the
    /// prescribed marginals.
    pub fn max_marginal_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, &target) in self.row_marginal.as_slice().iter().enumerate() {
            let sum: f64 = self.values.row(i).sum();
            worst = worst.max((sum - target).abs());
        }
        for (j, &target) in self.col_marginal.as_slice().iter().enumerate() {
            let sum: f64 = self.values.column(j).sum();
            worst = worst.max((sum - target).abs());
        }
        worst
    }

    /// Number of entries strictly above zero.
    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    /// Diagonal entries (for square plans, up to min(N_S, N_T)).
    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.n_rows().min(self.n_cols());
        (0..n).map(|i| self.values[[i, i]]).collect()
    }
}

/// Outcome bookkeeping for the iterative solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    /// Sinkhorn iterations performed (summed over outer steps for the
    /// class-regularized solver).
    pub iterations: usize,
    /// L-infinity marginal violation of the returned plan.
    pub final_marginal_violation: f64,
    /// The solver's own objective at the returned plan: transport cost
    /// minus (1/lambda) * entropy, plus the group penalty when active.
    pub objective: f64,
    /// Whether the stopping tolerance was met.
    pub converged: bool,
    /// Objective after each majorization-minimization outer step
    /// (single entry for the plain entropic solver).
    pub objective_trace: Vec<f64>,
}

/// Frobenius inner product `<gamma, C>`; the transport cost of the plan,
/// and the Wasserstein distance when `gamma` solves the exact problem.
pub fn transport_cost(gamma: &Coupling, c: &CostMatrix) -> Result<f64> {
    if gamma.n_rows() != c.n_rows() || gamma.n_cols() != c.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "coupling {}x{} vs cost {}x{}",
            gamma.n_rows(),
            gamma.n_cols(),
            c.n_rows(),
            c.n_cols()
        )));
    }
    Ok(gamma
        .values()
        .iter()
        .zip(c.values().iter())
        .map(|(&g, &c)| g * c)
        .sum())
}

/// Entropy E(gamma) = -sum gamma_ij ln gamma_ij, with 0 ln 0 = 0.
pub(crate) fn entropy(values: &Array2<f64>) -> f64 {
    values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn transport_cost_single_entry() {
        let gamma = Coupling::new(
            array![[1.0]],
            EmpiricalMeasure::uniform(1).unwrap(),
            EmpiricalMeasure::uniform(1).unwrap(),
            EXACT_MARGINAL_TOL,
        )
        .unwrap();
        let c = CostMatrix::new(array![[7.0]]).unwrap();
        assert_eq!(transport_cost(&gamma, &c).unwrap(), 7.0);
    }

    #[test]
    fn transport_cost_zero_diagonal() {
        let gamma = Coupling::new(
            array![[0.5, 0.0], [0.0, 0.5]],
            EmpiricalMeasure::uniform(2).unwrap(),
            EmpiricalMeasure::uniform(2).unwrap(),
            EXACT_MARGINAL_TOL,
        )
        .unwrap();
        let c = CostMatrix::new(array![[0.0, 3.0], [4.0, 0.0]]).unwrap();
        assert_eq!(transport_cost(&gamma, &c).unwrap(), 0.0);
    }

    #[test]
    fn transport_cost_matches_double_sum() {
        // Fixed 5x5 plan with uniform marginals (a permutation/5) against
        // a brute-force double loop.
        let mut values = Array2::zeros((5, 5));
        let perm = [2usize, 0, 4, 1, 3];
        for (i, &j) in perm.iter().enumerate() {
            values[[i, j]] = 0.2;
        }
        let gamma = Coupling::new(
            values.clone(),
            EmpiricalMeasure::uniform(5).unwrap(),
            EmpiricalMeasure::uniform(5).unwrap(),
            EXACT_MARGINAL_TOL,
        )
        .unwrap();
        let mut cost_values = Array2::zeros((5, 5));
        for i in 0..5 {
            for j in 0..5 {
                cost_values[[i, j]] = (i as f64 * 1.7 + j as f64 * 0.3).sin().abs();
            }
        }
        let c = CostMatrix::new(cost_values.clone()).unwrap();
        let mut expected = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                expected += values[[i, j]] * cost_values[[i, j]];
            }
        }
        assert_eq!(transport_cost(&gamma, &c).unwrap(), expected);
    }

    #[test]
    fn transport_cost_rejects_shape_mismatch() {
        let gamma = Coupling::new(
            array![[1.0]],
            EmpiricalMeasure::uniform(1).unwrap(),
            EmpiricalMeasure::uniform(1).unwrap(),
            EXACT_MARGINAL_TOL,
        )
        .unwrap();
        let c = CostMatrix::new(array![[0.0, 1.0]]).unwrap();
        assert!(transport_cost(&gamma, &c).is_err());
    }

    #[test]
    fn coupling_rejects_bad_marginals() {
        let res = Coupling::new(
            array![[0.9, 0.0], [0.0, 0.1]],
            EmpiricalMeasure::uniform(2).unwrap(),
            EmpiricalMeasure::uniform(2).unwrap(),
            1e-6,
        );
        assert!(res.is_err());
    }
}
