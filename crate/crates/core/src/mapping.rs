//! Barycentric transport of source samples onto the target domain.

use ndarray::Array2;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::ot::Coupling;

/// Map each source sample to the coupling-weighted average of the target
/// samples: row i of the result is `sum_j gamma_ij t_j / sum_j gamma_ij`.
///
/// With uniform row marginals this reduces to `N_S * gamma * T`. Every
/// output row lies in the convex hull of the target rows. Rows of `gamma`
/// with zero mass have no defined barycenter and are rejected.
pub fn barycentric_map(gamma: &Coupling, target: &DataMatrix) -> Result<DataMatrix> {
    if gamma.n_cols() != target.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "coupling has {} columns but target has {} rows",
            gamma.n_cols(),
            target.n_rows()
        )));
    }

    let n_s = gamma.n_rows();
    let d = target.n_cols();
    let mut out = Array2::zeros((n_s, d));
    for i in 0..n_s {
        let row = gamma.values().row(i);
        let mass: f64 = row.sum();
        if mass <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "coupling row {} has zero mass; barycenter undefined",
                i
            )));
        }
        for (j, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let t_row = target.row(j);
            for k in 0..d {
                out[[i, k]] += w * t_row[k];
            }
        }
        for k in 0..d {
            out[[i, k]] /= mass;
        }
    }
    DataMatrix::new(out)
}
