//! Latent-block linear systems, the consensus network generator and the
//! three-state nonlinear example, together with the structural oracles
//! (true support, reduced VAR coefficients) used to score estimators.

mod consensus;
mod nonlinear;
mod system;

pub use consensus::{
    consensus_matrix, draw_weight, latent_part_is_acyclic, sample_consensus_weights,
    simulate_consensus, ConsensusNetwork, ConsensusParams,
};
pub use nonlinear::{
    nonlinear_step, simulate_nonlinear_example, simulate_nonlinear_example_with,
    NonlinearExample, NonlinearExampleState,
};
pub use system::{
    nilpotency_index, reduced_var_coeffs, simulate_linear, spectral_radius, true_support,
    LatentLinearSystem, STATE_LIMIT,
};

use nalgebra::{DMatrix, RowDVector};

/// Observed states over time; row `t` holds `X(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub data: DMatrix<f64>,
    /// Seed the trajectory was generated with, 0 when loaded from a file.
    pub seed: u64,
}

impl Trajectory {
    pub fn new(data: DMatrix<f64>, seed: u64) -> crate::Result<Self> {
        if data.nrows() == 0 {
            return Err(crate::Error::Dimension("trajectory needs at least one row".into()));
        }
        Ok(Self { data, seed })
    }

    /// Number of observed coordinates.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    /// Number of stored time points (`T + 1`).
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn state(&self, t: usize) -> RowDVector<f64> {
        self.data.row(t).into_owned()
    }

    /// Keeps only the listed coordinates, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> crate::Result<Trajectory> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.dim()) {
            return Err(crate::Error::Dimension(format!(
                "column {bad} out of range for {} coordinates",
                self.dim()
            )));
        }
        Ok(Trajectory { data: self.data.select_columns(cols), seed: self.seed })
    }
}
