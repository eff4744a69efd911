//! Recovery of 1-step causal structure among the observed processes of a
//! stochastic dynamical system whose latent states evolve without noise.
//!
//! Two routes are provided:
//!
//! * a general criterion: `X_j` 1-step influences `X_i` iff
//!   `I(X_i(t); X_j(t-1) | past \ X_j(t-1)) > 0`, estimated with a
//!   Kozachenko–Leonenko kNN entropy estimator ([`infotheory`]);
//! * for linear dynamics with an acyclic latent part, a finite-order VAR fit
//!   by least squares whose lag-1 coefficient support equals the observed
//!   causal graph ([`varfit`]).
//!
//! [`dynamics`] simulates the systems used to exercise both routes and
//! [`experiments`] reproduces the end-to-end studies. All information
//! quantities are in nats.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod infotheory;
pub mod io;
mod rng;
pub mod varfit;

pub use dynamics::{
    nilpotency_index, reduced_var_coeffs, simulate_consensus, simulate_linear,
    simulate_nonlinear_example, spectral_radius, true_support, ConsensusParams,
    LatentLinearSystem, NonlinearExampleState, Trajectory,
};
pub use error::{Error, Result};
pub use infotheory::{
    cmi_knn, edge_test, gaussian_cmi, knn_entropy, CmiEstimate, EdgeQuery, SampleSet,
};
pub use varfit::{fit_var, recover_support, support_error, wald_statistic, SupportMatrix, VarFit};
