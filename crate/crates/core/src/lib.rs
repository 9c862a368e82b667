//! Detection and estimation of a single covariate-threshold change point in a
//! high-dimensional linear regression model
//!
//! ```text
//! y_i = x_iᵀβ·1[w_i ≤ τ] + x_iᵀγ·1[w_i > τ] + ε_i,   τ ∈ ℝ ∪ {−∞}
//! ```
//!
//! The estimator runs two Lasso fits on a binary partition of the sample,
//! updates the threshold once by minimizing an ℓ0-penalized least-squares
//! loss over the observed values of `w`, and refits the two Lasso problems on
//! the updated partition. `τ = −∞` (no change) is a first-class outcome.
//!
//! The crate is `no_std` (with `alloc`). File formats, wall-clock timing and
//! parallel Monte Carlo execution live in the companion `hdcp` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod changepoint;
pub mod error;
pub mod grid_search;
pub mod lasso;
pub mod matrix;
pub mod model;
pub mod preprocess;
pub mod simulation;
pub mod stats;
pub mod two_step;

pub use changepoint::{select_mu_bic, step1_optimize, BicSelection, Step1Result, TieRule};
pub use error::{Error, Result};
pub use grid_search::{build_augmented_design, full_grid_search, run_full_grid, AugmentedDesign, GridConfig, GridFit, GridSolver};
pub use lasso::{
    cross_validate_lambda, fit_lasso, lambda_path, LassoOptions, LassoProblem, LassoSolution,
};
pub use matrix::Matrix;
pub use preprocess::{drop_correlated, standardize, Standardization};
pub use simulation::{
    apply_boundary_rule, compute_metrics, generate_dataset, run_replicate, MetricsRow, Method, SimulationConfig, Truth,
};
pub use model::{
    binary_partition, squared_loss_q, ChangePointEstimate, Dataset, RegressionPair, TwoStepFit,
};
pub use two_step::{
    initialize_tau, run_algorithm1, run_algorithm1_timed, AlgorithmConfig, Clock, InitScheme,
    MuSelection, NoClock,
};
