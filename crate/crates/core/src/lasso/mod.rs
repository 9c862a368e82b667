//! ℓ1-penalized least squares by cyclic coordinate descent, regularization
//! paths, and K-fold selection of the penalty.

mod cv;
mod solver;

pub use cv::{
    cross_validate_lambda, cross_validate_lambda_with, fit_lasso_cv, lambda_path, CvLassoFit,
    CvOutcome, PathSpec,
};
pub use solver::{
    fit_lasso, fit_lasso_path, fit_lasso_with, lambda_max, soft_threshold, LassoOptions, LassoProblem,
    LassoSolution,
};
