//! Full-grid-search baseline: one weighted Lasso on the augmented design
//! `x̃_i(τ) = (x_iᵀ, x_iᵀ1[w_i ≤ τ])ᵀ` per candidate threshold, with
//! `α = (γ, β − γ)` and penalty `λ‖D(τ)α‖₁`, `D_j = ‖x̃⁽ʲ⁾(τ)‖_n`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lasso::{fit_lasso_cv, fit_lasso_path, lambda_max, LassoOptions, PathSpec};
use crate::matrix::Matrix;
use crate::model::{Dataset, RegressionPair};
use crate::stats::{empirical_quantile_sorted, log_space_desc};
use crate::two_step::derive_seed;

const STREAM_GRID_CV: u64 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDesign {
    pub x_tilde: Matrix,
    /// Root-mean-square norm of each augmented column.
    pub d: Vec<f64>,
}

pub fn build_augmented_design(data: &Dataset, tau: f64) -> AugmentedDesign {
    let (n, p) = (data.n(), data.p());
    let mut xt = Matrix::zeros(n, 2 * p);
    let w = data.w();
    for j in 0..p {
        let src = data.x().col(j);
        xt.col_mut(j).copy_from_slice(src);
        for (i, v) in xt.col_mut(j + p).iter_mut().enumerate() {
            *v = if w[i] <= tau { src[i] } else { 0.0 };
        }
    }
    let d = (0..2 * p)
        .map(|j| {
            let c = xt.col(j);
            libm::sqrt(c.iter().map(|v| v * v).sum::<f64>() / n as f64)
        })
        .collect();
    AugmentedDesign { x_tilde: xt, d }
}

impl AugmentedDesign {
    /// Columns with `D_j > 0`, rescaled to unit `‖·‖_n`, and their indices.
    fn scaled(&self) -> (Matrix, Vec<usize>) {
        let keep: Vec<usize> = (0..self.d.len()).filter(|&j| self.d[j] > 0.0).collect();
        let mut m = self.x_tilde.select_cols(&keep);
        for (k, &j) in keep.iter().enumerate() {
            let s = 1.0 / self.d[j];
            m.col_mut(k).iter_mut().for_each(|v| *v *= s);
        }
        (m, keep)
    }
}

/// How each per-threshold Lasso is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridSolver {
    /// Pathwise from that design's `λ_max` down to `λ`, starting from zero.
    #[default]
    Pathwise,
    /// Directly at `λ`, warm-started from the previous (sorted) threshold.
    WarmStart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFit {
    /// `(γ̂, β̂ − γ̂)` at the selected threshold.
    pub alpha: Vec<f64>,
    pub tau_hat: f64,
    pub pair: RegressionPair,
    pub lambda: f64,
    /// `(τ, penalized objective)` over the windowed grid, ascending in `τ`.
    pub curve: Vec<(f64, f64)>,
    /// Weighted Lasso problems solved over the grid.
    pub solves: usize,
    pub all_converged: bool,
}

/// Candidate thresholds: distinct observed `w` whose empirical cdf lies strictly
/// inside `window`.
pub fn grid_candidates(data: &Dataset, window: (f64, f64)) -> Vec<f64> {
    let n = data.n() as f64;
    data.distinct_w()
        .iter()
        .filter(|(_, last)| {
            let q = (*last + 1) as f64 / n;
            q > window.0 && q < window.1
        })
        .map(|(v, _)| *v)
        .collect()
}

fn solve_at(
    data: &Dataset,
    tau: f64,
    lambda: f64,
    solver: GridSolver,
    warm: &[f64],
    opts: LassoOptions,
) -> Result<(Vec<f64>, f64, bool)> {
    let n = data.n() as f64;
    let design = build_augmented_design(data, tau);
    let (xs, keep) = design.scaled();
    let y = data.y();
    let path: Vec<f64> = match solver {
        GridSolver::WarmStart => vec![lambda],
        GridSolver::Pathwise => {
            let lmax = lambda_max(&xs, y, n);
            let spec = PathSpec::default();
            let mut path: Vec<f64> = if lmax > lambda {
                log_space_desc(lmax, spec.ratio * lmax, spec.points)
                    .into_iter()
                    .take_while(|&l| l > lambda)
                    .collect()
            } else {
                Vec::new()
            };
            path.push(lambda);
            path
        }
    };
    let start: Option<Vec<f64>> = match solver {
        GridSolver::WarmStart => Some(keep.iter().map(|&j| warm[j] * design.d[j]).collect()),
        GridSolver::Pathwise => None,
    };
    let last = fit_lasso_path(&xs, y, n, &path, start.as_deref(), opts)?
        .pop()
        .expect("path is nonempty");
    let converged = last.converged;
    let scaled_coef = last.beta;
    let fitted = xs.mul_vec(&scaled_coef);
    let kept_rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let mut alpha = vec![0.0; design.d.len()];
    let mut l1 = 0.0;
    for (k, &j) in keep.iter().enumerate() {
        alpha[j] = scaled_coef[k] / design.d[j];
        l1 += scaled_coef[k].abs();
    }
    Ok((alpha, kept_rss / n + lambda * l1, converged))
}

/// Solves the weighted Lasso at every windowed candidate and returns the
/// threshold with the smallest penalized objective (ties: smallest threshold).
pub fn full_grid_search(
    data: &Dataset,
    lambda: f64,
    window: (f64, f64),
    solver: GridSolver,
    opts: LassoOptions,
) -> Result<GridFit> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("grid-search lambda must be positive"));
    }
    let candidates = grid_candidates(data, window);
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate thresholds inside the window"));
    }
    let p = data.p();
    let mut warm = vec![0.0; 2 * p];
    let mut curve = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut all_converged = true;
    for &tau in &candidates {
        let (alpha, obj, ok) = solve_at(data, tau, lambda, solver, &warm, opts)?;
        all_converged &= ok;
        curve.push((tau, obj));
        if best.as_ref().is_none_or(|b| obj < b.2) {
            best = Some((tau, alpha.clone(), obj));
        }
        warm = alpha;
    }
    let (tau_hat, alpha, _) = best.expect("grid is nonempty");
    let gamma = alpha[..p].to_vec();
    let beta = (0..p).map(|j| alpha[j] + alpha[p + j]).collect();
    Ok(GridFit {
        alpha,
        tau_hat,
        pair: RegressionPair { beta, gamma },
        lambda,
        curve,
        solves: candidates.len(),
        all_converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// Empirical-quantile window of admissible thresholds.
    pub window: (f64, f64),
    pub k_folds: usize,
    pub path: PathSpec,
    pub seed: u64,
    pub solver: GridSolver,
    pub lasso: LassoOptions,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            window: (0.1, 0.9),
            k_folds: 5,
            path: PathSpec::default(),
            seed: 0,
            solver: GridSolver::default(),
            lasso: LassoOptions::default(),
        }
    }
}

/// Full baseline: `λ` cross-validated once on the augmented design at the
/// median of `w`, then the grid search at that fixed `λ`.
pub fn run_full_grid(data: &Dataset, config: &GridConfig) -> Result<GridFit> {
    let sorted = data.sorted_w();
    let median = empirical_quantile_sorted(&sorted, 0.5);
    let design = build_augmented_design(data, median);
    let (xs, _) = design.scaled();
    let cv = fit_lasso_cv(
        &xs,
        data.y(),
        data.n() as f64,
        config.k_folds,
        config.path,
        derive_seed(config.seed, STREAM_GRID_CV),
        config.lasso,
    )?;
    if !(cv.lambda > 0.0) {
        return Err(Error::invalid("response carries no signal for the grid-search baseline"));
    }
    full_grid_search(data, cv.lambda, config.window, config.solver, config.lasso)
}
