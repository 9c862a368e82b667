use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// Solver controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Sweeps stop once the largest coefficient move is below
    /// `tol · (1 + ‖β‖∞)`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Declared KKT tolerance; a solution only counts as converged below it.
    pub kkt_tol: f64,
    /// Record the objective after every sweep.
    pub trace: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-9,
            max_sweeps: 100_000,
            kkt_tol: 1e-6,
            trace: false,
        }
    }
}

/// `min_β (1/n_full)‖y_sub − X_sub β‖² + λ‖β‖₁` over a row subset of the data.
///
/// `n_full` is kept as a real so cross-validation folds can rescale it to the
/// training fraction.
#[derive(Debug, Clone, Copy)]
pub struct LassoProblem<'a> {
    pub x: &'a Matrix,
    pub y: &'a [f64],
    pub n_full: f64,
    pub lambda: f64,
}

impl<'a> LassoProblem<'a> {
    pub fn new(x: &'a Matrix, y: &'a [f64], n_full: f64, lambda: f64) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "response length",
                expected: x.rows(),
                got: y.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::invalid("lasso needs at least one row"));
        }
        if !(n_full >= y.len() as f64) {
            return Err(Error::invalid("normalizer must be at least the number of rows"));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite and nonnegative"));
        }
        Ok(LassoProblem {
            x,
            y,
            n_full,
            lambda,
        })
    }

    pub fn objective(&self, beta: &[f64]) -> f64 {
        let fitted = self.x.mul_vec(beta);
        let rss: f64 = self
            .y
            .iter()
            .zip(&fitted)
            .map(|(y, f)| (y - f) * (y - f))
            .sum();
        rss / self.n_full + self.lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Largest KKT violation of `beta`.
    pub fn kkt_residual(&self, beta: &[f64]) -> f64 {
        let fitted = self.x.mul_vec(beta);
        let r: Vec<f64> = self.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
        kkt_violation(self.x, &r, beta, 2.0 / self.n_full, self.lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub beta: Vec<f64>,
    /// Coordinate-descent sweeps performed (full and active-set).
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    /// Objective after each sweep when tracing was requested.
    pub objective_trace: Vec<f64>,
}

#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// `|(2/n)x_jᵀr| ≤ λ` off the support, `(2/n)x_jᵀr = λ·sign(β_j)` on it.
fn kkt_violation(x: &Matrix, r: &[f64], beta: &[f64], scale: f64, lambda: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (j, &b) in beta.iter().enumerate() {
        let g = scale * dot(x.col(j), r);
        let v = if b != 0.0 {
            (g - lambda * b.signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// `max_j |(2/n_full) x_jᵀ y|`, the smallest penalty with an all-zero solution.
pub fn lambda_max(x: &Matrix, y: &[f64], n_full: f64) -> f64 {
    (0..x.cols())
        .map(|j| (2.0 / n_full * dot(x.col(j), y)).abs())
        .fold(0.0, f64::max)
}

const ANDERSON_DEPTH: usize = 8;

/// Solves `G z = b` for symmetric positive definite `G` (row-major, `k×k`) by
/// Cholesky after adding `ridge·max diag` to the diagonal; `None` when a pivot
/// collapses.
fn cholesky_solve(g: &mut [f64], k: usize, b: &[f64], ridge: f64) -> Option<Vec<f64>> {
    let scale = (0..k).map(|i| g[i * k + i]).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    for i in 0..k {
        g[i * k + i] += ridge * scale;
    }
    // lower factor overwrites the lower triangle
    for j in 0..k {
        let mut d = g[j * k + j];
        for t in 0..j {
            d -= g[j * k + t] * g[j * k + t];
        }
        if !(d > 1e-13 * scale) {
            return None;
        }
        let d = libm::sqrt(d);
        g[j * k + j] = d;
        for i in j + 1..k {
            let mut v = g[i * k + j];
            for t in 0..j {
                v -= g[i * k + t] * g[j * k + t];
            }
            g[i * k + j] = v / d;
        }
    }
    let mut z = b.to_vec();
    for i in 0..k {
        for t in 0..i {
            z[i] -= g[i * k + t] * z[t];
        }
        z[i] /= g[i * k + i];
    }
    for i in (0..k).rev() {
        for t in i + 1..k {
            z[i] -= g[t * k + i] * z[t];
        }
        z[i] /= g[i * k + i];
    }
    z.iter().all(|v| v.is_finite()).then_some(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NewtonStep {
    Exact,
    /// Stopped where a coefficient reached zero.
    Partial,
    /// Singular support system or no decrease.
    Failed,
}

/// Cyclic coordinate descent bound to one `(X, y, n_full)`; reused across a
/// regularization path.
///
/// Works on the gradient `Xᵀr` and caches Gram columns `Xᵀx_j` for every
/// coordinate that ever moves, so an update costs `O(p)` and zero coordinates
/// cost `O(1)` per sweep.
pub(crate) struct CoordinateDescent<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    n_full: f64,
    /// `(2/n)‖x_j‖²`
    curvature: Vec<f64>,
    xty: Vec<f64>,
    yty: f64,
    gram: Vec<Option<Vec<f64>>>,
    opts: LassoOptions,
}

fn ensure_column<'g>(gram: &'g mut [Option<Vec<f64>>], x: &Matrix, j: usize) -> &'g [f64] {
    gram[j].get_or_insert_with(|| x.tr_mul_vec(x.col(j)))
}

impl<'a> CoordinateDescent<'a> {
    pub(crate) fn new(x: &'a Matrix, y: &'a [f64], n_full: f64, opts: LassoOptions) -> Self {
        let scale = 2.0 / n_full;
        let curvature = (0..x.cols())
            .map(|j| {
                let c = x.col(j);
                scale * dot(c, c)
            })
            .collect();
        CoordinateDescent {
            x,
            y,
            n_full,
            curvature,
            xty: x.tr_mul_vec(y),
            yty: dot(y, y),
            gram: vec![None; x.cols()],
            opts,
        }
    }

    fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let fitted = self.x.mul_vec(beta);
        self.y.iter().zip(&fitted).map(|(y, f)| y - f).collect()
    }

    fn objective(&self, beta: &[f64], lambda: f64) -> f64 {
        let r = self.residual(beta);
        dot(&r, &r) / self.n_full + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// `Xᵀ(y − Xβ)` from cached columns; `O(p·|supp β|)`.
    fn gradient(&mut self, beta: &[f64]) -> Vec<f64> {
        let mut g = self.xty.clone();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                let col = ensure_column(&mut self.gram, self.x, j);
                for (gk, ck) in g.iter_mut().zip(col) {
                    *gk -= b * ck;
                }
            }
        }
        g
    }

    /// One pass over `coords`, keeping `g` current on `targets` (all
    /// coordinates when `None`). Returns the largest coefficient move.
    fn sweep(&mut self, coords: &[usize], targets: Option<&[usize]>, beta: &mut [f64], g: &mut [f64], lambda: f64) -> f64 {
        let scale = 2.0 / self.n_full;
        let mut max_change: f64 = 0.0;
        for &j in coords {
            let a = self.curvature[j];
            if a == 0.0 {
                continue;
            }
            let old = beta[j];
            let z = scale * g[j] + a * old;
            let new = soft_threshold(z, lambda) / a;
            let delta = new - old;
            if delta != 0.0 {
                let col = ensure_column(&mut self.gram, self.x, j);
                match targets {
                    None => {
                        for (gk, ck) in g.iter_mut().zip(col) {
                            *gk -= delta * ck;
                        }
                    }
                    Some(t) => {
                        for &k in t {
                            g[k] -= delta * col[k];
                        }
                    }
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    /// Anderson extrapolation over the stored iterates of `active`; the
    /// extrapolated point is kept only if it lowers the objective.
    fn extrapolate(&mut self, active: &[usize], history: &[Vec<f64>], beta: &mut [f64], g: &mut [f64], lambda: f64) {
        let k = history.len() - 1;
        let diffs: Vec<Vec<f64>> = (0..k)
            .map(|i| history[i + 1].iter().zip(&history[i]).map(|(a, b)| a - b).collect())
            .collect();
        let mut h = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..=i {
                let v = dot(&diffs[i], &diffs[j]);
                h[i * k + j] = v;
                h[j * k + i] = v;
            }
        }
        let Some(z) = cholesky_solve(&mut h, k, &vec![1.0; k], 1e-10) else {
            return;
        };
        let total: f64 = z.iter().sum();
        if !(total.abs() > 1e-300) || !total.is_finite() {
            return;
        }
        let mut cand = vec![0.0; active.len()];
        for (i, zi) in z.iter().enumerate() {
            let c = zi / total;
            for (v, h) in cand.iter_mut().zip(&history[i + 1]) {
                *v += c * h;
            }
        }
        self.accept_if_better(active, &cand, beta, g, lambda);
    }

    /// Replaces `beta` on `active` by `cand` (zero elsewhere) when that lowers
    /// the objective; keeps `g` current on `active`.
    fn accept_if_better(&mut self, active: &[usize], cand: &[f64], beta: &mut [f64], g: &mut [f64], lambda: f64) -> bool {
        let mut g_cand: Vec<f64> = active.iter().map(|&k| self.xty[k]).collect();
        for (&j, &b) in active.iter().zip(cand) {
            if b != 0.0 {
                let col = ensure_column(&mut self.gram, self.x, j);
                for (gk, &k) in g_cand.iter_mut().zip(active) {
                    *gk -= b * col[k];
                }
            }
        }
        // RSS = yᵀy − βᵀ(Xᵀy + Xᵀr) when β vanishes off `active`
        let objective = |vals: &mut dyn Iterator<Item = (f64, f64, f64)>| {
            let (mut quad, mut l1) = (0.0, 0.0);
            for (b, c, gk) in vals {
                quad += b * (c + gk);
                l1 += b.abs();
            }
            (self.yty - quad) / self.n_full + lambda * l1
        };
        let current = objective(&mut active.iter().map(|&k| (beta[k], self.xty[k], g[k])));
        let proposed = objective(&mut active.iter().zip(cand).zip(&g_cand).map(|((&k, &b), &gk)| (b, self.xty[k], gk)));
        if proposed < current {
            for ((&j, &b), &gk) in active.iter().zip(cand).zip(&g_cand) {
                beta[j] = b;
                g[j] = gk;
            }
            true
        } else {
            false
        }
    }

    /// Moves to the exact minimizer on the current sign pattern of `active`,
    /// or to where the segment towards it first crosses zero.
    fn newton_step(&mut self, active: &[usize], beta: &mut [f64], g: &mut [f64], lambda: f64) -> NewtonStep {
        let support: Vec<usize> = active.iter().copied().filter(|&j| beta[j] != 0.0).collect();
        let k = support.len();
        if k == 0 {
            return NewtonStep::Failed;
        }
        let mut h = vec![0.0; k * k];
        for (c, &j) in support.iter().enumerate() {
            let col = ensure_column(&mut self.gram, self.x, j);
            for (r, &i) in support.iter().enumerate() {
                h[r * k + c] = col[i];
            }
        }
        let half = 0.5 * self.n_full * lambda;
        let rhs: Vec<f64> = support.iter().map(|&j| self.xty[j] - half * beta[j].signum()).collect();
        let mut h2 = h.clone();
        // a saturated support makes the system singular; a tiny ridge still
        // gives a useful direction and the objective check guards the step
        let Some(target) = cholesky_solve(&mut h, k, &rhs, 0.0).or_else(|| cholesky_solve(&mut h2, k, &rhs, 1e-9)) else {
            return NewtonStep::Failed;
        };
        let mut step = 1.0;
        let mut blocking = None;
        for (t, &j) in target.iter().zip(&support) {
            let b = beta[j];
            if t.signum() != b.signum() || *t == 0.0 {
                let frac = b / (b - t);
                if frac < step {
                    step = frac;
                    blocking = Some(j);
                }
            }
        }
        let mut moved = beta.to_vec();
        for (t, &j) in target.iter().zip(&support) {
            moved[j] = if blocking == Some(j) { 0.0 } else { beta[j] + step * (t - beta[j]) };
        }
        let cand: Vec<f64> = active.iter().map(|&j| moved[j]).collect();
        let ok = self.accept_if_better(active, &cand, beta, g, lambda);
        match (ok, blocking) {
            (false, _) => NewtonStep::Failed,
            (true, Some(_)) => NewtonStep::Partial,
            (true, None) => NewtonStep::Exact,
        }
    }

    pub(crate) fn solve(&mut self, lambda: f64, warm_start: Option<&[f64]>) -> LassoSolution {
        let p = self.x.cols();
        let mut beta = match warm_start {
            Some(w) => w.to_vec(),
            None => vec![0.0; p],
        };
        let all: Vec<usize> = (0..p).collect();
        let mut trace = Vec::new();
        let mut sweeps = 0usize;
        let mut converged = false;
        let tol = self.opts.tol;
        let threshold = |beta: &[f64]| tol * (1.0 + beta.iter().fold(0.0f64, |m, b| m.max(b.abs())));
        let (tol_kkt, max_sweeps, tracing) = (self.opts.kkt_tol, self.opts.max_sweeps, self.opts.trace);
        let mut g = self.gradient(&beta);
        // Newton attempts are skipped for `wait` cycles after one that stalls
        let (mut backoff, mut wait) = (1usize, 0usize);

        while sweeps < max_sweeps {
            let change = self.sweep(&all, None, &mut beta, &mut g, lambda);
            sweeps += 1;
            if tracing {
                trace.push(self.objective(&beta, lambda));
            }
            if change < threshold(&beta) {
                let r = self.residual(&beta);
                if kkt_violation(self.x, &r, &beta, 2.0 / self.n_full, lambda) <= tol_kkt {
                    converged = true;
                    break;
                }
                g = self.gradient(&beta);
                continue;
            }
            let active: Vec<usize> = all.iter().copied().filter(|&j| beta[j] != 0.0).collect();
            let mut history: Vec<Vec<f64>> = Vec::with_capacity(ANDERSON_DEPTH + 1);
            history.push(active.iter().map(|&j| beta[j]).collect());
            while sweeps < max_sweeps {
                let change = self.sweep(&active, Some(&active), &mut beta, &mut g, lambda);
                sweeps += 1;
                if change < threshold(&beta) {
                    if tracing {
                        trace.push(self.objective(&beta, lambda));
                    }
                    break;
                }
                history.push(active.iter().map(|&j| beta[j]).collect());
                if history.len() > ANDERSON_DEPTH {
                    let mut moved = false;
                    if wait == 0 {
                        match self.newton_step(&active, &mut beta, &mut g, lambda) {
                            NewtonStep::Exact => {
                                moved = true;
                                backoff = 1;
                            }
                            outcome => {
                                moved = outcome == NewtonStep::Partial;
                                backoff *= 2;
                                wait = backoff;
                            }
                        }
                    } else {
                        wait -= 1;
                    }
                    if !moved {
                        self.extrapolate(&active, &history, &mut beta, &mut g, lambda);
                    }
                    history.clear();
                    history.push(active.iter().map(|&j| beta[j]).collect());
                }
                if tracing {
                    trace.push(self.objective(&beta, lambda));
                }
            }
            // entries off the active set went stale; rebuild without drift
            g = self.gradient(&beta);
        }

        let r = self.residual(&beta);
        let kkt_residual = kkt_violation(self.x, &r, &beta, 2.0 / self.n_full, lambda);
        LassoSolution {
            beta,
            iterations: sweeps,
            kkt_residual,
            converged,
            objective_trace: trace,
        }
    }

    /// Solves along a descending path with warm starts and returns every solution.
    pub(crate) fn solve_path(&mut self, path: &[f64], warm_start: Option<&[f64]>) -> Vec<LassoSolution> {
        let mut out: Vec<LassoSolution> = Vec::with_capacity(path.len());
        for &lambda in path {
            let warm = out.last().map(|s| s.beta.clone()).or_else(|| warm_start.map(<[f64]>::to_vec));
            let s = self.solve(lambda, warm.as_deref());
            out.push(s);
        }
        out
    }
}

/// Solves one Lasso problem by cyclic coordinate descent with an active-set
/// strategy. Non-convergence is reported through `converged`, not an error.
pub fn fit_lasso(problem: &LassoProblem<'_>, warm_start: Option<&[f64]>) -> Result<LassoSolution> {
    fit_lasso_with(problem, warm_start, LassoOptions::default())
}

pub fn fit_lasso_with(
    problem: &LassoProblem<'_>,
    warm_start: Option<&[f64]>,
    opts: LassoOptions,
) -> Result<LassoSolution> {
    if let Some(w) = warm_start {
        if w.len() != problem.x.cols() {
            return Err(Error::DimensionMismatch {
                what: "warm start length",
                expected: problem.x.cols(),
                got: w.len(),
            });
        }
    }
    let mut cd = CoordinateDescent::new(problem.x, problem.y, problem.n_full, opts);
    Ok(cd.solve(problem.lambda, warm_start))
}

/// Solves a descending sequence of penalties with warm starts, returning one
/// solution per penalty.
pub fn fit_lasso_path(
    x: &Matrix,
    y: &[f64],
    n_full: f64,
    path: &[f64],
    warm_start: Option<&[f64]>,
    opts: LassoOptions,
) -> Result<Vec<LassoSolution>> {
    for &lambda in path {
        LassoProblem::new(x, y, n_full, lambda)?;
    }
    if let Some(w) = warm_start {
        if w.len() != x.cols() {
            return Err(Error::DimensionMismatch {
                what: "warm start length",
                expected: x.cols(),
                got: w.len(),
            });
        }
    }
    Ok(CoordinateDescent::new(x, y, n_full, opts).solve_path(path, warm_start))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (Matrix, Vec<f64>) {
        let x = Matrix::from_rows(&[
            [1.0, 0.2, -0.5],
            [0.3, 1.1, 0.0],
            [-0.7, 0.4, 1.3],
            [1.5, -0.2, 0.8],
            [0.1, 0.9, -1.1],
        ])
        .unwrap();
        (x, vec![1.2, 0.4, -0.3, 2.0, -0.5])
    }

    #[test]
    fn lambda_above_max_gives_exact_zero() {
        let (x, y) = small();
        let lmax = lambda_max(&x, &y, 5.0);
        let prob = LassoProblem::new(&x, &y, 5.0, lmax).unwrap();
        let s = fit_lasso(&prob, None).unwrap();
        assert!(s.beta.iter().all(|&b| b == 0.0));
        assert!(s.converged);
        // a warm start away from zero must still land on zero
        let s = fit_lasso(&prob, Some(&[1.0, -1.0, 0.5])).unwrap();
        assert!(s.beta.iter().all(|&b| b.abs() < 1e-12), "{:?}", s.beta);
    }

    #[test]
    fn unpenalized_scalar_is_ols_slope() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [-1.0], [0.5]]).unwrap();
        let y = [2.1, 3.9, -2.2, 1.0];
        let prob = LassoProblem::new(&x, &y, 10.0, 0.0).unwrap();
        let s = fit_lasso(&prob, None).unwrap();
        let slope = dot(x.col(0), &y) / dot(x.col(0), x.col(0));
        assert!((s.beta[0] - slope).abs() < 1e-12);
    }

    #[test]
    fn kkt_holds_at_moderate_penalty() {
        let (x, y) = small();
        let lmax = lambda_max(&x, &y, 5.0);
        let prob = LassoProblem::new(&x, &y, 5.0, 0.2 * lmax).unwrap();
        let s = fit_lasso(&prob, None).unwrap();
        assert!(s.converged);
        assert!(s.kkt_residual <= 1e-6);
        assert!((prob.kkt_residual(&s.beta) - s.kkt_residual).abs() < 1e-12);
    }

    #[test]
    fn zero_column_stays_zero() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [2.0, 0.0], [0.5, 0.0]]).unwrap();
        let y = [1.0, 2.0, 0.4];
        let prob = LassoProblem::new(&x, &y, 3.0, 0.01).unwrap();
        let s = fit_lasso(&prob, None).unwrap();
        assert_eq!(s.beta[1], 0.0);
        assert!(s.converged);
    }

    #[test]
    fn bad_arguments() {
        let (x, y) = small();
        assert!(LassoProblem::new(&x, &y[..3], 5.0, 0.1).is_err());
        assert!(LassoProblem::new(&x, &y, 4.0, 0.1).is_err());
        assert!(LassoProblem::new(&x, &y, 5.0, -1.0).is_err());
        let prob = LassoProblem::new(&x, &y, 5.0, 0.1).unwrap();
        assert!(fit_lasso(&prob, Some(&[0.0])).is_err());
    }

    #[test]
    fn max_sweeps_exhaustion_is_flagged() {
        let (x, y) = small();
        let prob = LassoProblem::new(&x, &y, 5.0, 1e-4).unwrap();
        let opts = LassoOptions {
            max_sweeps: 1,
            ..LassoOptions::default()
        };
        let s = fit_lasso_with(&prob, None, opts).unwrap();
        assert!(!s.converged);
        assert_eq!(s.iterations, 1);
        assert!(s.kkt_residual > 0.0);
    }
}
