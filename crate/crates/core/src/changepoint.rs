//! ℓ0-penalized threshold update and BIC selection of its penalty.
//!
//! For fixed coefficients the loss `Q(·, β, γ)` is a step function of the
//! threshold that only changes at observed values of `w`, and the ℓ0 term only
//! distinguishes `τ = −∞` from every finite `τ`. The global minimum over the
//! extended line is therefore attained on the finite candidate set
//! `{−∞} ∪ {distinct w}`, which one sorted sweep evaluates in `O(n·p)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lasso::{fit_lasso_with, LassoOptions, LassoProblem};
use crate::model::{
    binary_partition, squared_loss_q, ChangePointEstimate, Dataset, RegimePenalty, RegressionPair,
};
use crate::stats::log_space_desc;

/// How exact ties between candidate objectives are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// No change wins any tie it is part of; otherwise the smallest threshold.
    #[default]
    PreferNoChange,
    /// The smallest finite threshold wins; no change only as a strict minimum.
    SmallestThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step1Result {
    pub tau: ChangePointEstimate,
    /// `Q + μ‖τ‖₀*` per candidate; entry 0 is the no-change candidate, entry
    /// `k + 1` the k-th distinct value of `w`.
    pub objective_values: Vec<f64>,
    /// `Q` alone, same layout.
    pub losses: Vec<f64>,
    pub selected_mu: f64,
}

fn squared_residuals(data: &Dataset, coef: &[f64]) -> Vec<f64> {
    let x = data.x();
    data.y()
        .iter()
        .enumerate()
        .map(|(i, &yi)| {
            let r = yi - x.row_dot(i, coef);
            r * r
        })
        .collect()
}

/// Losses at every candidate, in [`Step1Result::losses`] layout.
pub fn candidate_losses(data: &Dataset, pair: &RegressionPair) -> Result<Vec<f64>> {
    if pair.beta.len() != data.p() || pair.gamma.len() != data.p() {
        return Err(Error::DimensionMismatch {
            what: "coefficient length",
            expected: data.p(),
            got: pair.beta.len().max(pair.gamma.len()),
        });
    }
    let rb = squared_residuals(data, &pair.beta);
    let rg = squared_residuals(data, &pair.gamma);
    let n = data.n() as f64;
    let order = data.sorted_order();
    let mut out = Vec::with_capacity(data.distinct_w().len() + 1);
    let mut s: f64 = rg.iter().sum();
    out.push(s / n);
    let mut pos = 0;
    for &(_, last) in data.distinct_w() {
        while pos <= last {
            let i = order[pos];
            s += rb[i] - rg[i];
            pos += 1;
        }
        out.push(s / n);
    }
    Ok(out)
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("mu must be positive and finite"))
    }
}

fn argmin_with_rule(objective: &[f64], rule: TieRule) -> usize {
    // finite candidates: first (smallest threshold) minimum
    let mut best = 1;
    for k in 2..objective.len() {
        if objective[k] < objective[best] {
            best = k;
        }
    }
    let no_change_wins = match rule {
        TieRule::PreferNoChange => objective[0] <= objective[best],
        TieRule::SmallestThreshold => objective[0] < objective[best],
    };
    if no_change_wins {
        0
    } else {
        best
    }
}

/// Minimizes `Q(τ, β, γ) + μ‖τ‖₀*` over `{−∞} ∪ {w_1, …, w_n}`.
pub fn step1_optimize(
    data: &Dataset,
    pair: &RegressionPair,
    mu: f64,
    tie_rule: TieRule,
) -> Result<Step1Result> {
    check_mu(mu)?;
    let losses = candidate_losses(data, pair)?;
    Ok(step1_from_losses(data, losses, mu, tie_rule))
}

fn step1_from_losses(data: &Dataset, losses: Vec<f64>, mu: f64, tie_rule: TieRule) -> Step1Result {
    let objective_values: Vec<f64> = losses
        .iter()
        .enumerate()
        .map(|(k, &q)| if k == 0 { q } else { q + mu })
        .collect();
    let k = argmin_with_rule(&objective_values, tie_rule);
    let tau = if k == 0 {
        ChangePointEstimate::NoChange
    } else {
        let (threshold, grid_index) = data.distinct_w()[k - 1];
        ChangePointEstimate::Finite {
            threshold,
            grid_index,
        }
    };
    Step1Result {
        tau,
        objective_values,
        losses,
        selected_mu: mu,
    }
}

/// The Step-1 objective at an arbitrary point of the extended line
/// (`None` is `−∞`).
pub fn step1_objective_at(data: &Dataset, pair: &RegressionPair, mu: f64, tau: Option<f64>) -> f64 {
    let x = data.x();
    let mut s = 0.0;
    for (i, (&yi, &wi)) in data.y().iter().zip(data.w()).enumerate() {
        let low = tau.is_some_and(|t| wi <= t);
        let r = yi - x.row_dot(i, if low { &pair.beta } else { &pair.gamma });
        s += r * r;
    }
    s / data.n() as f64 + if tau.is_some() { mu } else { 0.0 }
}

/// Default BIC grid: 50 log-spaced values from `Δ` down to `1e−4·Δ`, where
/// `Δ = max(Q(−∞) − min_τ Q(τ), ε)` is the largest penalty at which the
/// decision can still flip.
pub fn default_mu_grid(data: &Dataset, pair0: &RegressionPair) -> Result<Vec<f64>> {
    let losses = candidate_losses(data, pair0)?;
    let min_finite = losses[1..].iter().copied().fold(f64::INFINITY, f64::min);
    let delta = (losses[0] - min_finite).max(f64::EPSILON);
    // the top value must reach the switching point despite rounding in `min + Δ`
    let top = delta * (1.0 + 1e-12);
    Ok(log_space_desc(top, 1e-4 * top, 50))
}

/// Lasso refit of `(β, γ)` on the partition induced by `tau` at fixed penalties.
/// Empty sides are left at zero; `NoChange` fits one regime on all rows with
/// the γ penalty and duplicates it.
pub fn refit_on_partition(
    data: &Dataset,
    tau: &ChangePointEstimate,
    lambda: RegimePenalty,
    opts: LassoOptions,
) -> Result<(RegressionPair, bool)> {
    let n = data.n() as f64;
    let fit_rows = |rows: &[usize], lam: f64| -> Result<(Vec<f64>, bool)> {
        if rows.is_empty() {
            return Ok((alloc::vec![0.0; data.p()], true));
        }
        let (xs, ys) = data.rows_subset(rows);
        let prob = LassoProblem::new(&xs, &ys, n, lam)?;
        let s = fit_lasso_with(&prob, None, opts)?;
        Ok((s.beta, s.converged))
    };
    let (low, high) = binary_partition(data, tau);
    if tau.is_no_change() {
        let (g, ok) = fit_rows(&high, lambda.gamma)?;
        return Ok((RegressionPair::single(g), ok));
    }
    let (b, ok_b) = fit_rows(&low, lambda.beta)?;
    let (g, ok_g) = fit_rows(&high, lambda.gamma)?;
    Ok((RegressionPair { beta: b, gamma: g }, ok_b && ok_g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BicSelection {
    pub mu: f64,
    pub step1: Step1Result,
    /// Refit on the partition of the winning μ.
    pub refit: RegressionPair,
    /// `(μ, BIC(μ))` in grid order.
    pub bic_curve: Vec<(f64, f64)>,
    /// Distinct partitions refitted.
    pub refits: usize,
    pub refits_converged: bool,
    /// Some candidate had `Q = 0` and used the floored logarithm.
    pub degenerate: bool,
}

/// Chooses μ by `BIC(μ) = log Q(τ̂(μ), β̂(μ), γ̂(μ)) + (log n / n)·‖τ̂(μ)‖₀*`,
/// where the coefficients are refitted on the partition of each `τ̂(μ)`.
/// Ties go to the larger μ. Each distinct partition is refitted once.
pub fn select_mu_bic(
    data: &Dataset,
    pair0: &RegressionPair,
    mu_grid: &[f64],
    lambda_refit: RegimePenalty,
    tie_rule: TieRule,
    opts: LassoOptions,
) -> Result<BicSelection> {
    if mu_grid.is_empty() {
        return Err(Error::invalid("empty mu grid"));
    }
    for &mu in mu_grid {
        check_mu(mu)?;
    }
    if !(lambda_refit.beta >= 0.0 && lambda_refit.gamma >= 0.0) {
        return Err(Error::invalid("refit penalties must be nonnegative"));
    }
    let losses = candidate_losses(data, pair0)?;
    let n = data.n() as f64;
    let penalty = libm::log(n) / n;

    let mut cache: Vec<(ChangePointEstimate, RegressionPair, f64)> = Vec::new();
    let mut curve = Vec::with_capacity(mu_grid.len());
    let mut best: Option<(usize, f64)> = None;
    let mut degenerate = false;
    let mut converged = true;
    for (g, &mu) in mu_grid.iter().enumerate() {
        let step = step1_from_losses(data, losses.clone(), mu, tie_rule);
        let q = match cache.iter().find(|(t, _, _)| *t == step.tau) {
            Some((_, _, q)) => *q,
            None => {
                let (pair, ok) = refit_on_partition(data, &step.tau, lambda_refit, opts)?;
                converged &= ok;
                let q = squared_loss_q(&step.tau, &pair, data)?;
                cache.push((step.tau, pair, q));
                q
            }
        };
        if q <= 0.0 {
            degenerate = true;
        }
        let bic = libm::log(q.max(1e-300)) + penalty * f64::from(step.tau.l0_indicator());
        curve.push((mu, bic));
        best = match best {
            None => Some((g, bic)),
            Some((bg, bb)) if bic < bb || (bic == bb && mu > mu_grid[bg]) => Some((g, bic)),
            keep => keep,
        };
    }
    let (bg, _) = best.expect("grid is nonempty");
    let mu = mu_grid[bg];
    let step1 = step1_from_losses(data, losses, mu, tie_rule);
    let refit = cache
        .iter()
        .find(|(t, _, _)| *t == step1.tau)
        .map(|(_, p, _)| p.clone())
        .expect("winning partition was refitted");
    Ok(BicSelection {
        mu,
        step1,
        refit,
        bic_curve: curve,
        refits: cache.len(),
        refits_converged: converged,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use alloc::vec;

    fn data() -> Dataset {
        let x = Matrix::from_rows(&[[1.0, 0.5], [0.2, -1.0], [-0.4, 0.3], [1.1, 0.9], [0.0, 1.0]])
            .unwrap();
        Dataset::new(vec![1.0, -0.5, 0.2, 2.0, 0.7], x, vec![0.9, 0.1, 0.5, 0.3, 0.7]).unwrap()
    }

    #[test]
    fn penalty_above_no_change_loss_forces_no_change() {
        let d = data();
        let pair = RegressionPair::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let q0 = squared_loss_q(&ChangePointEstimate::NoChange, &pair, &d).unwrap();
        let r = step1_optimize(&d, &pair, q0 * 1.01, TieRule::default()).unwrap();
        assert_eq!(r.tau, ChangePointEstimate::NoChange);
        assert_eq!(r.objective_values.len(), 6);
    }

    #[test]
    fn tie_rules_differ_only_on_exact_ties() {
        let d = data();
        // beta == gamma: every finite candidate costs exactly Q0 + mu
        let pair = RegressionPair::single(vec![0.3, 0.3]);
        let r = step1_optimize(&d, &pair, 1e-3, TieRule::PreferNoChange).unwrap();
        assert_eq!(r.tau, ChangePointEstimate::NoChange);
        let mut losses = candidate_losses(&d, &pair).unwrap();
        // make no change tie with the best finite candidate exactly
        losses[0] = losses[3] + 0.5;
        let s = step1_from_losses(&d, losses.clone(), 0.5, TieRule::SmallestThreshold);
        assert!(!s.tau.is_no_change());
        let s = step1_from_losses(&d, losses, 0.5, TieRule::PreferNoChange);
        assert!(s.tau.is_no_change());
    }

    #[test]
    fn invalid_mu() {
        let d = data();
        let pair = RegressionPair::zeros(2);
        assert!(step1_optimize(&d, &pair, 0.0, TieRule::default()).is_err());
        assert!(step1_optimize(&d, &pair, f64::NAN, TieRule::default()).is_err());
    }

    #[test]
    fn single_mu_grid_returns_it() {
        let d = data();
        let pair = RegressionPair::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let sel = select_mu_bic(&d, &pair, &[0.05], RegimePenalty::both(0.01), TieRule::default(), LassoOptions::default())
            .unwrap();
        assert_eq!(sel.mu, 0.05);
        assert_eq!(sel.bic_curve.len(), 1);
    }

    #[test]
    fn identical_partitions_tie_toward_larger_mu() {
        let d = data();
        let pair = RegressionPair::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let losses = candidate_losses(&d, &pair).unwrap();
        let min_finite = losses[1..].iter().copied().fold(f64::INFINITY, f64::min);
        // both values lie below the switching point, so they share one partition
        let grid = [1e-6, 2e-6];
        assert!(2e-6 < losses[0] - min_finite || losses[0] <= min_finite);
        let sel = select_mu_bic(&d, &pair, &grid, RegimePenalty::both(0.01), TieRule::default(), LassoOptions::default())
            .unwrap();
        assert_eq!(sel.bic_curve[0].1, sel.bic_curve[1].1);
        assert_eq!(sel.mu, 2e-6);
        assert_eq!(sel.refits, 1);
    }

    #[test]
    fn default_grid_spans_the_decision_boundary() {
        let d = data();
        let pair = RegressionPair::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let grid = default_mu_grid(&d, &pair).unwrap();
        assert_eq!(grid.len(), 50);
        let top = step1_optimize(&d, &pair, grid[0], TieRule::default()).unwrap();
        assert!(top.tau.is_no_change());
        assert!((grid[49] / grid[0] - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_is_floored() {
        // noise-free single regime with an exact refit target
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let d = Dataset::new(vec![0.0, 0.0, 0.0], x, vec![0.1, 0.2, 0.3]).unwrap();
        let sel = select_mu_bic(&d, &RegressionPair::zeros(1), &[0.1], RegimePenalty::both(0.1), TieRule::default(), LassoOptions::default())
            .unwrap();
        assert!(sel.degenerate);
        assert!(sel.bic_curve[0].1.is_finite());
    }
}
