//! The two-step estimator: Lasso pair on an initial partition, one ℓ0-penalized
//! threshold update, Lasso pair on the updated partition.

use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::changepoint::{default_mu_grid, select_mu_bic, step1_optimize, TieRule};
use crate::error::{Error, Result};
use crate::lasso::{fit_lasso_cv, LassoOptions, PathSpec};
use crate::model::{
    binary_partition, partition_at, squared_loss_q, ChangePointEstimate, Dataset, FitDiagnostics,
    RegimePenalty, RegressionPair, TwoStepFit,
};
use crate::stats::empirical_quantile_sorted;

/// Source of elapsed seconds. The core never reads a clock on its own.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// A clock that never advances; all step timings come out as zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// Choice of the initial threshold `τ⁽⁰⁾`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// Empirical median of `w` (lower median for even `n`).
    Median,
    /// Best of the 0.25/0.50/0.75 empirical quantiles by Step-0 loss.
    Quartiles,
    /// A user-supplied threshold.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MuSelection {
    Fixed(f64),
    /// BIC over the default grid.
    Bic,
    /// BIC over a caller-supplied grid.
    BicGrid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    pub scheme: InitScheme,
    pub k_folds: usize,
    pub path: PathSpec,
    pub mu: MuSelection,
    pub seed: u64,
    pub tie_rule: TieRule,
    pub lasso: LassoOptions,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            scheme: InitScheme::Median,
            k_folds: 5,
            path: PathSpec::default(),
            mu: MuSelection::Bic,
            seed: 0,
            tie_rule: TieRule::default(),
            lasso: LassoOptions::default(),
        }
    }
}

// Independent RNG streams for every cross-validation call site.
const STREAM_STEP0: u64 = 0;
const STREAM_STEP2: u64 = 2;
const STREAM_STEP2_SINGLE: u64 = 4;
const STREAM_Q25: u64 = 10;
const STREAM_Q75: u64 = 12;

pub(crate) fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.next_u64()
}

struct PairFit {
    pair: RegressionPair,
    lambda: RegimePenalty,
    converged: bool,
}

fn cv_side(data: &Dataset, rows: &[usize], config: &AlgorithmConfig, stream: u64) -> Result<(Vec<f64>, f64, bool)> {
    let (xs, ys) = data.rows_subset(rows);
    let fit = fit_lasso_cv(
        &xs,
        &ys,
        data.n() as f64,
        config.k_folds,
        config.path,
        derive_seed(config.seed, stream),
        config.lasso,
    )?;
    Ok((fit.solution.beta, fit.lambda, fit.solution.converged))
}

/// Two independent cross-validated Lasso fits on `LOW` and `HIGH`.
fn cv_pair(data: &Dataset, low: &[usize], high: &[usize], config: &AlgorithmConfig, stream: u64) -> Result<PairFit> {
    let (beta, lb, ok_b) = cv_side(data, low, config, stream)?;
    let (gamma, lg, ok_g) = cv_side(data, high, config, stream + 1)?;
    Ok(PairFit {
        pair: RegressionPair { beta, gamma },
        lambda: RegimePenalty {
            beta: lb,
            gamma: lg,
        },
        converged: ok_b && ok_g,
    })
}

/// A quartile candidate and its Step-0 loss (`None` when skipped).
pub type CandidateLoss = (f64, Option<f64>);

struct Initialization {
    tau0: f64,
    step0: PairFit,
    pair_fits: usize,
    losses: Vec<CandidateLoss>,
}

fn initialize(data: &Dataset, config: &AlgorithmConfig) -> Result<Initialization> {
    let sorted = data.sorted_w();
    let single = |t: f64| -> Result<Initialization> {
        let (low, high) = partition_at(data, t);
        if low.is_empty() || high.is_empty() {
            return Err(Error::DegeneratePartition(alloc::format!(
                "initial threshold {t} leaves one side of the partition empty"
            )));
        }
        Ok(Initialization {
            tau0: t,
            step0: cv_pair(data, &low, &high, config, STREAM_STEP0)?,
            pair_fits: 1,
            losses: Vec::new(),
        })
    };
    match config.scheme {
        InitScheme::Median => single(empirical_quantile_sorted(&sorted, 0.5)),
        InitScheme::Fixed(t) => {
            if !t.is_finite() {
                return Err(Error::invalid("initial threshold must be finite"));
            }
            single(t)
        }
        InitScheme::Quartiles => {
            let mut best: Option<(f64, PairFit, f64)> = None;
            let mut losses = Vec::with_capacity(3);
            let mut fits = 0;
            // the median candidate shares the Step-0 stream so that picking it
            // reproduces the median initializer exactly
            for (q, stream) in [(0.25, STREAM_Q25), (0.5, STREAM_STEP0), (0.75, STREAM_Q75)] {
                let t = empirical_quantile_sorted(&sorted, q);
                let (low, high) = partition_at(data, t);
                if low.is_empty() || high.is_empty() {
                    losses.push((t, None));
                    continue;
                }
                let fit = cv_pair(data, &low, &high, config, stream)?;
                fits += 1;
                let tau = data.tau_at(t)?;
                let loss = squared_loss_q(&tau, &fit.pair, data)?;
                losses.push((t, Some(loss)));
                if best.as_ref().is_none_or(|b| loss < b.2) {
                    best = Some((t, fit, loss));
                }
            }
            let (tau0, step0, _) = best.ok_or_else(|| {
                Error::DegeneratePartition("every quartile candidate leaves a partition empty".into())
            })?;
            Ok(Initialization {
                tau0,
                step0,
                pair_fits: fits,
                losses,
            })
        }
    }
}

/// Picks `τ⁽⁰⁾` by the configured scheme. Returns the threshold and, for the
/// quartile scheme, the `(candidate, Step-0 loss)` list (`None` for skipped
/// candidates).
pub fn initialize_tau(data: &Dataset, config: &AlgorithmConfig) -> Result<(f64, Vec<CandidateLoss>)> {
    let init = initialize(data, config)?;
    Ok((init.tau0, init.losses))
}

/// Runs the estimator without timing.
pub fn run_algorithm1(data: &Dataset, config: &AlgorithmConfig) -> Result<TwoStepFit> {
    run_algorithm1_timed(data, config, &NoClock)
}

/// Runs Steps 0–2, reading `clock` at step boundaries.
pub fn run_algorithm1_timed(data: &Dataset, config: &AlgorithmConfig, clock: &dyn Clock) -> Result<TwoStepFit> {
    if config.k_folds < 2 {
        return Err(Error::invalid("k_folds must be at least 2"));
    }
    if data.n() <= 2 * config.k_folds {
        return Err(Error::invalid("need more than 2·k_folds observations"));
    }
    let mut diag = FitDiagnostics {
        all_converged: true,
        ..FitDiagnostics::default()
    };
    let t0 = clock.seconds();

    // Step 0
    let init = initialize(data, config)?;
    diag.cv_pair_fits += init.pair_fits;
    diag.cv_partition_fits += 2 * init.pair_fits;
    diag.all_converged &= init.step0.converged;
    diag.initializer_losses = init.losses;
    let pair0 = init.step0.pair;
    let lambda1 = init.step0.lambda;
    let t1 = clock.seconds();

    // Step 1
    let (step1, mu) = match &config.mu {
        MuSelection::Fixed(mu) => (step1_optimize(data, &pair0, *mu, config.tie_rule)?, *mu),
        MuSelection::Bic | MuSelection::BicGrid(_) => {
            let grid = match &config.mu {
                MuSelection::BicGrid(g) => g.clone(),
                _ => default_mu_grid(data, &pair0)?,
            };
            let sel = select_mu_bic(data, &pair0, &grid, lambda1, config.tie_rule, config.lasso)?;
            diag.bic_refits += sel.refits;
            diag.bic_degenerate = sel.degenerate;
            diag.all_converged &= sel.refits_converged;
            (sel.step1, sel.mu)
        }
    };
    let tau = step1.tau;
    let t2 = clock.seconds();

    // Step 2
    let (low, high) = binary_partition(data, &tau);
    let (coefficients, lambda2) = if tau.is_no_change() {
        let (g, lam, ok) = cv_side(data, &high, config, STREAM_STEP2_SINGLE)?;
        diag.cv_pair_fits += 1;
        diag.cv_partition_fits += 1;
        diag.single_regime = true;
        diag.all_converged &= ok;
        (RegressionPair::single(g), RegimePenalty::both(lam))
    } else {
        let fit = cv_pair(data, &low, &high, config, STREAM_STEP2)?;
        diag.cv_pair_fits += 1;
        diag.cv_partition_fits += 2;
        diag.all_converged &= fit.converged;
        (fit.pair, fit.lambda)
    };
    let t3 = clock.seconds();

    let final_loss = squared_loss_q(&tau, &coefficients, data)?;
    Ok(TwoStepFit {
        coefficients,
        tau,
        lambda1,
        lambda2,
        mu,
        final_loss,
        initializer_used: init.tau0,
        wall_time_step: [t1 - t0, t2 - t1, t3 - t2],
        diagnostics: diag,
    })
}

/// Convenience: the change point for a fit as an optional threshold.
pub fn fitted_threshold(fit: &TwoStepFit) -> Option<f64> {
    match fit.tau {
        ChangePointEstimate::NoChange => None,
        ChangePointEstimate::Finite { threshold, .. } => Some(threshold),
    }
}
