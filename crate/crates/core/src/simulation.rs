//! Seeded data generators for the change-point and no-change designs, the
//! boundary rule used when comparing against a finite truth, and Monte Carlo
//! metrics.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid_search::{run_full_grid, GridConfig, GridSolver};
use crate::matrix::Matrix;
use crate::model::{ChangePointEstimate, Dataset, RegressionPair};
use crate::two_step::{run_algorithm1_timed, AlgorithmConfig, Clock, InitScheme, MuSelection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Algo1A,
    Algo1B,
    FullGrid,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Algo1A => "algo1A",
            Method::Algo1B => "algo1B",
            Method::FullGrid => "full_grid",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "algo1A" | "algo1a" | "A" => Some(Method::Algo1A),
            "algo1B" | "algo1b" | "B" => Some(Method::Algo1B),
            "full_grid" | "grid" => Some(Method::FullGrid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    /// `None` generates data without a change point.
    pub tau0: Option<f64>,
    pub rho: f64,
    pub sigma_eps: f64,
    pub replications: usize,
    pub base_seed: u64,
    pub method: Method,
    pub beta0: Vec<f64>,
    pub gamma0: Vec<f64>,
    pub mu: MuSelection,
    pub grid_solver: GridSolver,
}

impl SimulationConfig {
    /// Default design: `ρ = 0.5`, `σ = 1`, `β₀ = (1,1,1,1,0,…)`,
    /// `γ₀ = (0,0,0,0,1,1,1,1,0,…)`, 100 replications, BIC-selected `μ`.
    pub fn new(n: usize, p: usize, tau0: Option<f64>, method: Method) -> Self {
        let beta0 = (0..p).map(|j| if j < 4 { 1.0 } else { 0.0 }).collect();
        let gamma0 = (0..p).map(|j| if (4..8).contains(&j) { 1.0 } else { 0.0 }).collect();
        SimulationConfig {
            n,
            p,
            tau0,
            rho: 0.5,
            sigma_eps: 1.0,
            replications: 100,
            base_seed: 0,
            method,
            beta0,
            gamma0,
            mu: MuSelection::Bic,
            grid_solver: GridSolver::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 {
            return Err(Error::invalid("simulation needs n >= 2 and p >= 1"));
        }
        if let Some(t) = self.tau0 {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::invalid("tau0 must lie in (0, 1)"));
            }
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::invalid("rho must lie in (-1, 1)"));
        }
        if !(self.sigma_eps >= 0.0) || !self.sigma_eps.is_finite() {
            return Err(Error::invalid("sigma_eps must be a nonnegative number"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        for (name, v) in [("beta0", &self.beta0), ("gamma0", &self.gamma0)] {
            if v.len() != self.p {
                return Err(Error::DimensionMismatch {
                    what: name,
                    expected: self.p,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// Ground truth of one generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub beta0: Vec<f64>,
    pub gamma0: Vec<f64>,
    pub tau0: Option<f64>,
}

impl Truth {
    pub fn of(config: &SimulationConfig) -> Self {
        Truth {
            beta0: config.beta0.clone(),
            gamma0: config.gamma0.clone(),
            tau0: config.tau0,
        }
    }
}

/// `Σ_ij = ρ^|i−j|`.
pub fn ar1_covariance(p: usize, rho: f64) -> Matrix {
    let mut s = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            s.set(i, j, libm::pow(rho, (i as f64 - j as f64).abs()));
        }
    }
    s
}

/// Lower-triangular `L` with `L Lᵀ = Σ`.
pub fn cholesky(sigma: &Matrix) -> Result<Matrix> {
    let p = sigma.rows();
    if sigma.cols() != p {
        return Err(Error::DimensionMismatch {
            what: "covariance columns",
            expected: p,
            got: sigma.cols(),
        });
    }
    let mut l = Matrix::zeros(p, p);
    for j in 0..p {
        let mut d = sigma.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) {
            return Err(Error::invalid("covariance is not positive definite"));
        }
        let d = libm::sqrt(d);
        l.set(j, j, d);
        for i in j + 1..p {
            let mut s = sigma.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    Ok(l)
}

fn stream_rng(base: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng
}

/// Seed handed to the estimator for replicate `index`.
pub fn algorithm_seed(config: &SimulationConfig, index: usize) -> u64 {
    stream_rng(config.base_seed, 2 * index as u64 + 1).next_u64()
}

/// Draws replicate `index`. Each replicate owns its RNG stream, so results do
/// not depend on the order in which replicates are generated.
pub fn generate_dataset(config: &SimulationConfig, index: usize) -> Result<(Dataset, Truth)> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let chol = cholesky(&ar1_covariance(p, config.rho))?;
    let mut rng = stream_rng(config.base_seed, 2 * index as u64);
    let mut x = Matrix::zeros(n, p);
    let mut w = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = vec![0.0; p];
    for i in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for r in 0..p {
            let s: f64 = z[..=r].iter().enumerate().map(|(k, zk)| chol.get(r, k) * zk).sum();
            x.set(i, r, s);
        }
        let wi: f64 = rng.random();
        let eps: f64 = rng.sample::<f64, _>(StandardNormal) * config.sigma_eps;
        let coef = match config.tau0 {
            Some(t) if wi <= t => &config.beta0,
            _ => &config.gamma0,
        };
        y.push(x.row_dot(i, coef) + eps);
        w.push(wi);
    }
    Ok((Dataset::new(y, x, w)?, Truth::of(config)))
}

/// Threshold after the boundary rule: either still "no change" or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdjustedTau {
    NoChange,
    Value(f64),
}

impl AdjustedTau {
    pub fn value(self) -> Option<f64> {
        match self {
            AdjustedTau::NoChange => None,
            AdjustedTau::Value(v) => Some(v),
        }
    }
}

/// A method's estimate in the form the metrics consume.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateEstimate {
    pub tau: AdjustedTau,
    pub pair: RegressionPair,
    /// Whether the method itself returned "no change" (kept across the rule).
    pub detected_no_change: bool,
}

impl ReplicateEstimate {
    pub fn from_estimate(tau: &ChangePointEstimate, pair: RegressionPair) -> Self {
        ReplicateEstimate {
            tau: match tau.threshold() {
                None => AdjustedTau::NoChange,
                Some(t) => AdjustedTau::Value(t),
            },
            pair,
            detected_no_change: tau.is_no_change(),
        }
    }
}

/// Maps a "no change" answer onto the nearest boundary of `(0, 1)` relative to
/// a finite truth: `τ₀ ≤ 0.5` gives `τ̂ = 0, β̂ = 0`; otherwise `τ̂ = 1, γ̂ = 0`.
pub fn apply_boundary_rule(estimate: &ReplicateEstimate, tau0: f64) -> ReplicateEstimate {
    let mut out = estimate.clone();
    if let AdjustedTau::NoChange = estimate.tau {
        if tau0 <= 0.5 {
            out.tau = AdjustedTau::Value(0.0);
            out.pair.beta.iter_mut().for_each(|v| *v = 0.0);
        } else {
            out.tau = AdjustedTau::Value(1.0);
            out.pair.gamma.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub bias_beta: f64,
    pub bias_gamma: f64,
    pub bias_tau: Option<f64>,
    pub mse_beta: f64,
    pub mse_gamma: f64,
    pub mse_tau: Option<f64>,
    pub mse_phi_tau: Option<f64>,
    /// Share of "no change" answers; only with a no-change truth.
    pub prm: Option<f64>,
    pub mean_time_seconds: f64,
    pub used: usize,
    pub excluded: usize,
}

fn bias_and_mse(vectors: &[&[f64]], truth: &[f64]) -> (f64, f64) {
    let m = vectors.len() as f64;
    let mut bias = 0.0;
    let mut mse = 0.0;
    for (j, t) in truth.iter().enumerate() {
        let mut d = 0.0;
        let mut d2 = 0.0;
        for v in vectors {
            let e = v[j] - t;
            d += e;
            d2 += e * e;
        }
        bias += (d / m) * (d / m);
        mse += (d2 / m) * (d2 / m);
    }
    (libm::sqrt(bias), libm::sqrt(mse))
}

/// Monte Carlo means over `(estimate, seconds)` pairs. With a finite truth the
/// estimates must already carry numeric thresholds; with a no-change truth both
/// coefficient vectors are compared against `γ₀`.
pub fn compute_metrics(estimates: &[(ReplicateEstimate, f64)], truth: &Truth) -> Result<MetricsRow> {
    if estimates.is_empty() {
        return Err(Error::invalid("no estimates to aggregate"));
    }
    let m = estimates.len() as f64;
    let betas: Vec<&[f64]> = estimates.iter().map(|(e, _)| e.pair.beta.as_slice()).collect();
    let gammas: Vec<&[f64]> = estimates.iter().map(|(e, _)| e.pair.gamma.as_slice()).collect();
    for v in betas.iter().chain(&gammas) {
        if v.len() != truth.gamma0.len() {
            return Err(Error::DimensionMismatch {
                what: "estimate coefficients",
                expected: truth.gamma0.len(),
                got: v.len(),
            });
        }
    }
    let beta_truth = if truth.tau0.is_some() { &truth.beta0 } else { &truth.gamma0 };
    let (bias_beta, mse_beta) = bias_and_mse(&betas, beta_truth);
    let (bias_gamma, mse_gamma) = bias_and_mse(&gammas, &truth.gamma0);
    let mean_time_seconds = estimates.iter().map(|(_, t)| t).sum::<f64>() / m;

    let (bias_tau, mse_tau, mse_phi_tau, prm) = match truth.tau0 {
        Some(t0) => {
            let mut d = 0.0;
            let mut d2 = 0.0;
            let mut dphi = 0.0;
            for (e, _) in estimates {
                let t = e
                    .tau
                    .value()
                    .ok_or_else(|| Error::invalid("apply the boundary rule before aggregating"))?;
                d += t - t0;
                d2 += (t - t0) * (t - t0);
                let phi = t.clamp(0.0, 1.0) - t0;
                dphi += phi * phi;
            }
            (Some((d / m).abs()), Some(d2 / m), Some(dphi / m), None)
        }
        None => {
            let hits = estimates.iter().filter(|(e, _)| e.detected_no_change).count();
            (None, None, None, Some(hits as f64 / m))
        }
    };
    Ok(MetricsRow {
        bias_beta,
        bias_gamma,
        bias_tau,
        mse_beta,
        mse_gamma,
        mse_tau,
        mse_phi_tau,
        prm,
        mean_time_seconds,
        used: estimates.len(),
        excluded: 0,
    })
}

/// Everything recorded about a single replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub index: usize,
    pub raw: ReplicateEstimate,
    /// After the boundary rule (identical to `raw` under a no-change truth).
    pub adjusted: ReplicateEstimate,
    pub seconds: f64,
    /// Cross-validated pair fits (two-step) or grid solves (full grid).
    pub lasso_solves: usize,
    pub initializer: Option<f64>,
}

/// One generate → fit → boundary-rule cycle.
pub fn run_replicate(config: &SimulationConfig, index: usize, clock: &dyn Clock) -> Result<ReplicateOutcome> {
    let (data, _) = generate_dataset(config, index)?;
    let seed = algorithm_seed(config, index);
    let start = clock.seconds();
    let (raw, solves, init) = match config.method {
        Method::Algo1A | Method::Algo1B => {
            let algo = AlgorithmConfig {
                scheme: if config.method == Method::Algo1A {
                    InitScheme::Median
                } else {
                    InitScheme::Quartiles
                },
                mu: config.mu.clone(),
                seed,
                ..AlgorithmConfig::default()
            };
            let fit = run_algorithm1_timed(&data, &algo, clock)?;
            (
                ReplicateEstimate::from_estimate(&fit.tau, fit.coefficients),
                fit.diagnostics.cv_pair_fits,
                Some(fit.initializer_used),
            )
        }
        Method::FullGrid => {
            let grid = GridConfig {
                seed,
                solver: config.grid_solver,
                ..GridConfig::default()
            };
            let fit = run_full_grid(&data, &grid)?;
            let tau = data.tau_at(fit.tau_hat)?;
            (ReplicateEstimate::from_estimate(&tau, fit.pair), fit.solves, None)
        }
    };
    let seconds = clock.seconds() - start;
    let adjusted = match config.tau0 {
        Some(t0) => apply_boundary_rule(&raw, t0),
        None => raw.clone(),
    };
    Ok(ReplicateOutcome {
        index,
        raw,
        adjusted,
        seconds,
        lasso_solves: solves,
        initializer: init,
    })
}

/// Aggregates replicate results in index order; failed replicates are counted
/// in `excluded` together with their messages.
pub fn aggregate(
    config: &SimulationConfig,
    results: &[core::result::Result<ReplicateOutcome, String>],
) -> Result<(MetricsRow, Vec<(usize, String)>)> {
    let mut ok = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok(o) => ok.push((o.adjusted.clone(), o.seconds)),
            Err(msg) => failed.push((i, msg.clone())),
        }
    }
    if ok.is_empty() {
        return Err(Error::invalid("every replicate failed"));
    }
    let mut row = compute_metrics(&ok, &Truth::of(config))?;
    row.excluded = failed.len();
    Ok((row, failed))
}

/// Serial Monte Carlo run over all replicates.
pub fn run_monte_carlo(config: &SimulationConfig, clock: &dyn Clock) -> Result<(MetricsRow, Vec<ReplicateOutcome>)> {
    config.validate()?;
    let results: Vec<_> = (0..config.replications)
        .map(|i| run_replicate(config, i, clock).map_err(|e| alloc::format!("{e}")))
        .collect();
    let (row, _) = aggregate(config, &results)?;
    Ok((row, results.into_iter().filter_map(|r| r.ok()).collect()))
}
