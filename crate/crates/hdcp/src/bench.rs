//! Wall-time comparison of the two-step estimator and the full grid search
//! on identical simulated datasets.

use std::time::Instant;

use hdcp_core::simulation::algorithm_seed;
use hdcp_core::{generate_dataset, run_algorithm1, run_full_grid, AlgorithmConfig, GridConfig, SimulationConfig};

pub const BENCH_HEADER: [&str; 11] = [
    "n",
    "p",
    "tau0",
    "reps",
    "algo1A_time",
    "full_grid_time",
    "ratio",
    "algo1A_pair_fits",
    "algo1A_bic_refits",
    "full_grid_fits",
    "grid_candidates",
];

/// Per-replicate measurements, in index order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchResult {
    pub algo_seconds: Vec<f64>,
    pub grid_seconds: Vec<f64>,
    pub algo_pair_fits: Vec<usize>,
    pub algo_bic_refits: Vec<usize>,
    pub grid_fits: Vec<usize>,
    /// Candidate thresholds inside the grid window, counted independently of the solver.
    pub grid_candidates: Vec<usize>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_usize(v: &[usize]) -> f64 {
    v.iter().sum::<usize>() as f64 / v.len() as f64
}

impl BenchResult {
    pub fn mean_algo_seconds(&self) -> f64 {
        mean(&self.algo_seconds)
    }

    pub fn mean_grid_seconds(&self) -> f64 {
        mean(&self.grid_seconds)
    }

    pub fn ratio(&self) -> f64 {
        self.mean_grid_seconds() / self.mean_algo_seconds()
    }

    pub fn record(&self, config: &SimulationConfig, timed: bool) -> Vec<String> {
        let t = |v: f64| if timed { v.to_string() } else { String::new() };
        vec![
            config.n.to_string(),
            config.p.to_string(),
            crate::monte_carlo::tau0_label(config.tau0),
            self.algo_seconds.len().to_string(),
            t(self.mean_algo_seconds()),
            t(self.mean_grid_seconds()),
            t(self.ratio()),
            mean_usize(&self.algo_pair_fits).to_string(),
            mean_usize(&self.algo_bic_refits).to_string(),
            mean_usize(&self.grid_fits).to_string(),
            mean_usize(&self.grid_candidates).to_string(),
        ]
    }
}

/// Runs both methods serially on replicates `0..replications` of `config`.
/// `config.mu` controls the two-step estimator's `μ`.
pub fn run_bench(config: &SimulationConfig) -> hdcp_core::Result<BenchResult> {
    config.validate()?;
    let mut out = BenchResult::default();
    for index in 0..config.replications {
        let (data, _) = generate_dataset(config, index)?;
        let seed = algorithm_seed(config, index);

        let algo = AlgorithmConfig {
            mu: config.mu.clone(),
            seed,
            ..AlgorithmConfig::default()
        };
        let start = Instant::now();
        let fit = run_algorithm1(&data, &algo)?;
        out.algo_seconds.push(start.elapsed().as_secs_f64());
        out.algo_pair_fits.push(fit.diagnostics.cv_pair_fits);
        out.algo_bic_refits.push(fit.diagnostics.bic_refits);

        let grid = GridConfig {
            seed,
            solver: config.grid_solver,
            ..GridConfig::default()
        };
        let start = Instant::now();
        let g = run_full_grid(&data, &grid)?;
        out.grid_seconds.push(start.elapsed().as_secs_f64());
        out.grid_fits.push(g.solves);
        out.grid_candidates
            .push(hdcp_core::grid_search::grid_candidates(&data, grid.window).len());
    }
    Ok(out)
}
