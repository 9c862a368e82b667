use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hdcp::bench::{run_bench, BENCH_HEADER};
use hdcp::csv_io::{default_names, export_dataset, read_dataset, NamedDataset};
use hdcp::monte_carlo::{append_lines, append_table, run_parallel, METRICS_HEADER};
use hdcp::{fit_dataset, FitOptions, Scheme, WallClock};
use hdcp_core::{generate_dataset, Method, MuSelection, SimulationConfig};

#[derive(Parser)]
#[command(name = "hdcp", version, about = "Change point detection in high-dimensional linear regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the two-step estimator to a CSV file and print a JSON report
    Fit(FitArgs),
    /// Run Monte Carlo tables over a grid of designs
    Simulate(SimulateArgs),
    /// Compare wall time of the two-step estimator and the full grid search
    Bench(BenchArgs),
    /// Write one simulated dataset as CSV
    Export(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with columns y, w and the predictors
    input: PathBuf,
    /// Initializer: A = median of w, B = best of the three quartiles
    #[arg(long, value_enum, default_value = "A")]
    scheme: SchemeArg,
    /// Fixed change point penalty (BIC selection when absent)
    #[arg(long, value_parser = parse_nonneg)]
    mu: Option<f64>,
    /// Center and unit-scale y and every predictor
    #[arg(long)]
    standardize: bool,
    /// Drop predictors whose |correlation with w| exceeds this value
    #[arg(long, value_name = "R", value_parser = parse_unit)]
    drop_correlated: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cross-validation folds
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    folds: u64,
    /// Output file (stdout when absent)
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Leave timings out of the report
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, Debug)]
struct Tau0(Option<f64>);

fn parse_tau0(s: &str) -> Result<Tau0, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(Tau0(None));
    }
    let v: f64 = s.parse().map_err(|_| format!("expected a number in (0, 1) or \"none\", got \"{s}\""))?;
    if v > 0.0 && v < 1.0 {
        Ok(Tau0(Some(v)))
    } else {
        Err(format!("{v} is outside (0, 1)"))
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method \"{s}\" (expected algo1A, algo1B or full_grid)"))
}

fn parse_n(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 10 => Ok(n),
        Ok(n) => Err(format!("{n} is too small (need more than 10 observations)")),
        Err(_) => Err(format!("\"{s}\" is not a positive integer")),
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("\"{s}\" is not a positive integer")),
    }
}

fn parse_nonneg(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("\"{s}\" is not a nonnegative number")),
    }
}

fn parse_unit(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(format!("\"{s}\" is not a number in [0, 1]")),
    }
}

fn parse_rho(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > -1.0 && v < 1.0 => Ok(v),
        _ => Err(format!("\"{s}\" is not a number in (-1, 1)")),
    }
}

#[derive(Args)]
struct DesignArgs {
    /// AR(1) correlation of the predictors
    #[arg(long, default_value_t = 0.5, value_parser = parse_rho, allow_negative_numbers = true)]
    rho: f64,
    /// Noise standard deviation
    #[arg(long, default_value_t = 1.0, value_parser = parse_nonneg)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Sample sizes, comma separated
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_n)]
    n: Vec<usize>,
    /// Dimensions, comma separated
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_positive)]
    p: Vec<usize>,
    /// Change points in (0, 1), or "none" for data without a change
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_tau0)]
    tau0: Vec<Tau0>,
    /// Methods: algo1A, algo1B, full_grid
    #[arg(long, alias = "method", value_delimiter = ',', default_value = "algo1A", value_parser = parse_method)]
    methods: Vec<Method>,
    /// Replications per table row
    #[arg(long, default_value_t = 100, value_parser = parse_positive)]
    reps: usize,
    /// Fixed change point penalty (BIC selection when absent)
    #[arg(long, value_parser = parse_nonneg)]
    mu: Option<f64>,
    #[command(flatten)]
    design: DesignArgs,
    /// Metrics CSV, appended to (stdout when absent)
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Per-replicate JSON-lines log, appended to
    #[arg(long)]
    log: Option<PathBuf>,
    /// Worker threads (rayon default when absent)
    #[arg(long, value_parser = parse_positive)]
    threads: Option<usize>,
    /// Leave the time column empty
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_n)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_positive)]
    p: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.547", value_parser = parse_tau0)]
    tau0: Vec<Tau0>,
    #[arg(long, default_value_t = 3, value_parser = parse_positive)]
    reps: usize,
    /// Fixed change point penalty for the two-step estimator (BIC when absent)
    #[arg(long, value_parser = parse_nonneg)]
    mu: Option<f64>,
    #[command(flatten)]
    design: DesignArgs,
    /// Timing CSV, appended to (stdout when absent)
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Leave the time columns empty
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, value_parser = parse_n)]
    n: usize,
    #[arg(long, value_parser = parse_positive)]
    p: usize,
    #[arg(long, value_parser = parse_tau0)]
    tau0: Tau0,
    /// Replicate index within the seeded sequence
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, short)]
    out: PathBuf,
}

fn design_config(n: usize, p: usize, tau0: Tau0, method: Method, d: &DesignArgs) -> SimulationConfig {
    let mut c = SimulationConfig::new(n, p, tau0.0, method);
    c.rho = d.rho;
    c.sigma_eps = d.sigma;
    c.base_seed = d.seed;
    c
}

fn write_output(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_table(out: Option<&PathBuf>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    match out {
        Some(path) => append_table(path, header, rows).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut wtr = csv::Writer::from_writer(std::io::stdout());
            wtr.write_record(header)?;
            for r in rows {
                wtr.write_record(r)?;
            }
            wtr.flush()?;
            Ok(())
        }
    }
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let named = read_dataset(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let opts = FitOptions {
        scheme: match a.scheme {
            SchemeArg::A => Scheme::A,
            SchemeArg::B => Scheme::B,
        },
        mu: a.mu,
        standardize: a.standardize,
        drop_correlated: a.drop_correlated,
        seed: a.seed,
        k_folds: a.folds as usize,
    };
    let clock = WallClock::new();
    let report = fit_dataset(&named, &opts, (!a.no_timing).then_some(&clock as _)).context("fit failed")?;
    write_output(a.out.as_ref(), &report.to_json())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    if let Some(t) = a.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let mut rows = Vec::new();
    for &method in &a.methods {
        for &n in &a.n {
            for &p in &a.p {
                for &tau0 in &a.tau0 {
                    let mut config = design_config(n, p, tau0, method, &a.design);
                    config.replications = a.reps;
                    if let Some(mu) = a.mu {
                        config.mu = MuSelection::Fixed(mu);
                    }
                    let run = run_parallel(&config, !a.no_timing).with_context(|| {
                        format!("{} n={n} p={p} tau0={}", method.name(), hdcp::monte_carlo::tau0_label(tau0.0))
                    })?;
                    for (i, msg) in run.excluded() {
                        eprintln!("warning: {} n={n} p={p}: replicate {i} excluded: {msg}", method.name());
                    }
                    if let Some(log) = &a.log {
                        append_lines(log, &run.log_lines()).with_context(|| format!("writing {}", log.display()))?;
                    }
                    rows.push(run.record());
                }
            }
        }
    }
    write_table(a.out.as_ref(), &METRICS_HEADER, &rows)
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let mut rows = Vec::new();
    for &n in &a.n {
        for &p in &a.p {
            for &tau0 in &a.tau0 {
                let mut config = design_config(n, p, tau0, Method::Algo1A, &a.design);
                config.replications = a.reps;
                if let Some(mu) = a.mu {
                    config.mu = MuSelection::Fixed(mu);
                }
                let res = run_bench(&config).with_context(|| format!("bench n={n} p={p}"))?;
                if !a.no_timing {
                    eprintln!(
                        "n={n} p={p}: algo1A {:.3}s, full_grid {:.3}s, ratio {:.1}",
                        res.mean_algo_seconds(),
                        res.mean_grid_seconds(),
                        res.ratio()
                    );
                }
                rows.push(res.record(&config, !a.no_timing));
            }
        }
    }
    write_table(a.out.as_ref(), &BENCH_HEADER, &rows)
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let config = design_config(a.n, a.p, a.tau0, Method::Algo1A, &a.design);
    config.validate()?;
    let (data, _) = generate_dataset(&config, a.index)?;
    let named = NamedDataset {
        data,
        predictors: default_names(a.p),
    };
    export_dataset(&a.out, &named).with_context(|| format!("writing {}", a.out.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
