use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pddagp::harness::{check_gradients, run_sweep, timing_scan, write_sweep_csv, GradCheckDims, SweepSpec};
use pddagp::model::generate_channels;
use pddagp::{solve, Error, ScenarioConfig, SolverConfig};

#[derive(Parser)]
#[command(name = "pddagp", version, about = "IRS-assisted SWIPT-MIMO weighted sum rate solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario; writes the report as JSON, or the trace if OUT ends in .csv
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        solver: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo sweep over one scenario parameter
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare closed-form gradients with finite differences
    CheckGrad {
        #[arg(long, default_value_t = 50)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-iteration time against surface size
    Timing {
        #[arg(long, value_delimiter = ',', default_value = "100,200,400")]
        ns: Vec<usize>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
    },
    /// Write the convergence trace of one solve as CSV
    Trace {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        solver: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalBreakdown(_)
            | Error::NotPositiveDefinite
            | Error::SpectrumBelowOne { .. }
            | Error::NonFinite
            | Error::NonPsd { .. }
            | Error::NonHermitian { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<fs::File, Failure> {
    fs::File::create(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn load_configs(scenario: &Path, solver: Option<&Path>) -> Result<(ScenarioConfig, SolverConfig), Failure> {
    let cfg = ScenarioConfig::from_json(&read(scenario)?)?;
    let scfg = match solver {
        Some(p) => SolverConfig::from_json(&read(p)?)?,
        None => SolverConfig::default(),
    };
    Ok((cfg, scfg))
}

fn solve_scenario(scenario: &Path, solver: Option<&Path>) -> Result<pddagp::SolveReport, Failure> {
    let (cfg, scfg) = load_configs(scenario, solver)?;
    let ch = generate_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    let report = solve(&ch, &cfg, &scfg)?;
    eprintln!(
        "wsr = {:.4} bits/s/Hz, P_H = {:.4}, feasible = {}, outer = {}, inner = {}, {:.1} ms",
        report.wsr_bits,
        report.harvested_norm,
        report.feasible,
        report.outer_rounds,
        report.inner_iterations,
        report.wall_time.as_secs_f64() * 1e3
    );
    Ok(report)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { scenario, solver, out } => {
            let report = solve_scenario(&scenario, solver.as_deref())?;
            let file = create(&out)?;
            if out.extension().is_some_and(|e| e == "csv") {
                report.write_trace_csv(file)?;
            } else {
                serde_json::to_writer_pretty(file, &report).map_err(|e| Failure::Config(e.to_string()))?;
            }
        }
        Command::Trace { scenario, solver, out } => {
            let report = solve_scenario(&scenario, solver.as_deref())?;
            report.write_trace_csv(create(&out)?)?;
        }
        Command::Sweep { spec, out } => {
            let spec = SweepSpec::from_json(&read(&spec)?)?;
            let result = run_sweep(&spec)?;
            write_sweep_csv(&result.rows, create(&out)?)?;
            for row in &result.rows {
                eprintln!(
                    "{:>10} mean {:.4} bits  feasible {:.2}",
                    row.axis_value, row.mean_wsr_bits, row.feas_rate
                );
            }
        }
        Command::CheckGrad { cases, seed } => {
            let report = check_gradients(GradCheckDims::default(), seed, cases)?;
            println!("cases          {}", report.cases);
            for (name, m) in [("X", &report.x), ("phi", &report.phi)] {
                println!(
                    "{name:<4} max relative {:.3e}, max absolute near zero {:.3e} ({} near-zero)",
                    m.max_rel, m.max_abs_near_zero, m.near_zero
                );
            }
            println!("tolerance relative {:.0e}, absolute {:.0e}", report.rel_tolerance, report.abs_tolerance);
            if !report.passed {
                return Err(Failure::Check("gradient check failed".into()));
            }
            println!("PASS");
        }
        Command::Timing { ns, scenario, seeds } => {
            let cfg = match scenario {
                Some(p) => ScenarioConfig::from_json(&read(&p)?)?,
                None => ScenarioConfig::default(),
            };
            let report = timing_scan(&ns, &cfg, &SolverConfig::default(), seeds)?;
            println!("n_s,us_per_iteration,iterations");
            for p in &report.points {
                println!("{},{:.3},{}", p.n_s, p.us_per_iteration, p.iterations);
            }
            println!("exponent {:.3}", report.exponent);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
