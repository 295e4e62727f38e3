use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use bell_efficiency::chshn::{self, IteratedChsh};
use bell_efficiency::distribution::{chsh_optimal_single_copy, tensor_power};
use bell_efficiency::efficiency::{deflate, EfficiencyModel, Policy};
use bell_efficiency::error::{Error, Result};
use bell_efficiency::functional::{BellFunctional, Layout};
use bell_efficiency::gilbert::{gilbert_distance, GilbertConfig};
use bell_efficiency::local::{local_bound_exact, local_bound_heuristic, OracleMode};
use bell_efficiency::report::{self, reproduce, RunConfig, Target};
use bell_efficiency::separation::{
    deflated_target, rationalize, separate, threshold_by_bisection, BisectionConfig, Coordinates, EfficiencyMode,
    SeparationProblem, VertexSource,
};
use bell_efficiency::thresholds::profile;

#[derive(Parser)]
#[command(name = "bell-eff", version, about = "Detection-efficiency thresholds for multi-copy Bell tests")]
struct Cli {
    /// Worker threads; 0 lets rayon decide.
    #[arg(long, global = true, env = "BELL_EFF_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bound {
    Exact,
    Heuristic,
}

#[derive(Subcommand)]
enum Command {
    /// Print the n-copy optimal distribution, optionally deflated.
    Distribution {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eta: Option<f64>,
        /// Bob's efficiency; defaults to `--eta`.
        #[arg(long)]
        eta_b: Option<f64>,
        #[arg(long, default_value = "last")]
        policy: Policy,
    },
    /// Iterated CHSH: local and quantum values, or the threshold table.
    Chshn {
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        table: Vec<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum, default_value = "exact")]
        bound: Bound,
        #[arg(long, default_value_t = 1000)]
        restarts: usize,
        #[arg(long, default_value_t = report::DEFAULT_SEED)]
        seed: u64,
        /// Emit the table as CSV instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Local bound of a functional in block text.
    LocalBound {
        functional: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        bound: Bound,
        #[arg(long, default_value_t = 1000)]
        restarts: usize,
        #[arg(long, default_value_t = report::DEFAULT_SEED)]
        seed: u64,
    },
    /// LP membership test at one efficiency, or a bisection for the threshold.
    LpSeparate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "sym")]
        mode: EfficiencyMode,
        #[arg(long, default_value = "last")]
        policy: Policy,
        /// Efficiency to test; without it the threshold is bisected.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        low: Option<f64>,
        #[arg(long)]
        high: Option<f64>,
        /// Enumerate every vertex up front instead of generating them.
        #[arg(long)]
        enumerate: bool,
        /// Work in full-table coordinates.
        #[arg(long)]
        full: bool,
        /// Write the separating functional here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gilbert distance from the deflated point to the local polytope.
    Gilbert {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 2000)]
        iterations: usize,
        #[arg(long, default_value_t = report::GILBERT_MEMORY)]
        memory: usize,
        #[arg(long, default_value_t = report::GILBERT_RESTARTS)]
        restarts: usize,
        #[arg(long, default_value_t = report::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = report::GILBERT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = report::GILBERT_DENOMINATOR)]
        denominator: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Q, M_A, M_B, X, L and the thresholds of a functional.
    Threshold {
        functional: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "last")]
        policy: Policy,
    },
    /// Run a pinned pipeline and compare against the expected values.
    Reproduce {
        target: Target,
        #[arg(long, default_value = "reproduce-out")]
        out: PathBuf,
        #[arg(long, default_value_t = report::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        gilbert_iterations: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Invariant(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(line: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match writeln!(out, "{line}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    emit(&serde_json::to_string_pretty(value)?)
}

fn oracle(bound: Bound, restarts: usize, seed: u64) -> OracleMode {
    match bound {
        Bound::Exact => OracleMode::Exact,
        Bound::Heuristic => OracleMode::Heuristic { restarts, seed },
    }
}

fn write_functional(path: &PathBuf, f: &BellFunctional) -> Result<()> {
    let layout = if f.is_reduced() { Layout::Reduced } else { Layout::Full };
    fs::write(path, f.to_block_text(layout)?)?;
    Ok(())
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Distribution { n, eta, eta_b, policy } => {
            let dist = tensor_power(&chsh_optimal_single_copy(), n)?;
            match eta {
                None => emit(&dist.to_json()?)?,
                Some(eta) => {
                    let model = EfficiencyModel::new(eta, eta_b.unwrap_or(eta), policy)?;
                    print_json(deflate(&dist, model).table())?;
                }
            }
        }
        Command::Chshn { table, n, bound, restarts, seed, csv } => {
            if !table.is_empty() {
                let rows = chshn::table1(&table)?;
                if csv {
                    emit("n,l,source,eta_sym,eta_asym,l_empirical,eta_sym_empirical,eta_asym_empirical")?;
                    for r in &rows {
                        let p = r.primary;
                        let e = r.empirical.map_or(",,".to_string(), |e| format!("{},{},{}", e.l, e.eta_sym, e.eta_asym));
                        emit(&format!("{},{},{:?},{},{},{e}", r.n, p.l, p.source, p.eta_sym, p.eta_asym))?;
                    }
                } else {
                    print_json(&rows)?;
                }
            }
            if let Some(n) = n {
                let game = IteratedChsh::build(n)?;
                let local = chshn::local_bound(n, oracle(bound, restarts, seed))?;
                print_json(&json!({
                    "n": game.copies(),
                    "local": local,
                    "quantum": chshn::quantum_value(n)?,
                    "ambainis": chshn::ambainis_bound(n),
                    "seed": seed,
                }))?;
            }
        }
        Command::LocalBound { functional, bound, restarts, seed } => {
            let f = BellFunctional::parse_block_text(&fs::read_to_string(functional)?)?;
            let local = match bound {
                Bound::Exact => local_bound_exact(&f)?,
                Bound::Heuristic => local_bound_heuristic(&f, restarts, seed),
            };
            print_json(&local)?;
        }
        Command::LpSeparate { n, mode, policy, eta, low, high, enumerate, full, out } => {
            let dist = tensor_power(&chsh_optimal_single_copy(), n)?;
            let coordinates = if full { Coordinates::Full } else { Coordinates::CollinsGisin };
            let functional = match eta {
                Some(eta) => {
                    let source = if enumerate { VertexSource::Enumerate } else { VertexSource::Generate };
                    let problem = SeparationProblem::new(deflated_target(&dist, policy, mode, eta)?)
                        .with_coordinates(coordinates)
                        .with_source(source);
                    let r = separate(&problem)?;
                    print_json(&json!({ "eta": eta, "mode": mode, "policy": policy, "result": r }))?;
                    r.functional
                }
                None => {
                    let mut config = BisectionConfig::for_mode(mode);
                    config.low = low.unwrap_or(config.low);
                    config.high = high.unwrap_or(config.high);
                    let b = threshold_by_bisection(&dist, policy, mode, coordinates, config)?;
                    print_json(&json!({ "mode": mode, "policy": policy, "bisection": b }))?;
                    b.at_eta.functional
                }
            };
            if let Some(path) = out {
                write_functional(&path, &functional)?;
            }
        }
        Command::Gilbert { n, eta, iterations, memory, restarts, seed, epsilon, denominator, out } => {
            let dist = tensor_power(&chsh_optimal_single_copy(), n)?;
            let target = deflate(&dist, EfficiencyModel::symmetric(eta, Policy::LastOutcome)?).into_table();
            let config = GilbertConfig::new(epsilon, memory, iterations, OracleMode::Heuristic { restarts, seed })?
                .with_symmetrization(true, false);
            let run = gilbert_distance(&target, &config)?;
            let rational = rationalize(&run.witness.functional(dist.inputs(), dist.outputs()), denominator)?;
            let thresholds = profile(&rational, &dist, Policy::LastOutcome)?.with_thresholds();
            print_json(&json!({
                "eta": eta,
                "config": config,
                "status": run.status,
                "iterations": run.iterations,
                "distance": run.witness.distance,
                "profile": thresholds,
            }))?;
            if let Some(path) = out {
                write_functional(&path, &rational)?;
            }
        }
        Command::Threshold { functional, n, policy } => {
            let f = BellFunctional::parse_block_text(&fs::read_to_string(functional)?)?;
            let dist = tensor_power(&chsh_optimal_single_copy(), n)?;
            print_json(&profile(&f, &dist, policy)?.with_thresholds())?;
        }
        Command::Reproduce { target, out, seed, gilbert_iterations } => {
            let mut config = RunConfig::new(format!("reproduce {target}"), seed);
            config.gilbert_iterations = gilbert_iterations;
            let bundle = reproduce(target, &config)?;
            for check in &bundle.report.checks {
                emit(&check.line())?;
            }
            for path in bundle.write(&out)? {
                eprintln!("wrote {}", path.display());
            }
            return Ok(bundle.report.passed());
        }
    }
    Ok(true)
}
