use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use pinnkit_core::benchmarks::{
    dump_fields, format_table, reference, run_benchmark, run_data_parallel, ablation_runner, AblationGrid, DeskConfig,
    Flags, ProblemId, RunFile,
};
use pinnkit_core::quantum::{estimate_complexity, verify_counter_matrix, ComplexityInput};
use pinnkit_core::Error;

#[derive(Parser)]
#[command(name = "pinnkit", version, about = "Physics-informed network training and benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one problem from a TOML run file.
    Train {
        #[arg(long)]
        problem: ProblemId,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Parent directory of the run directory.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Benchmark runs and ablations.
    Bench {
        #[command(subcommand)]
        cmd: BenchCommand,
    },
    /// Circuit-evaluation complexity tools.
    Quantum {
        #[command(subcommand)]
        cmd: QuantumCommand,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Train one flag set and compare with the reference solution.
    Run {
        #[arg(long)]
        problem: ProblemId,
        /// Comma-separated flags, e.g. `rff,balancing,periodic,lbfgs=4000`.
        #[arg(long, default_value = "")]
        flags: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML run file; its `[desk]` table overrides the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write predicted fields on the comparison grid as CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Run every cell of a TOML ablation grid and print a sorted table.
    Ablate {
        #[arg(long)]
        grid: PathBuf,
        /// Also write the full results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum QuantumCommand {
    /// Predicted circuit evaluations per loss and per optimizer step.
    Complexity {
        #[arg(long)]
        qubits: u64,
        #[arg(long)]
        params: u64,
        #[arg(long)]
        order: u32,
        /// Mixed partials used at each order, comma-separated.
        #[arg(long, value_delimiter = ',')]
        sk: Option<Vec<u64>>,
    },
    /// Compare instrumented evaluation counts with the prediction.
    VerifyCounter {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        cases: usize,
    },
}

fn read_run_file(problem: ProblemId, path: Option<&Path>) -> Result<RunFile, Error> {
    match path {
        Some(p) => RunFile::parse(problem, &std::fs::read_to_string(p)?),
        None => Ok(RunFile {
            flags: Flags::default(),
            desk: DeskConfig::for_problem(problem),
        }),
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Command::Train {
            problem,
            config,
            workers,
            seed,
            out,
        } => {
            let file = read_run_file(problem, config.as_deref())?;
            let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            let dir = out.join(format!("{problem:?}-{stamp}-seed{seed}").to_lowercase());
            std::fs::create_dir_all(&dir)?;
            let (report, net) = if workers > 1 {
                run_data_parallel(problem, &file.flags, &file.desk, seed, workers, Some(dir.clone()))?
            } else {
                run_benchmark(problem, &file.flags, &file.desk, seed, Some(dir.clone()))?
            };
            dump_fields(net.as_ref(), &reference(problem, &file.desk)?, &dir.join("fields.csv"))?;
            std::fs::write(dir.join("report.json"), json(&report))?;
            println!("{}", json(&report));
        }
        Command::Bench { cmd } => match cmd {
            BenchCommand::Run {
                problem,
                flags,
                seed,
                config,
                dump,
            } => {
                let mut file = read_run_file(problem, config.as_deref())?;
                if !flags.is_empty() {
                    file.flags = Flags::parse(&flags)?;
                }
                let (report, net) = run_benchmark(problem, &file.flags, &file.desk, seed, None)?;
                if let Some(path) = dump {
                    dump_fields(net.as_ref(), &reference(problem, &file.desk)?, &path)?;
                }
                println!("{}", json(&report));
            }
            BenchCommand::Ablate { grid, json: out } => {
                let text = std::fs::read_to_string(&grid)?;
                let grid: AblationGrid = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                let rows = ablation_runner(&grid)?;
                print!("{}", format_table(&rows));
                if let Some(path) = out {
                    std::fs::write(path, json(&rows))?;
                }
            }
        },
        Command::Quantum { cmd } => match cmd {
            QuantumCommand::Complexity {
                qubits,
                params,
                order,
                sk,
            } => {
                let r = estimate_complexity(&ComplexityInput {
                    q: qubits,
                    p: params,
                    k: order,
                    s: sk,
                })?;
                println!("N_loss = {}", r.n_loss);
                println!("N_step = {}", r.n_step);
                println!("S = {:?} (bounds {:?})", r.s, r.bounds);
            }
            QuantumCommand::VerifyCounter { seed, cases } => {
                let checks = verify_counter_matrix(seed, cases)?;
                for c in &checks {
                    println!(
                        "S = {:?}: loss {} step {} (predicted {} / {})",
                        c.report.s, c.counted_loss, c.counted_step, c.report.n_loss, c.report.n_step
                    );
                }
                println!("{} configurations, all counts match", checks.len());
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
