use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use firdesign::config::{Mode, RunConfig};
use firdesign::export::{export_artifacts, read_sequence_csv, to_json_string, write_bench_csv};
use firdesign::pipeline::{self, BenchSweep};
use firdesign::realization::Rounding;
use firdesign::Error;

#[derive(Parser)]
#[command(name = "firdesign", version, about = "D-optimal multilevel inputs for nonlinear FIR systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `design.mode`.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Round counts to the nearest integer instead of apportioning exactly.
    #[arg(long)]
    paper_rounding: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sweep {
    Amplitude,
    Memory,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the design.
    Design(Common),
    /// Optimize and realize a periodic input sequence.
    Realize(Common),
    /// Score an existing sequence file (`t,u` CSV).
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sequence: PathBuf,
    },
    /// Best of many uniform random sequences.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
    /// Time basis construction and optimization of constrained designs.
    Bench {
        #[arg(long, value_enum, default_value = "both")]
        sweep: Sweep,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        /// Writes `bench.csv` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare unconstrained designs over several subsequence lengths.
    Memlen {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        lengths: Vec<usize>,
    },
    /// Realize and write every artifact format.
    Export(Common),
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

enum Failure {
    Config(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Domain(_) | Error::Size(_) => 2,
        Error::Singular(_) | Error::Realizability(_) => 3,
        _ => 1,
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut config =
        RunConfig::from_path(&common.config).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(mode) = common.mode {
        config.design.mode = mode;
    }
    if common.paper_rounding {
        config.realize.rounding = Rounding::Nearest;
    }
    if let Some(out) = &common.out {
        config.output.directory = Some(out.clone());
    }
    Ok(config)
}

fn export_to(config: &RunConfig, report: &pipeline::RunReport, dir: &Path) -> Result<(), Failure> {
    let written = export_artifacts(report, dir, &config.output.formats)?;
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Design(common) => {
            let config = load(&common)?;
            let report = pipeline::run_design(&config)?;
            if let Some(dir) = &config.output.directory {
                export_to(&config, &report, dir)?;
            }
            print!("{}", to_json_string(&report));
        }
        Command::Realize(common) => {
            let config = load(&common)?;
            let report = pipeline::run_realize(&config)?;
            if let Some(dir) = &config.output.directory {
                export_to(&config, &report, dir)?;
            }
            print!("{}", to_json_string(&report));
        }
        Command::Export(common) => {
            let config = load(&common)?;
            let dir = config.output.directory.clone().ok_or_else(|| {
                Failure::Config("export needs --out or output.directory".into())
            })?;
            let report = pipeline::run_realize(&config)?;
            export_to(&config, &report, &dir)?;
            print!("{}", to_json_string(&report));
        }
        Command::Evaluate { common, sequence } => {
            let config = load(&common)?;
            let seq = read_sequence_csv(&sequence)?;
            print!("{}", to_json_string(&pipeline::run_evaluate(&config, &seq)?));
        }
        Command::Baseline { common, count } => {
            let config = load(&common)?;
            if count < 1 {
                return Err(Failure::Config("--count must be at least 1".into()));
            }
            print!("{}", to_json_string(&pipeline::run_baseline(&config, count)?));
        }
        Command::Bench {
            sweep,
            repetitions,
            out,
        } => {
            let mut problems = Vec::new();
            if matches!(sweep, Sweep::Amplitude | Sweep::Both) {
                problems.extend(BenchSweep::amplitude((4..=20).step_by(4)).problems);
            }
            if matches!(sweep, Sweep::Memory | Sweep::Both) {
                problems.extend(BenchSweep::memory(2..=8).problems);
            }
            let mut bench = BenchSweep::new(problems);
            bench.repetitions = repetitions;
            let rows = pipeline::run_bench(&bench)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Failure::Run(Error::Io {
                    path: dir.clone(),
                    source: e,
                }))?;
                let path = dir.join("bench.csv");
                write_bench_csv(&path, &rows)?;
                eprintln!("wrote {}", path.display());
            }
            print!("{}", to_json_string(&rows));
        }
        Command::Memlen { common, lengths } => {
            let config = load(&common)?;
            print!("{}", to_json_string(&pipeline::run_memory_experiment(&config, &lengths)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
