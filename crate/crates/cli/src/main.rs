use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use maxent_cli::runner::{EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK};
use maxent_cli::{run, selftest, ExperimentConfig, GeometryChoice, RunManifest};

#[derive(Parser)]
#[command(
    name = "maxent",
    version,
    about = "Max-Ent projected and restricted spin-chain dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryArg {
    Kmb,
    Covar,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run { config: PathBuf },
    /// Check a config and list every violation.
    Validate { config: PathBuf },
    /// Run one of the six-site ring presets.
    PaperExperiment {
        #[arg(long, value_parser = ["0.1", "1.0"])]
        beta: String,
        #[arg(long, value_enum, default_value = "both")]
        geometry: GeometryArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the randomized invariant suites.
    Selftest {
        /// Config whose seed is used.
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Multiplier on the number of cases per suite.
        #[arg(long, default_value_t = 1)]
        scale: usize,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::from_path(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG as u8)
    })
}

fn report(manifest: &RunManifest) {
    println!("status: {}", manifest.status);
    println!("basis: {}", manifest.basis.join(", "));
    for p in &manifest.phases {
        println!("  {:<24} {:>10.3} s", p.phase, p.seconds);
    }
    for w in &manifest.warnings {
        println!("warning: {w}");
    }
    println!("outputs in {}", manifest.config.outputs.directory.display());
}

fn execute(config: &ExperimentConfig) -> ExitCode {
    match run(config) {
        Ok(manifest) => {
            report(&manifest);
            ExitCode::from(EXIT_OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => match load(&config) {
            Ok(c) => execute(&c),
            Err(code) => code,
        },
        Command::Validate { config } => match load(&config) {
            Ok(c) => {
                let violations = c.validate();
                if violations.is_empty() {
                    println!("ok");
                    ExitCode::from(EXIT_OK as u8)
                } else {
                    for v in &violations {
                        println!("{v}");
                    }
                    ExitCode::from(EXIT_CONFIG as u8)
                }
            }
            Err(code) => code,
        },
        Command::PaperExperiment {
            beta,
            geometry,
            out,
        } => {
            let beta: f64 = beta.parse().expect("validated by clap");
            let geometries = match geometry {
                GeometryArg::Kmb => vec![GeometryChoice::Kmb],
                GeometryArg::Covar => vec![GeometryChoice::Covar],
                GeometryArg::Both => vec![GeometryChoice::Kmb, GeometryChoice::Covar],
            };
            execute(&ExperimentConfig::preset(beta, geometries, out))
        }
        Command::Selftest {
            config,
            seed,
            scale,
        } => {
            let seed = match (seed, config) {
                (Some(s), _) => s,
                (None, Some(path)) => match load(&path) {
                    Ok(c) => c.seed,
                    Err(code) => return code,
                },
                (None, None) => 0,
            };
            let results = selftest::run_all(seed, scale);
            for r in &results {
                println!("{r}");
            }
            if results.iter().all(|r| r.passed()) {
                ExitCode::from(EXIT_OK as u8)
            } else {
                ExitCode::from(EXIT_NUMERICAL as u8)
            }
        }
    }
}
