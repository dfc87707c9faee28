use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use ipdg_qmc::experiment::VectorSource;
use ipdg_qmc_cli::{commands, exit_code};

#[derive(Parser)]
#[command(
    name = "ipdg-qmc",
    version,
    about = "IPDG solves and randomly shifted lattice rules for random diffusion"
)]
struct Cli {
    /// Worker threads (defaults to all available cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output on stderr (-v info, -vv debug)
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for one parameter vector; prints norms, optionally dumps the dofs
    SolveOne {
        config: Option<PathBuf>,
        /// Comma-separated parameter vector (default: zeros)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Vec<f64>,
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Run a convergence study and write the RMSE table
    QmcRun {
        config: PathBuf,
        /// Overrides `out` from the configuration
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated lattice sizes, powers of two
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u64>>,
        /// Number of random shifts
        #[arg(long)]
        shifts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Generating vector file, or `cbc`
        #[arg(long)]
        vector: Option<String>,
    },
    /// Construct a generating vector by CBC with the configured weights
    Cbc {
        config: Option<PathBuf>,
        #[arg(long)]
        n: u64,
        /// Overrides `s` from the configuration
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print POD weights of low order
    Weights {
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        max_order: usize,
        /// Leading dimensions to enumerate
        #[arg(long, default_value_t = 5)]
        dims: usize,
        /// Use this lambda instead of the one derived from the decay
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Report structured mesh statistics
    MeshInfo {
        #[arg(long, default_value_t = 16)]
        m: usize,
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Fit C n^r to an existing table
    Rates { table: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start {t} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let mut stdout = std::io::stdout().lock();
    let result = match cli.command {
        Command::SolveOne { config, y, dump } => commands::solve_one(config.as_deref(), y, dump, &mut stdout),
        Command::QmcRun {
            config,
            out,
            n,
            shifts,
            seed,
            vector,
        } => {
            let overrides = commands::RunOverrides {
                out,
                n_list: n,
                shifts,
                seed,
                vector: vector.map(|v| VectorSource::from(v.as_str())),
            };
            commands::qmc_run(&config, overrides, &mut stdout)
        }
        Command::Cbc { config, n, s, out } => commands::cbc(config.as_deref(), n, s, out, &mut stdout),
        Command::Weights {
            config,
            max_order,
            dims,
            lambda,
        } => commands::weights(config.as_deref(), max_order, dims, lambda, &mut stdout),
        Command::MeshInfo { m, dump } => commands::mesh_info(m, dump, &mut stdout),
        Command::Rates { table } => commands::rates(&table, &mut stdout),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
