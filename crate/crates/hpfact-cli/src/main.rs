//! Experiment runner: kernel certification, weak factorization runs,
//! commutator tables, and approximation-decay tables, all driven by a
//! versioned TOML config.  Identical configuration and seed produce
//! byte-identical outputs regardless of `--threads`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::Config;

#[derive(Parser)]
#[command(name = "hpfact", version, about = "Weak factorization experiments on grids")]
struct Cli {
    /// Path to the TOML configuration.
    #[arg(long, default_value = "configs/default.toml", global = true)]
    config: PathBuf,
    /// Overrides the seed recorded in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for tables and reports.
    #[arg(long, default_value = ".", global = true)]
    out: PathBuf,
    /// Worker threads (affects speed only, never results).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run size, smoothness, and homogeneity checks on the configured kernel.
    VerifyKernel,
    /// Factor the reference atom and emit the per-round decay table.
    Factorize,
    /// Tabulate commutator estimates against Hoelder seminorms.
    Commutator,
    /// Tabulate the single-factor approximation error across separations.
    DecayTable,
}

fn run() -> Result<i32, String> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => return Err(e.to_string()),
        // --help and --version print to stdout and succeed.
        Err(e) => {
            print!("{e}");
            return Ok(0);
        }
    };
    let cfg = Config::load(&cli.config)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| format!("cannot build thread pool: {e}"))?;
    let out = pool.install(|| match cli.command {
        Command::VerifyKernel => commands::cmd_verify_kernel(&cfg, seed, &cli.out),
        Command::Factorize => commands::cmd_factorize(&cfg, seed, &cli.out),
        Command::Commutator => commands::cmd_commutator(&cfg, seed, &cli.out),
        Command::DecayTable => commands::cmd_decay_table(&cfg, seed, &cli.out),
    })?;
    print!("{}", out.stdout);
    Ok(out.exit_code)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(message) => {
            eprintln!("{message}");
            ExitCode::from(1)
        }
    }
}
