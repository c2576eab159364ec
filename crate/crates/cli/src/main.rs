//! `avq`: train, encode and evaluate additive vector quantizers.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "avq",
    version,
    about = "Additive vector quantization for ANN search"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a synthetic Gaussian-mixture dataset.
    Gen(commands::GenArgs),
    /// Learn a codebook.
    Train(commands::TrainArgs),
    /// Encode a database with a trained codebook.
    Encode(commands::EncodeArgs),
    /// Recall@R and quantization error of an encoded database.
    Eval(commands::EvalArgs),
    /// Code entropy and mutual information between dictionaries.
    Stats(commands::StatsArgs),
    /// Refine a codebook on new data, batch by batch.
    Update(commands::UpdateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Pq,
    Rvq,
    Da,
    Darvq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Encoder {
    /// Product encoding for product codebooks, beam search otherwise.
    Auto,
    Beam,
    Greedy,
    Icm,
    Exhaustive,
    Pq,
}

/// Options shared by every command that trains.
#[derive(Args, Debug, Clone)]
pub struct AnnealArgs {
    /// Beam width L.
    #[arg(long = "beam", default_value_t = 10)]
    beam: usize,
    /// Annealing iterations (default: M).
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 5)]
    subspace_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<avq_core::Error> for Failure {
    fn from(e: avq_core::Error) -> Self {
        use avq_core::Error::*;
        let code = match &e {
            Argument(_) | Contract(_) => 1,
            Format { .. } | Io(_) => 2,
            Numeric(_) => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn output_path(p: &std::path::Path) -> CliResult<PathBuf> {
    match p.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(Failure::io(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(p.to_path_buf()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Train(a) => commands::train(a),
        Command::Encode(a) => commands::encode(a),
        Command::Eval(a) => commands::eval(a),
        Command::Stats(a) => commands::stats(a),
        Command::Update(a) => commands::update(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("avq: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
