//! `sentropy`: dependence analysis, sensor selection, online fusion, and
//! synthetic-source simulation over sensor-stream CSVs.
//!
//! Every run writes a `manifest.json` with the fully resolved configuration
//! (the only output carrying a timestamp), so identical configs on identical
//! inputs reproduce every other artifact byte for byte.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sentropy::Error;

const EXIT_IO: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "sentropy",
    version,
    about = "Quantify dependence among sensor streams, select independent subsets, and fuse sensors online",
    after_help = "Exit codes: 0 success, 2 I/O failure, 3 parse/format failure, 4 validation failure.\n\
                  Failures also emit a JSON object {\"error\": {kind, message, exit_code}} on stderr."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate joint entropies of sensor subsets and check the
    /// polymatroid axioms.
    Analyze(AnalyzeArgs),
    /// Draw sensor subsets by independent coin flips, optionally scoring
    /// their independence defects against an estimator.
    SelectRandom(SelectRandomArgs),
    /// Grow a high-entropy subset greedily with an early-stop threshold.
    SelectGreedy(SelectGreedyArgs),
    /// Fuse base sensors and a synthesized family online by exponential
    /// weighting.
    Fuse(FuseArgs),
    /// Generate a seeded realization of a synthetic source spec.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Sensor CSV: wide (`t,s1,..,sK`, integer symbols) or long
    /// (`epoch,sensor_id,value`, reals in [0,1]); detected by header.
    #[arg(long)]
    input: std::path::PathBuf,
    /// Quantization bins for long-layout values.
    #[arg(long, default_value_t = 2)]
    bins: u64,
    /// Alphabet size for wide-layout symbols (default: max symbol + 1).
    #[arg(long)]
    alpha: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    ingest: IngestArgs,
    /// Entropy estimator.
    #[arg(long, default_value = "empirical", value_parser = ["empirical", "lz"])]
    estimator: String,
    /// Comma-separated decimal subset masks; all non-empty subsets when omitted.
    #[arg(long, value_delimiter = ',')]
    subsets: Option<Vec<u64>>,
    /// Largest sensor count for which the full lattice may be evaluated.
    #[arg(long, default_value_t = sentropy::DEFAULT_LATTICE_CAP)]
    lattice_cap: u32,
    /// Axiom-check tolerance in bits.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Dump the parsed phrases of each analyzed subset (lz estimator only).
    #[arg(long)]
    phrases: bool,
    #[arg(long, default_value = ".")]
    output_dir: std::path::PathBuf,
}

#[derive(Args)]
struct SelectRandomArgs {
    /// Score draws against this sensor CSV (otherwise pass --num-sensors).
    #[arg(long)]
    input: Option<std::path::PathBuf>,
    #[arg(long, default_value_t = 2)]
    bins: u64,
    #[arg(long)]
    alpha: Option<u64>,
    /// Number of sensors when no input is given.
    #[arg(long)]
    num_sensors: Option<u32>,
    /// Estimator used to score draws when an input is given.
    #[arg(long, default_value = "empirical", value_parser = ["empirical", "lz"])]
    estimator: String,
    /// Inclusion probability per sensor.
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draws to make; draw i uses seed + i.
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// Evaluate the success guarantee for this `a` (requires --rank).
    #[arg(long)]
    guarantee_a: Option<f64>,
    /// True matroid rank for the guarantee.
    #[arg(long)]
    rank: Option<f64>,
    #[arg(long, default_value = ".")]
    output_dir: std::path::PathBuf,
}

#[derive(Args)]
struct SelectGreedyArgs {
    #[command(flatten)]
    ingest: IngestArgs,
    #[arg(long, default_value = "lz", value_parser = ["empirical", "lz"])]
    estimator: String,
    /// Stop once the best gain no longer exceeds this threshold (bits).
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value = ".")]
    output_dir: std::path::PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    /// Wide CSV (`t,s1,..,sK`) of base-sensor outputs in [0, 1].
    #[arg(long)]
    input: std::path::PathBuf,
    /// CSV (`t,x`) with the binary truth sequence.
    #[arg(long)]
    truth: std::path::PathBuf,
    /// Synthesized family: pair-average | ordered-pairs | max:M | median:M.
    #[arg(long)]
    family: String,
    #[arg(long, default_value = "logloss", value_parser = ["hamming", "logloss"])]
    loss: String,
    /// Log-loss clamp.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Learning rate: `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    eta: String,
    /// Restart with block-optimal rates on exponentially growing blocks
    /// (horizon-free variant; overrides --eta).
    #[arg(long)]
    doubling: bool,
    /// Compute family member outputs on the fly instead of materializing
    /// the full competitor grid.
    #[arg(long)]
    lazy_members: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    output_dir: std::path::PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Source spec JSON (bases, derived sensors, seed).
    #[arg(long)]
    spec: std::path::PathBuf,
    #[arg(long)]
    steps: usize,
    /// Override the seed stored in the spec.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    output_dir: std::path::PathBuf,
}

/// Exit class and machine-readable kind of an error.
fn classify(error: &Error) -> (&'static str, u8) {
    match error {
        Error::Io(_) => ("io", EXIT_IO),
        Error::Csv(_) => ("csv", EXIT_PARSE),
        Error::Json(_) => ("json", EXIT_PARSE),
        Error::CsvLayout { .. } => ("csv-layout", EXIT_PARSE),
        Error::EmptyInput => ("empty-input", EXIT_VALIDATION),
        Error::SymbolOutOfRange { .. } => ("symbol-out-of-range", EXIT_VALIDATION),
        Error::LatticeTooLarge { .. } => ("lattice-too-large", EXIT_VALIDATION),
        Error::MissingSubset { .. } => ("missing-subset", EXIT_VALIDATION),
        Error::TruthNotBinary { .. } => ("truth-not-binary", EXIT_VALIDATION),
        Error::HammingNonBinary { .. } => ("hamming-non-binary", EXIT_VALIDATION),
        _ => ("validation", EXIT_VALIDATION),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Analyze(args) => commands::analyze(args),
        Command::SelectRandom(args) => commands::select_random(args),
        Command::SelectGreedy(args) => commands::select_greedy(args),
        Command::Fuse(args) => commands::fuse(args),
        Command::Simulate(args) => commands::simulate(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            let (kind, code) = classify(&error);
            let report = serde_json::json!({
                "error": { "kind": kind, "message": error.to_string(), "exit_code": code }
            });
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}
