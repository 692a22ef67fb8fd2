use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("value at index {index} is not finite")]
    NonFinite { index: usize },

    #[error("value {value} at index {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },

    #[error("need at least 2 quantization bins, got {bins}")]
    TooFewBins { bins: u64 },

    #[error("alphabet size must be positive")]
    EmptyAlphabet,

    #[error("symbol {symbol} (sensor {sensor}, step {step}) is outside the alphabet of size {alphabet}")]
    SymbolOutOfRange {
        sensor: usize,
        step: usize,
        symbol: u64,
        alphabet: u64,
    },

    #[error("sensor row {row} has {got} steps, expected {expected}")]
    RaggedRows {
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("subset is empty")]
    EmptySubset,

    #[error("subset mask {mask:#b} addresses sensors beyond the {k} available")]
    SubsetOutOfRange { mask: u64, k: u32 },

    #[error("product alphabet {alpha}^{size} overflows the representable symbol range")]
    ProductAlphabetOverflow { alpha: u64, size: u32 },

    #[error("mask {sub:#b} is not a subset of {of:#b}")]
    NotASubset { sub: u64, of: u64 },

    #[error("full subset lattice for {k} sensors exceeds the cap of {cap}; pass an explicit subset list")]
    LatticeTooLarge { k: u32, cap: u32 },

    #[error("subset mask {mask} has not been evaluated in this entropy vector")]
    MissingSubset { mask: u64 },

    #[error("refusing to store negative entropy {value} for mask {mask}")]
    NegativeEntropy { mask: u64, value: f64 },

    #[error("sensor count mismatch: vector has {expected}, got {got}")]
    SensorCountMismatch { expected: u32, got: u32 },

    #[error("parameter {name} = {value} is out of range: {requirement}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("hamming loss needs a binary output, got {value}; quantize first")]
    HammingNonBinary { value: f64 },

    #[error("truth symbol at step {step} is {value}, expected 0 or 1")]
    TruthNotBinary { step: usize, value: u64 },

    #[error("competitor {competitor} output at step {step} is {value}, outside [0, 1]")]
    CompetitorOutput {
        competitor: usize,
        step: usize,
        value: f64,
    },

    #[error("competitor grid shape mismatch: {detail}")]
    CompetitorShape { detail: String },

    #[error("row {row} of the transition matrix is not a probability vector (sum {sum})")]
    NotStochastic { row: usize, sum: f64 },

    #[error("probability vector invalid at entry {index} (value {value})")]
    InvalidProbability { index: usize, value: f64 },

    #[error("transition matrix is reducible; no unique stationary distribution")]
    ReducibleChain,

    #[error("derived sensor {index} references sensor {referenced}, which is not declared before it")]
    ForwardReference { index: usize, referenced: usize },

    #[error("source contains a {what}, which has no first-order analytic law; use markov_entropy_rate for per-step rates")]
    NotMemoryless { what: &'static str },

    #[error("lookup table for derived sensor {index} is invalid: {detail}")]
    BadLookupTable { index: usize, detail: String },

    #[error("unrecognized CSV layout: {detail}")]
    CsvLayout { detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
