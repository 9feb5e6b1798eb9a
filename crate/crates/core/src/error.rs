use thiserror::Error;

/// Errors raised by the solvers, loaders and verification harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("group has no members")]
    EmptyGroup,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid randomized classifier: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("input contains no data rows")]
    EmptyInput,

    #[error("oracle weights are all zero")]
    ZeroWeights,

    #[error("oracle weights must be finite and non-negative")]
    BadWeights,

    #[error("logistic training diverged (non-finite loss) with learning rate {learning_rate}")]
    Diverged { learning_rate: f64 },

    #[error("mirror descent stopped after {iterations} iterations without certifying optimality (relative certificate gap {gap:.3e})")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("every hPF round scored zero; cannot normalize the mixture")]
    DegenerateOracle,

    #[error("greedy round {round} covers none of the {remaining} remaining points")]
    StuckGreedy { round: usize, remaining: usize },

    #[error("subset enumeration is limited to n <= {max}, got n = {n}")]
    EnumerationGuard { n: usize, max: usize },

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
