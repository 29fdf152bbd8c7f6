use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no sign change of the rate curve inside [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("did not converge: {0}")]
    NoConvergence(String),
    #[error("non-positive inverse-gamma scale at temperature {temperature}")]
    InvalidScale { temperature: f64 },
    #[error("zero rate at temperature {temperature} is not supported by the inverse-gamma likelihood")]
    UnsupportedZero { temperature: f64 },
    #[error("gradient requested where the log density is -inf")]
    NoGradient,
    #[error("chain {chain}: no finite starting point after {tries} tries")]
    Initialization { chain: usize, tries: usize },
    #[error("every warmup transition diverged (chain {chain})")]
    AllDivergent { chain: usize },
    #[error("all ELBO draws landed where the log density is -inf")]
    DegenerateElbo,
    #[error("empty draw set")]
    EmptyDraws,
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("leave-one-out refit for observation {index} failed: {source}")]
    RefitFailed { index: usize, source: Box<Error> },
    #[error("power-posterior rung t={t} failed: {source}")]
    RungFailed { t: f64, source: Box<Error> },
    #[error("bridge iteration diverged; trace of log estimates: {trace:?}")]
    BridgeDiverged { trace: Vec<f64> },
    #[error("analytic evidence is only available for the conjugate normal model")]
    NotConjugate,
    #[error("model {model} has weight {weight:e} but no draws of {quantity}")]
    MissingQuantity { model: String, quantity: String, weight: f64 },
    #[error("non-finite model score at index {0}")]
    NonFiniteScore(usize),
    #[error("data error at line {line}: {msg}")]
    Data { line: usize, msg: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid user input rather than a numerical
    /// failure during fitting.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_)
                | Error::DegenerateDataset(_)
                | Error::Data { .. }
                | Error::Config(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::NotConjugate
                | Error::UnsupportedZero { .. }
        )
    }
}
