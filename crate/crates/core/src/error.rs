use std::path::PathBuf;

/// Errors raised across the crate. Variants are grouped by the component that
/// produces them; the `Display` text carries the component name.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("params: beta * R = {product:.6} must be < 1")]
    BetaRViolation { product: f64 },
    #[error("params: invalid grid: {0}")]
    GridError(String),
    #[error("params: invalid probability: {0}")]
    ProbabilityError(String),
    #[error("params: {0}")]
    InvalidParams(String),

    #[error("rational: value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("neuralnet: pretraining stopped after {epochs} epochs with held-out max error {max_error:e}")]
    PretrainFailure { epochs: usize, max_error: f64 },
    #[error("neuralnet: checkpoint: {0}")]
    Checkpoint(String),
    #[error("neuralnet: parameter vector has length {got}, expected {expected}")]
    ParamLength { expected: usize, got: usize },

    #[error("polyfit: least-squares system is numerically singular")]
    SingularFit,

    #[error("agent: consumption {consumption:e} is not feasible")]
    InfeasibleChoice { consumption: f64 },
    #[error("agent: no feasible savings choice at cash-on-hand {cash:e}")]
    NoFeasibleChoice { cash: f64 },
    #[error("agent: learning attempted while frozen")]
    FrozenAgent,

    #[error("simulate: {0}")]
    Experiment(String),
    #[error("simulate: no unemployed agents observed in group `{0}`")]
    EmptyGroup(String),

    #[error("analytics: experience index needs t >= 4, got t = {0}")]
    InsufficientHistory(usize),
    #[error("analytics: regressor matrix is rank deficient")]
    RankDeficient,
    #[error("analytics: both samples have zero variance")]
    DegenerateSample,
    #[error("analytics: {0}")]
    Analytics(String),

    #[error("cli: missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
