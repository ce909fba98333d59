use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("simulation blowup: component magnitude exceeded {0:e}")]
    SimulationBlowup(f64),
    #[error("ill-conditioned data: {0}")]
    IllConditioned(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("sensor {0} has no history to bootstrap alignment")]
    MissingBootstrap(String),
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
    #[error("control history does not cover ({0}, {1}]")]
    IncompleteHistory(f64, f64),
    #[error("alert raised before any history window was committed")]
    NoSafeHistory,
    #[error("(A, B) pair not stabilizable: Riccati iteration did not converge")]
    NonStabilizable,
    #[error("detector calibration failure: {0}")]
    CalibrationFailure(String),
    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),
    #[error("no attack-free baseline runs available")]
    NoBaseline,
    #[error("invalid config: {}", .0.join("; "))]
    ConfigValidation(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    ConfigParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
