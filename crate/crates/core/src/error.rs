use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("sigma vanishes at breakpoint {zeta} (index {index})")]
    DegenerateDiffusion { index: usize, zeta: f64 },
    #[error("breakpoint index {index} out of range 1..={count}")]
    BreakpointIndex { index: usize, count: usize },
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("time {t} is not a node of the grid with {steps} steps")]
    NotOnGrid { t: f64, steps: usize },
    #[error("grid with {coarse} steps does not divide grid with {fine} steps")]
    Divisibility { coarse: usize, fine: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid study: {0}")]
    InvalidStudy(String),
    #[error("degenerate regression: {0}")]
    DegenerateFit(String),
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("malformed report: {0}")]
    MalformedReport(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
