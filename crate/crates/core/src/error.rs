use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid spin index {0}, expected -1, 0 or +1")]
    InvalidSpin(i32),

    #[error("step size {dt:e} s exceeds t_pa/100 = {max:e} s")]
    StepTooLarge { dt: f64, max: f64 },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("fit did not converge")]
    NotConverged,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
