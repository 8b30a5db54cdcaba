use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the admissible range [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("training diverged at step {step} (batch seed {seed}): {message}")]
    Training {
        step: u64,
        seed: u64,
        message: String,
    },
    #[error("linear system is numerically singular (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("division by zero: {0}")]
    Division(&'static str),
    #[error("series did not converge: {0}")]
    Series(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Read a whole file, naming it in the error.
pub fn read_text(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}
