use thiserror::Error;

/// Errors surfaced by the library. The CLI maps these onto exit codes:
/// config/validation problems exit 2, solver failures (vacuum, retry cap) exit 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("vacuum reached at cell {cell}, t = {t:.6}: rho = {rho:.3e} fell below the floor {floor:.3e}")]
    VacuumReached {
        cell: usize,
        t: f64,
        rho: f64,
        floor: f64,
    },

    #[error("step retry cap exhausted at t = {t:.6}: {retries} halvings of dt did not restore the entropy budget")]
    RetryCapExhausted { t: f64, retries: u32 },

    #[error("fit window holds {count} records, need at least {min}")]
    WindowTooShort { count: usize, min: usize },

    #[error("nonpositive entropy value {value:.3e} at t = {t:.6}; cannot fit a log-linear decay")]
    NonpositiveEntropy { t: f64, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("inadmissible law/pressure pair: {0} (pass --override-admissibility to run anyway)")]
    Admissibility(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
