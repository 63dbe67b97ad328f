//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("region is empty: {0}")]
    RegionEmpty(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("size limit exceeded: {0}")]
    Size(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("degenerate ground state: splitting {splitting:.3e} below tolerance {tol:.3e}")]
    DegenerateGroundState { splitting: f64, tol: f64 },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("gapless spectrum: {0}")]
    Gapless(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("state error: {0}")]
    State(String),
    #[error("integration error: {0}")]
    Integration(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
