//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid: {0}")]
    Grid(String),

    #[error("state preparation: {0}")]
    State(String),

    #[error("evolution: {0}")]
    Evolve(String),

    #[error("phase reconstruction: {0}")]
    Phase(String),

    #[error("transform: {0}")]
    Transform(String),

    #[error("ensemble: {0}")]
    Ensemble(String),

    #[error("dynamic program: {0}")]
    Dp(String),

    #[error("config: {0}")]
    Config(String),

    #[error("numerical fault: {0}")]
    Numerical(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("io: {0}")]
    Io2(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}
