use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants follow the stage of the pipeline that
/// produced them so CLI error messages read naturally.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("data error: {0}")]
    Data(String),
    #[error("design error: {0}")]
    Design(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("expression error: {0}")]
    Expr(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("likelihood error: {0}")]
    Likelihood(String),
    #[error("optimization error: {0}")]
    Optim(String),
    #[error("inference failure: {0}")]
    Inference(String),
    #[error("prediction error: {0}")]
    Predict(String),
    #[error("config error: {0}")]
    Config(String),
}
