use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error("no usable signal: {0}")]
    NoSignal(String),
    #[error("invalid pattern: {0}")]
    Pattern(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
