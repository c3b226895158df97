use thiserror::Error;

/// Errors produced by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{function}: argument {value} outside domain {domain}")]
    Domain {
        function: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("{what} did not converge: {detail}")]
    Convergence { what: &'static str, detail: String },

    #[error("parameter fit failed: {0}")]
    Fit(String),

    #[error("Gamma-function pole: {0}")]
    GammaPole(String),

    #[error("numerical evaluation failed: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
