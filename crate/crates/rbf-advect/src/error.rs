use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate centers: {0}")]
    DegenerateCenters(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stability parameter violated: {0}")]
    Stability(String),
    #[error("correction construction failed (cond(A) = {cond:.3e}): {context}")]
    Correction { cond: f64, context: String },
    #[error("solution blew up at t = {t} (stage {stage})")]
    BlowUp { t: f64, stage: usize },
}

impl Error {
    /// True for errors that stem from rejected user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Stability(_) | Error::Domain(_))
    }
}
