use alloc::string::String;

/// Errors produced by the topic-model core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("corpus is empty after filtering ({dropped} documents dropped)")]
    CorpusEmpty { dropped: usize },
    #[error("invalid split ratio: {0}")]
    InvalidRatio(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("document has fewer than two distinct tokens; no sample pair can be formed")]
    SamplerDegenerate,
    #[error("at least two documents are required")]
    TooFewDocuments,
    #[error("token id {0} is not known to the reference statistics")]
    UnknownToken(u32),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch}, step {step}: {diagnostics}")]
    Divergence {
        epoch: usize,
        step: u64,
        diagnostics: String,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
