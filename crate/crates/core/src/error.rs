use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the WKB toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WkbError {
    #[error("evaluation overflow at z = {z}")]
    Range { z: Complex64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix is not unimodular (max |det - 1| = {defect:e})")]
    NotUnimodular { defect: f64 },

    #[error("path passes too close to a turning point near z = {z}")]
    BranchAmbiguity { z: Complex64 },

    #[error("branch continuation failed to converge near z = {z}")]
    StepFailure { z: Complex64 },

    #[error("momentum derivative is singular at z = {z} (sin p vanishes)")]
    Singularity { z: Complex64 },

    #[error("too close to a pole of the phase differential at z = {z}")]
    PoleProximity { z: Complex64 },

    #[error("incomplete root search: argument principle counts {expected}, refinement found {found}")]
    IncompleteSearch { expected: usize, found: usize },

    #[error("neither asymptotic candidate fits at height y = {y}; increase Y")]
    InsufficientHeight { y: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("invalid normalization point z0 = {z}: eigenvector vanishes")]
    InvalidNormalization { z: Complex64 },

    #[error("loop closure test disagrees with requested turns: {0}")]
    TurnMismatch(String),

    #[error("matrix is defective (repeated eigenvalue)")]
    Defective,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<WkbError>,
    },
}

impl WkbError {
    pub fn context(self, context: impl Into<String>) -> Self {
        WkbError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error with all context layers removed.
    pub fn root(&self) -> &WkbError {
        match self {
            WkbError::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = WkbError> = std::result::Result<T, E>;
