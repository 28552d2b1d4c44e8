//! Shared error type for every numeric module.

use thiserror::Error;

use crate::editor::EditTrajectory;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix did not have the dimensions an operation required.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Model construction or deserialization produced an inconsistent model.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A configuration value violated a documented invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An attribute name was not found in the world.
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),

    /// Two directions that must describe the same attribute did not.
    #[error("attribute mismatch: {expected:?} vs {actual:?}")]
    AttributeMismatch { expected: String, actual: String },

    /// A gradient with no usable direction; the classifier is locally flat.
    #[error("gradient norm {norm:.3e} for attribute {attribute:?} is below the normalization floor")]
    ZeroGradient { attribute: String, norm: f64 },

    /// Training data contained a single class.
    #[error("degenerate training data: all labels identical")]
    DegenerateData,

    /// Training diverged.
    #[error("non-finite loss {loss} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    /// No sample contributed to an averaged direction.
    #[error("no usable samples for attribute {0:?}")]
    EmptySampleSet(String),

    /// Blending two direction components cancelled them out.
    #[error("combined direction for attribute {0:?} has near-zero norm")]
    DegenerateCombination(String),

    /// The primal direction lies in the span of its condition directions.
    #[error("primal direction for attribute {0:?} lies in the condition span")]
    DegenerateProjection(String),

    /// The requested pairwise angles admit no embedding in the latent space.
    #[error("infeasible entanglement angles: {0}")]
    InfeasibleAngles(String),

    /// A sampling-bias target cannot be realized by rejection.
    #[error("unreachable sampling bias: {0}")]
    BiasUnreachable(String),

    /// A world classifier missed the held-out accuracy floor.
    #[error("{role} classifier for {attribute:?} reached held-out accuracy {accuracy:.4}, below the floor {floor:.2}")]
    ClassifierTrainingFailed {
        attribute: String,
        role: &'static str,
        accuracy: f64,
        floor: f64,
    },

    /// A grid search needs at least two attributes.
    #[error("grid search requires at least two attributes")]
    NoAttributePairs,

    /// An edit stopped early; the prefix holds every completed step.
    #[error("edit aborted before step {failed_step}: {source}")]
    EditAborted {
        failed_step: usize,
        prefix: Box<EditTrajectory>,
        #[source]
        source: Box<Error>,
    },

    /// A document failed to parse or had an unsupported version.
    #[error("serialization: {0}")]
    Serialization(String),
}
