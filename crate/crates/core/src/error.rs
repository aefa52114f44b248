use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite parameter at index {index}")]
    NonFiniteInput { index: usize },

    #[error("landscape returned a non-finite loss or gradient")]
    NonFiniteOutput,

    #[error("training diverged at step {step}")]
    TrainingDiverged { step: usize },

    #[error("relaxation produced a non-finite loss at iteration {iteration}")]
    RelaxationDiverged { iteration: usize },

    #[error("tangent undefined at pivot {index}: neighbouring pivot coincides")]
    DegenerateTangent { index: usize },

    #[error("tangent must have unit norm, got {norm}")]
    NonUnitTangent { norm: f64 },

    #[error("more than one insertion requested on segment {segment}")]
    DuplicateSegment { segment: usize },

    #[error("graph is disconnected: components {components:?}")]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("point ({x}, {y}) lies outside the grid")]
    OutsideGrid { x: f64, y: f64 },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the numerics (divergence, NaN losses)
    /// rather than by bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteOutput
                | Error::TrainingDiverged { .. }
                | Error::RelaxationDiverged { .. }
                | Error::DegenerateTangent { .. }
        )
    }
}
