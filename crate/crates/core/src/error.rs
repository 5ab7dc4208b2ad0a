use thiserror::Error;

/// Errors produced by the geometry, diffraction, estimation and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("floor {floor} out of range 1..={num_floors}")]
    FloorOutOfRange { floor: usize, num_floors: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate edge: endpoints share the same x coordinate")]
    DegenerateEdge,

    #[error("no edge diffraction: diffraction point lies beyond the edge (lambda = {lambda})")]
    NoEdgeDiffraction { lambda: f64 },

    #[error("no quadratic root satisfies the law of diffraction (best residual {residual:e})")]
    RootSelection { residual: f64 },

    #[error(
        "anchor placement implausible: {discarded} of {drawn} bias samples had no edge diffraction"
    )]
    GeometryWarning { discarded: usize, drawn: usize },

    #[error("no range measurement available for anchor {anchor}")]
    MeasurementUnavailable { anchor: usize },

    #[error("singular anchor geometry: {0}")]
    SingularGeometry(String),

    #[error("near-singular derivative: discriminant {discriminant:e} too close to zero")]
    NearSingularDerivative { discriminant: f64 },

    #[error("estimation failed: {0}")]
    EstimationFailure(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors that stem from user-supplied configuration rather than
    /// from a failure while running.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::Parse(_) | Error::FloorOutOfRange { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
