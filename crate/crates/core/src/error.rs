use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown vortex family `{0}`")]
    UnknownFamily(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("vortex at ({x:.3}, {y:.3}) lies outside the detection disc r <= {r_edge:.3}; the product ansatz only holds away from the condensate edge")]
    OutsideDisc { x: f64, y: f64, r_edge: f64 },

    #[error("non-finite field value at step {step} (t = {t:.6})")]
    NonFinite { step: usize, t: f64 },

    #[error("imaginary-time iteration did not converge after {iterations} steps (last energies: {history:?})")]
    NotConverged { iterations: usize, history: Vec<f64> },

    #[error("central vortex lost its winding during imaginary-time iteration (step {step})")]
    WindingLost { step: usize },

    #[error("plaquette ({i}, {j}) carries winding {winding}; refine the grid")]
    GridTooCoarse { i: usize, j: usize, winding: i32 },

    #[error("empty averaging window [{0}, {1}]")]
    EmptyWindow(f64, f64),

    #[error("frame grids differ: {0}")]
    FrameMismatch(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag, used by the CLI error manifest and the C API.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::Degenerate(_) => "degenerate",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::UnknownFamily(_) => "unknown_family",
            Error::Unsupported(_) => "unsupported",
            Error::OutsideDisc { .. } => "outside_disc",
            Error::NonFinite { .. } => "non_finite",
            Error::NotConverged { .. } => "not_converged",
            Error::WindingLost { .. } => "winding_lost",
            Error::GridTooCoarse { .. } => "grid_too_coarse",
            Error::EmptyWindow(..) => "empty_window",
            Error::FrameMismatch(_) => "frame_mismatch",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
