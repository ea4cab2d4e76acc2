use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("line {line}: vertex index {index} out of range (mesh has {count} vertices)")]
    IndexOutOfRange { line: usize, index: i64, count: usize },

    #[error("line {line}: degenerate triangle (area {area:e} mm²)")]
    DegenerateTriangle { line: usize, area: f64 },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Poisson ratio {nu} outside (-1, 0.5): Lamé parameters are singular")]
    IncompressibleLimit { nu: f64 },

    #[error("deformation gradient of particle {index} is inverted (det F = {det:e})")]
    InvertedDeformation { index: usize, det: f64 },

    #[error("particle {index} left the grid interior at {position:?}")]
    ParticleOutsideGrid { index: usize, position: [f64; 3] },

    #[error(
        "CFL violated: particle {index} speed {speed:.3} mm/s moves {travel:.4} mm per substep (limit {limit:.4} mm)"
    )]
    Cfl { index: usize, speed: f64, travel: f64, limit: f64 },

    #[error("non-finite value in particle {index}")]
    NonFinite { index: usize },

    #[error("substep {substep}: {source}")]
    Substep {
        substep: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("all {0} calibration sequences failed")]
    AllSequencesFailed(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by the numerics (as opposed to input or I/O).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::InvertedDeformation { .. }
            | Error::ParticleOutsideGrid { .. }
            | Error::Cfl { .. }
            | Error::NonFinite { .. }
            | Error::AllSequencesFailed(_) => true,
            Error::Substep { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
