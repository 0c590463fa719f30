use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("total mass {total} differs from 1 by more than {tolerance:e}")]
    NotNormalized { total: f64, tolerance: f64 },

    #[error("negative mass {value} at {location}")]
    NegativeMass { location: String, value: f64 },

    #[error("kolmogorov distance needs a nonempty grid")]
    EmptyGrid,

    #[error("support window of {sites} sites exceeds the cap of {cap}")]
    WindowOverflow { sites: usize, cap: usize },

    #[error("tree sampler needs {nodes} leaves, more than the cap of {cap}")]
    BudgetExceeded { nodes: f64, cap: u64 },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("window of length {length} is shorter than two mesh cells ({min})")]
    WindowTooSmall { length: f64, min: f64 },

    #[error("lattice class weights sum to {sum}, not 1")]
    InvalidPi { sum: f64 },

    #[error("p* bound not reached within {cap} steps")]
    CapExceeded { cap: u64 },

    #[error("p* bound reached at step {hit} but lost again at step {lost}")]
    BoundNotPreserved { hit: u64, lost: u64 },

    #[error("mesh too coarse: dx = {dx} exceeds {limit} ({which})")]
    MeshTooCoarse {
        dx: f64,
        limit: f64,
        which: &'static str,
    },

    #[error("test function support [{lo}, {hi}] escapes the grid [{grid_lo}, {grid_hi}]")]
    SupportEscape {
        lo: f64,
        hi: f64,
        grid_lo: f64,
        grid_hi: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Variant name, as reported by the command line tool.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotNormalized { .. } => "NotNormalized",
            Error::NegativeMass { .. } => "NegativeMass",
            Error::EmptyGrid => "EmptyGrid",
            Error::WindowOverflow { .. } => "WindowOverflow",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::DomainError(_) => "DomainError",
            Error::WindowTooSmall { .. } => "WindowTooSmall",
            Error::InvalidPi { .. } => "InvalidPi",
            Error::CapExceeded { .. } => "CapExceeded",
            Error::BoundNotPreserved { .. } => "BoundNotPreserved",
            Error::MeshTooCoarse { .. } => "MeshTooCoarse",
            Error::SupportEscape { .. } => "SupportEscape",
            Error::Parse(_) => "Parse",
        }
    }
}
