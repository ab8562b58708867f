use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("point not on graph: {0}")]
    InvalidPoint(String),

    #[error("no path between {from} and {to}")]
    Unreachable { from: String, to: String },

    #[error("ball of radius {radius} around {center} is not simple (nearest other vertex at {limit})")]
    NotSimple {
        center: String,
        radius: f64,
        limit: f64,
    },

    #[error("paths are not aligned on a common time grid: {0}")]
    Alignment(String),

    #[error("no skeleton entry within {radius} of the query point (nearest at {gap})")]
    DensityViolation { radius: f64, gap: f64 },

    #[error("repair iteration hit the cap of {cap} restarts")]
    CapReached {
        cap: usize,
        trace: Box<crate::flow_extension::RepairTrace>,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
