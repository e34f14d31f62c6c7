use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no vertex within {tol:e} of ({x}, {y}, {z})", x = point[0], y = point[1], z = point[2])]
    NotFound { point: [f64; 3], tol: f64 },

    #[error("{count} vertices within {tol:e} of ({x}, {y}, {z})", x = point[0], y = point[1], z = point[2])]
    Ambiguous {
        point: [f64; 3],
        tol: f64,
        count: usize,
    },

    /// A field with a logarithmic singularity was evaluated at (or too close to) its pole.
    #[error("field `{field}` is singular at x3 = {x3}")]
    SingularPoint { field: String, x3: f64 },

    #[error("triangle {triangle} is degenerate (area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    /// Factorization or iteration failure; `residual` holds the best relative residual reached.
    #[error("solver failure: {message}")]
    Solver {
        message: String,
        residual: Option<f64>,
    },

    #[error("malformed OFF file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
